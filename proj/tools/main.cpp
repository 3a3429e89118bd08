// Command-line front end: run, oracle-scores, simulate, report.
#include <fmt/format.h>

#include <CLI11.hpp>
#include <iostream>

#include "lal/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRunFailure = 1;
constexpr int kConfigError = 2;

int cmd_run(const std::string& config_path) {
  const auto cfg = lal::load_config(config_path);
  const auto workers = lal::workers_from_env();
  const auto records = lal::run_experiment(cfg, {workers, true});
  std::size_t failed = 0;
  for (const auto& r : records) {
    if (!r.ok()) {
      ++failed;
      fmt::print(stderr, "{} data_seed={} run_seed={} failed: {}\n", r.trace.strategy, r.trace.data_seed,
                 r.trace.run_seed, r.error);
    }
  }
  for (const auto& s : cfg.strategies) {
    std::vector<double> a;
    for (const auto& r : records) {
      if (r.ok() && r.trace.strategy == lal::strategy_name(s.kind)) a.push_back(r.auac);
    }
    if (!a.empty()) fmt::print("{:<8} AUAC {:.3f} ± {:.3f} ({} runs)\n", lal::strategy_name(s.kind), lal::mean(a), lal::stdev(a), a.size());
  }
  fmt::print("results in {}\n", cfg.output_dir.string());
  return failed ? kRunFailure : kOk;
}

lal::LoopOptions loop_options(const lal::ExperimentConfig& cfg, std::uint64_t d, std::uint64_t r, std::size_t steps) {
  lal::LoopOptions lo;
  lo.steps = steps;
  lo.acquisitions_per_step = cfg.acquisitions_per_step;
  lo.np = cfg.np;
  lo.n_sim = cfg.n_sim;
  lo.fractions = cfg.fractions;
  lo.data_seed = d;
  lo.run_seed = r;
  return lo;
}

// Replays `strategy` for `steps` rounds and returns the resulting state.
lal::ALState advance(const lal::ExperimentConfig& cfg, const lal::PreparedData& data, const lal::StrategyConfig& strategy,
                     std::uint64_t d, std::uint64_t r, std::size_t steps) {
  lal::ALState state = data.split.state;
  if (steps == 0) return state;
  const lal::Trainer trainer(cfg.classifier, data.dataset->num_classes);
  lal::Rng rng = lal::make_rng({d, r, 0xa11});
  auto lo = loop_options(cfg, d, r, steps);
  lo.scenario_cache = cfg.output_dir / "simulations";
  lal::active_learning_loop(state, strategy, trainer, data.split.test, data.split.reward, lo, rng);
  return state;
}

int cmd_oracle_scores(const std::string& config_path, std::size_t step, std::optional<std::uint64_t> data_seed,
                      std::optional<std::uint64_t> run_seed, const std::string& strategy_name) {
  auto cfg = lal::load_config(config_path);
  const auto d = data_seed.value_or(cfg.data_seeds.front());
  const auto r = run_seed.value_or(cfg.run_seeds.front());
  lal::StrategyConfig strategy = cfg.strategies.front();
  try {
    strategy.kind = lal::parse_strategy(strategy_name);
  } catch (const lal::Error& e) {
    throw lal::ConfigError(e.what());
  }
  const auto data = lal::prepare_data(cfg, d);
  const auto state = advance(cfg, data, strategy, d, r, step);
  const lal::Trainer trainer(cfg.classifier, data.dataset->num_classes);
  lal::OracleOptions options;
  options.workers = lal::workers_from_env();
  const auto scores = lal::oracle_scores(state, trainer, data.split.test, lal::LabelAccess{}, options);
  fmt::print("# data_seed={} run_seed={} step={} base_score={}\n", d, r, step, scores.base_score);
  fmt::print("pool_index,dataset_index,improvement,refit_score\n");
  for (std::size_t j = 0; j < scores.values.size(); ++j) {
    fmt::print("{},{},{},{}\n", j, state.pool()[j], scores.values[j], scores.refit_scores[j]);
  }
  return kOk;
}

int cmd_simulate(const std::string& config_path, std::size_t step) {
  const auto cfg = lal::load_config(config_path);
  lal::StrategyConfig np;
  np.kind = lal::StrategyKind::np;
  validate(cfg.np);
  const auto dir = cfg.output_dir / "simulations";
  int status = kOk;
  for (auto d : cfg.data_seeds) {
    const auto data = lal::prepare_data(cfg, d);
    for (auto r : cfg.run_seeds) {
      try {
        const auto state = advance(cfg, data, np, d, r, step);
        const lal::Trainer trainer(cfg.classifier, data.dataset->num_classes);
        const auto scenarios = lal::simulate_scenarios(state, trainer, data.split.reward, loop_options(cfg, d, r, step), step);
        const auto path = lal::scenario_cache_file(dir, d, r, step);
        lal::save_scenarios(scenarios, path);
        fmt::print("{} scenarios -> {}\n", scenarios.size(), path.string());
      } catch (const lal::ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        fmt::print(stderr, "data_seed={} run_seed={}: {}\n", d, r, e.what());
        status = kRunFailure;
      }
    }
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active learning laboratory"};
  app.require_subcommand(1);

  std::string config;
  std::size_t step = 0;
  std::optional<std::uint64_t> data_seed, run_seed;
  std::string trajectory = "oracle";
  std::string dir;

  auto* run = app.add_subcommand("run", "Run every strategy x seed pair and write results");
  run->add_option("--config", config, "TOML experiment config")->required();

  auto* oracle = app.add_subcommand("oracle-scores", "Print oracle improvements for the pool at a given step");
  oracle->add_option("--config", config, "TOML experiment config")->required();
  oracle->add_option("--step", step, "Acquisition step whose pool is scored")->required();
  oracle->add_option("--data-seed", data_seed, "Data seed (default: first in config)");
  oracle->add_option("--run-seed", run_seed, "Run seed (default: first in config)");
  oracle->add_option("--strategy", trajectory, "Strategy whose trajectory leads to the step")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "Write labeled NP training scenarios to the cache");
  simulate->add_option("--config", config, "TOML experiment config")->required();
  simulate->add_option("--step", step, "Acquisition step of the NP trajectory")->capture_default_str();

  auto* rep = app.add_subcommand("report", "Summarize one or more results directories");
  rep->add_option("--dir", dir, "Results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config);
    if (*oracle) return cmd_oracle_scores(config, step, data_seed, run_seed, trajectory);
    if (*simulate) return cmd_simulate(config, step);
    if (*rep) {
      std::cout << lal::report(dir);
      return kOk;
    }
  } catch (const lal::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kRunFailure;
  }
  return kOk;
}
