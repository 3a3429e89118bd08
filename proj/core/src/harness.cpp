#include "lal/harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <numeric>

#include "json.hpp"
#include "lal/parallel.hpp"

namespace lal {
namespace {

using json = nlohmann::json;

// Pool positions of the b largest scores, ties to the lowest position.
IndexList top_positions(std::span<const double> scores, std::size_t b) {
  IndexList order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return scores[a] > scores[c]; });
  order.resize(std::min(b, order.size()));
  return order;
}

// Acquires positions from the back so earlier positions stay valid.
IndexList acquire_all(ALState& state, IndexList positions) {
  std::sort(positions.begin(), positions.end(), std::greater<>());
  IndexList taken;
  for (auto p : positions) taken.push_back(state.acquire(p));
  return taken;
}

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys) {
  Rng rng = make_rng(keys);
  return rng();
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t data_seed) {
  const auto& d = cfg.dataset;
  Dataset base;
  if (d.source == DataSource::gaussian_mixture) {
    const Matrix means = d.means ? *d.means : diagonal_means(d.dim, d.separation);
    base = generate_gaussian_mixture(d.n_per_class, means, d.stdev, d.seed);
  } else {
    base = normalize_features(load_table(d.path, d.load));
  }
  const auto rare = rare_classes(d, base.num_classes);
  if (cfg.setting != Setting::balanced) base = make_imbalanced(base, d.imbalance_factor, rare, data_seed);
  SplitSpec spec = cfg.split;
  spec.data_seed = data_seed;
  auto shared = std::make_shared<const Dataset>(std::move(base));
  return PreparedData{shared, split_dataset(shared, spec), rare.front()};
}

std::filesystem::path scenario_cache_file(const std::filesystem::path& dir, std::uint64_t data_seed,
                                          std::uint64_t run_seed, std::size_t step) {
  return dir / fmt::format("scenarios_d{}_r{}_s{}.json", data_seed, run_seed, step);
}

void save_scenarios(const std::vector<SimulatedScenario>& scenarios, const std::filesystem::path& path) {
  json j;
  j["format"] = "lal-scenarios/1";
  j["scenarios"] = json::array();
  for (const auto& s : scenarios) {
    j["scenarios"].push_back({{"fraction", s.fraction}, {"s_annot", s.s_annot}, {"s_pool", s.s_pool}, {"targets", s.targets}});
  }
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump() << "\n";
}

std::vector<SimulatedScenario> load_scenarios(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("bad scenario cache " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "lal-scenarios/1") throw Error("unknown scenario cache format in " + path.string());
  std::vector<SimulatedScenario> out;
  for (const auto& s : j.at("scenarios")) {
    SimulatedScenario sc;
    sc.fraction = s.at("fraction");
    sc.s_annot = s.at("s_annot").get<IndexList>();
    sc.s_pool = s.at("s_pool").get<IndexList>();
    sc.targets = s.at("targets").get<std::vector<double>>();
    out.push_back(std::move(sc));
  }
  return out;
}

std::vector<SimulatedScenario> simulate_scenarios(const ALState& state, const Trainer& trainer, const Dataset& reward,
                                                  const LoopOptions& options, std::size_t step) {
  Rng rng = make_rng({options.data_seed, options.run_seed, step, 0x5c3a});
  auto scenarios = sample_scenarios(state.annotated().size(), options.fractions, options.n_sim, rng);
  label_scenarios(scenarios, state.annotated_set(), reward, trainer);
  return scenarios;
}

LoopResult active_learning_loop(ALState& state, const StrategyConfig& strategy, const Trainer& trainer,
                                const Dataset& test, const Dataset& reward, const LoopOptions& options, Rng& rng) {
  if (state.annotated().empty()) throw Error("active learning needs a nonempty annotated set");
  LoopResult out;
  out.trace.strategy = strategy_name(strategy.kind);
  out.trace.data_seed = options.data_seed;
  out.trace.run_seed = options.run_seed;
  const std::size_t b = options.acquisitions_per_step;

  long before = trainer.fit_count();
  auto count_fits = [&] {
    const long now = trainer.fit_count();
    out.fits_per_step.push_back(now - before);
    before = now;
  };

  std::optional<ClassifierModel> model = trainer.fit(state.annotated_set());
  out.trace.scores.push_back(weighted_accuracy(*model, test));
  count_fits();

  for (std::size_t step = 1; step <= options.steps; ++step) {
    if (state.pool_size() < b) throw Error(fmt::format("pool exhausted at step {}", step));
    std::optional<double> recorded;
    if (strategy.kind == StrategyKind::oracle) {
      const auto scores = oracle_scores(state, trainer, test, LabelAccess{});
      const auto picks = top_positions(scores.values, b);
      if (b == 1) recorded = scores.refit_scores[picks.front()];
      out.acquired.push_back(acquire_all(state, picks));
      model.reset();
    } else if (strategy.kind == StrategyKind::np) {
      std::vector<SimulatedScenario> scenarios;
      const auto cached = options.scenario_cache.empty()
                              ? std::filesystem::path{}
                              : scenario_cache_file(options.scenario_cache, options.data_seed, options.run_seed, step - 1);
      if (!cached.empty() && std::filesystem::exists(cached)) {
        scenarios = load_scenarios(cached);
      } else {
        scenarios = simulate_scenarios(state, trainer, reward, options, step - 1);
      }
      const auto trained = train_np(scenarios, state.annotated_features(), options.np,
                                    derive_seed({options.data_seed, options.run_seed, step, 0x4e50}));
      out.np_epoch_loss.push_back(trained.epoch_loss);
      const auto pred = np_forward(trained.params, state.annotated_features(), state.pool_features());
      out.acquired.push_back(acquire_all(state, top_positions(pred.mu, b)));
    } else {
      IndexList taken;
      for (std::size_t a = 0; a < b; ++a) taken.push_back(state.acquire(select_classical(strategy, state, *model, rng)));
      out.acquired.push_back(std::move(taken));
    }
    if (recorded) {
      out.trace.scores.push_back(*recorded);
    } else {
      model = trainer.fit(state.annotated_set());
      out.trace.scores.push_back(weighted_accuracy(*model, test));
    }
    count_fits();
  }
  // The oracle reuses its lookahead refits, so its final model is rebuilt here
  // outside the fit accounting.
  out.final_model = model ? *model : Trainer(trainer.spec(), trainer.num_classes()).fit(state.annotated_set());
  return out;
}

std::size_t workers_from_env() {
  const char* raw = std::getenv("LAL_WORKERS");
  if (!raw || !*raw) return 1;
  try {
    std::size_t pos = 0;
    const long v = std::stol(raw, &pos);
    if (pos != std::string(raw).size() || v < 1) throw std::invalid_argument("range");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("LAL_WORKERS must be a positive integer, got '{}'", raw));
  }
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  ExperimentConfig checked = cfg;
  validate(checked);
  const std::string setting = setting_name(checked.setting);

  std::vector<std::optional<PreparedData>> data(checked.data_seeds.size());
  std::vector<std::string> data_errors(checked.data_seeds.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      data[i] = prepare_data(checked, checked.data_seeds[i]);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      data_errors[i] = fmt::format("data seed {}: {}", checked.data_seeds[i], e.what());
    }
  }

  struct Task {
    std::size_t strategy, data, run;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < checked.strategies.size(); ++s) {
    for (std::size_t d = 0; d < checked.data_seeds.size(); ++d) {
      for (std::size_t r = 0; r < checked.run_seeds.size(); ++r) tasks.push_back({s, d, r});
    }
  }

  std::mutex io;
  const auto partial = checked.output_dir / "traces.partial.csv";
  if (options.persist) {
    std::filesystem::create_directories(checked.output_dir);
    std::ofstream(partial, std::ios::trunc) << "strategy,setting,data_seed,run_seed,step,score\n";
  }
  const auto cache_dir = checked.output_dir / "simulations";

  std::vector<RunRecord> records(tasks.size());
  parallel_for(tasks.size(), options.workers, [&](std::size_t i) {
    const auto& task = tasks[i];
    const auto& strategy = checked.strategies[task.strategy];
    RunRecord& rec = records[i];
    rec.trace.strategy = strategy_name(strategy.kind);
    rec.trace.setting = setting;
    rec.trace.data_seed = checked.data_seeds[task.data];
    rec.trace.run_seed = checked.run_seeds[task.run];
    const auto start = std::chrono::steady_clock::now();
    try {
      if (!data[task.data]) throw Error(data_errors[task.data]);
      const auto& prepared = *data[task.data];
      rec.rare_class = prepared.rare_class;
      ALState state = prepared.split.state;
      const Trainer trainer(checked.classifier, prepared.dataset->num_classes);
      Rng rng = make_rng({rec.trace.data_seed, rec.trace.run_seed, 0xa11});
      LoopOptions lo;
      lo.steps = checked.steps;
      lo.acquisitions_per_step = checked.acquisitions_per_step;
      lo.np = checked.np;
      lo.n_sim = checked.n_sim;
      lo.fractions = checked.fractions;
      lo.data_seed = rec.trace.data_seed;
      lo.run_seed = rec.trace.run_seed;
      if (options.persist && std::filesystem::exists(cache_dir)) lo.scenario_cache = cache_dir;
      auto result = active_learning_loop(state, strategy, trainer, prepared.split.test, prepared.split.reward, lo, rng);
      rec.trace.scores = std::move(result.trace.scores);
      rec.auac = auac(rec.trace);
      rec.final_score = rec.trace.scores.back();
      rec.rare = precision_recall(result.final_model, prepared.split.test, rec.rare_class);
      rec.fits_per_step = std::move(result.fits_per_step);
      rec.fits = std::accumulate(rec.fits_per_step.begin(), rec.fits_per_step.end(), 0L);
      rec.np_epoch_loss = std::move(result.np_epoch_loss);
    } catch (const std::exception& e) {
      rec.error = e.what();
      rec.trace.scores.clear();
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (options.persist && rec.ok()) {
      std::lock_guard lock(io);
      std::ofstream out(partial, std::ios::app);
      for (std::size_t t = 0; t < rec.trace.scores.size(); ++t) {
        out << fmt::format("{},{},{},{},{},{}\n", rec.trace.strategy, setting, rec.trace.data_seed, rec.trace.run_seed,
                           t, rec.trace.scores[t]);
      }
    }
  });

  if (options.persist) {
    write_results(checked, records, checked.output_dir);
    std::filesystem::remove(partial);
  }
  return records;
}

void write_results(const ExperimentConfig& cfg, const std::vector<RunRecord>& records,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write {}", (dir / name).string()));
    return out;
  };
  {
    auto out = open("traces.csv");
    out << "strategy,setting,data_seed,run_seed,step,score\n";
    for (const auto& r : records) {
      for (std::size_t t = 0; t < r.trace.scores.size(); ++t) {
        out << fmt::format("{},{},{},{},{},{}\n", r.trace.strategy, r.trace.setting, r.trace.data_seed,
                           r.trace.run_seed, t, r.trace.scores[t]);
      }
    }
  }
  {
    auto out = open("runs.csv");
    out << "strategy,setting,data_seed,run_seed,auac,final_score,rare_class,rare_precision,rare_recall,fits,status\n";
    for (const auto& r : records) {
      if (r.ok()) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},ok\n", r.trace.strategy, r.trace.setting, r.trace.data_seed,
                           r.trace.run_seed, r.auac, r.final_score, r.rare_class, r.rare.precision, r.rare.recall,
                           r.fits);
      } else {
        out << fmt::format("{},{},{},{},,,,,,,failed\n", r.trace.strategy, r.trace.setting, r.trace.data_seed,
                           r.trace.run_seed);
      }
    }
  }

  json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["name"] = cfg.name;
  j["setting"] = setting_name(cfg.setting);
  j["classifier"] = to_string(cfg.classifier.kind);
  j["steps"] = cfg.steps;
  j["acquisitions_per_step"] = cfg.acquisitions_per_step;
  j["comparison_key"] = comparison_key(cfg);
  j["data_seeds"] = cfg.data_seeds;
  j["run_seeds"] = cfg.run_seeds;
  j["strategies"] = json::array();
  for (const auto& s : cfg.strategies) {
    const std::string name = strategy_name(s.kind);
    std::vector<double> a, f, p, rc, w;
    std::size_t failed = 0;
    for (const auto& r : records) {
      if (r.trace.strategy != name) continue;
      if (!r.ok()) {
        ++failed;
        continue;
      }
      a.push_back(r.auac);
      f.push_back(r.final_score);
      p.push_back(r.rare.precision);
      rc.push_back(r.rare.recall);
      w.push_back(r.wall_seconds);
    }
    json e{{"strategy", name}, {"runs", a.size()}, {"failed", failed}};
    if (!a.empty()) {
      e["auac_mean"] = mean(a);
      e["auac_stdev"] = stdev(a);
      e["final_mean"] = mean(f);
      e["final_stdev"] = stdev(f);
      e["rare_precision_mean"] = mean(p);
      e["rare_recall_mean"] = mean(rc);
      e["wall_seconds_mean"] = mean(w);
    }
    j["strategies"].push_back(e);
  }
  j["runs"] = json::array();
  for (const auto& r : records) {
    json e{{"strategy", r.trace.strategy},
           {"data_seed", r.trace.data_seed},
           {"run_seed", r.trace.run_seed},
           {"wall_seconds", r.wall_seconds},
           {"status", r.ok() ? "ok" : "failed"}};
    if (r.ok()) {
      e["auac"] = r.auac;
      e["fits"] = r.fits;
      e["fits_per_step"] = r.fits_per_step;
    } else {
      e["error"] = r.error;
    }
    if (!r.np_epoch_loss.empty()) e["np_epoch_loss"] = r.np_epoch_loss;
    j["runs"].push_back(e);
  }
  auto out = open("summary.json");
  out << j.dump(2) << "\n";
}

}  // namespace lal
