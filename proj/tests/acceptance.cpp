// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "gradient_suite.hpp"
#include "lal/harness.hpp"
#include "lal/rng.hpp"
#include "reference.hpp"

using namespace lal;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

fs::path work_dir() {
  const auto d = fs::current_path() / "acceptance_runs";
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Standard error of a mean difference of two independent samples, population
// stdev per sample.
double pooled_se(const std::vector<double>& a, const std::vector<double>& b) {
  return std::sqrt(stdev(a) * stdev(a) / static_cast<double>(a.size()) +
                   stdev(b) * stdev(b) / static_cast<double>(b.size()));
}

std::vector<double> auacs(const std::vector<RunRecord>& records, const std::string& strategy, bool& all_ok) {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.trace.strategy != strategy) continue;
    if (!r.ok()) {
      all_ok = false;
      continue;
    }
    out.push_back(r.auac);
  }
  return out;
}

ExperimentConfig shipped_config(const std::string& name) {
  auto cfg = load_config(fs::path(LAL_SOURCE_DIR) / "configs" / (name + ".toml"));
  cfg.output_dir = work_dir() / name;
  return cfg;
}

// ---- 1 and 2: oracle dominance and the imbalance gap ----

struct SettingRun {
  std::vector<double> oracle, random;
  double seconds = 0.0;
  bool ok = true;
  double gap() const { return mean(oracle) - mean(random); }
};

std::map<std::string, SettingRun> run_settings(std::size_t workers) {
  std::map<std::string, SettingRun> out;
  for (const char* name : {"waveform_like_balanced", "waveform_like_imbalanced", "waveform_like_imbalanced_weighted"}) {
    const auto cfg = shipped_config(name);
    const auto start = Clock::now();
    const auto records = run_experiment(cfg, {workers, true});
    SettingRun s;
    s.seconds = seconds_since(start);
    s.oracle = auacs(records, "oracle", s.ok);
    s.random = auacs(records, "random", s.ok);
    out[setting_name(cfg.setting)] = s;
  }
  return out;
}

Outcome oracle_dominance(const std::map<std::string, SettingRun>& runs) {
  Outcome o{true, ""};
  for (const auto& [setting, s] : runs) {
    const double se = pooled_se(s.oracle, s.random);
    const bool ok = s.ok && s.oracle.size() == 9 && s.random.size() == 9 && s.gap() >= 2.0 * se && s.seconds <= 600.0;
    o.pass = o.pass && ok;
    o.detail += fmt::format("{}: oracle {:.3f} random {:.3f} gap {:.3f} >= 2se {:.3f} in {:.0f}s; ", setting,
                            mean(s.oracle), mean(s.random), s.gap(), 2.0 * se, s.seconds);
  }
  return o;
}

Outcome imbalance_gap(const std::map<std::string, SettingRun>& runs) {
  const double balanced = runs.at("balanced").gap(), imbalanced = runs.at("imbalanced").gap();
  return {imbalanced >= 0.8 * balanced,
          fmt::format("imbalanced gap {:.3f} vs 0.8 x balanced gap {:.3f}", imbalanced, 0.8 * balanced)};
}

// ---- 3: the NP acquires at least as well as random, and its loss decreases ----

Outcome np_signal(std::size_t workers) {
  auto cfg = shipped_config("waveform_like_imbalanced_weighted");
  cfg.output_dir = work_dir() / "np_imbalanced_weighted";
  cfg.strategies.clear();
  for (auto kind : {StrategyKind::random, StrategyKind::np}) cfg.strategies.push_back(StrategyConfig{kind});
  cfg.n_sim = 100;
  cfg.fractions = default_fractions();
  const auto start = Clock::now();
  const auto records = run_experiment(cfg, {workers, true});
  const double seconds = seconds_since(start);
  bool ok = true;
  const auto np = auacs(records, "np", ok), random = auacs(records, "random", ok);
  if (np.empty() || random.empty()) return {false, "no completed runs"};
  const double se = pooled_se(np, random);

  // Mean loss curve over every NP training of every run, then 10-epoch block means.
  std::vector<double> curve(cfg.np.epochs, 0.0);
  std::size_t curves = 0;
  for (const auto& r : records) {
    for (const auto& c : r.np_epoch_loss) {
      for (std::size_t e = 0; e < c.size(); ++e) curve[e] += c[e];
      ++curves;
    }
  }
  for (auto& v : curve) v /= static_cast<double>(std::max<std::size_t>(curves, 1));
  std::vector<double> blocks;
  for (std::size_t b = 0; b + 10 <= curve.size(); b += 10) {
    blocks.push_back(std::accumulate(curve.begin() + static_cast<std::ptrdiff_t>(b),
                                     curve.begin() + static_cast<std::ptrdiff_t>(b + 10), 0.0) / 10.0);
  }
  bool monotone = !blocks.empty();
  for (std::size_t i = 1; i < blocks.size(); ++i) monotone = monotone && blocks[i] <= blocks[i - 1];
  std::string block_text;
  for (double b : blocks) block_text += fmt::format("{:.3f} ", b);

  const bool pass = ok && np.size() == 9 && mean(np) >= mean(random) - se && monotone && seconds <= 1800.0;
  return {pass, fmt::format("np {:.3f} vs random {:.3f} - se {:.3f}; smoothed nll {}({}); {:.0f}s", mean(np),
                            mean(random), se, block_text, monotone ? "non-increasing" : "NOT monotone", seconds)};
}

// ---- 4: oracle equals a straight-line reimplementation ----

Outcome oracle_bitwise() {
  std::mt19937_64 gen(404);
  int mismatches = 0;
  std::size_t max_pool = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const bool svm = trial % 3 == 2;
    const Eigen::Index dim = 1 + static_cast<Eigen::Index>(gen() % 5);
    const std::size_t n_annot = 4 + gen() % 16, n_pool = 1 + gen() % 20;
    max_pool = std::max(max_pool, n_pool);
    const auto all = ref::blobs(gen, n_annot + n_pool, dim, 0.3, 0.6);
    LabeledSet annot{all.x.topRows(static_cast<Eigen::Index>(n_annot)),
                     Labels(all.y.begin(), all.y.begin() + static_cast<std::ptrdiff_t>(n_annot))};
    LabeledSet pool{all.x.bottomRows(static_cast<Eigen::Index>(n_pool)),
                    Labels(all.y.begin() + static_cast<std::ptrdiff_t>(n_annot), all.y.end())};
    const auto eval = ref::as_dataset(ref::blobs(gen, 20 + gen() % 40, dim, 0.3, 0.6));
    ClassifierSpec spec;
    spec.kind = svm ? ClassifierKind::svm : ClassifierKind::logistic;
    spec.class_weighted = gen() % 2 == 0;
    const Trainer trainer(spec, 2);
    const auto s = oracle_scores(annot, pool, trainer, eval, {1});
    if (s.values != ref::oracle_improvements(annot, pool, spec, 2, eval)) ++mismatches;
  }
  return {mismatches == 0, fmt::format("{} of 100 problems differ (largest pool {})", mismatches, max_pool)};
}

// ---- 5: gradients ----

Outcome gradient_suite() {
  std::mt19937_64 gen(505);
  double worst = 0.0;
  std::string worst_op;
  for (const auto& c : gradsuite::op_cases()) {
    const double e = gradsuite::check_op(c, gen, 100);
    if (e > worst) worst = e, worst_op = c.name;
  }
  const auto np = gradsuite::check_np(gen, 100);
  return {worst < 1e-3 && np.worst < 1e-3,
          fmt::format("ops worst {:.2e} ({}); nll through forward worst {:.2e} ({}, {} tensors checked)", worst,
                      worst_op, np.worst, np.worst_slot, np.checked)};
}

// ---- 6: symmetries of the NP ----

Matrix normal_rows(std::mt19937_64& gen, Eigen::Index n, Eigen::Index k) {
  std::normal_distribution<double> g;
  Matrix m(n, k);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(gen);
  return m;
}

Outcome symmetry_suite() {
  std::mt19937_64 gen(606);
  double ctx_err = 0.0, tgt_err = 0.0, fac_err = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(gen() % 21);
    const auto p = init_np(static_cast<std::size_t>(k), {}, gen());
    const Matrix ctx = normal_rows(gen, 1 + static_cast<Eigen::Index>(gen() % 12), k);
    const Matrix tgt = normal_rows(gen, 1 + static_cast<Eigen::Index>(gen() % 12), k);
    std::vector<Eigen::Index> pc(static_cast<std::size_t>(ctx.rows())), pt(static_cast<std::size_t>(tgt.rows()));
    std::iota(pc.begin(), pc.end(), 0);
    std::iota(pt.begin(), pt.end(), 0);
    std::shuffle(pc.begin(), pc.end(), gen);
    std::shuffle(pt.begin(), pt.end(), gen);
    Matrix ctx_p(ctx.rows(), k), tgt_p(tgt.rows(), k);
    for (std::size_t i = 0; i < pc.size(); ++i) ctx_p.row(static_cast<Eigen::Index>(i)) = ctx.row(pc[i]);
    for (std::size_t i = 0; i < pt.size(); ++i) tgt_p.row(static_cast<Eigen::Index>(i)) = tgt.row(pt[i]);

    const auto base = np_forward(p, ctx, tgt);
    const auto c = np_forward(p, ctx_p, tgt);
    const auto t = np_forward(p, ctx, tgt_p);
    for (std::size_t i = 0; i < base.mu.size(); ++i) {
      ctx_err = std::max({ctx_err, std::abs(c.mu[i] - base.mu[i]), std::abs(c.sigma[i] - base.sigma[i])});
      const auto src = static_cast<std::size_t>(pt[i]);
      tgt_err = std::max({tgt_err, std::abs(t.mu[i] - base.mu[src]), std::abs(t.sigma[i] - base.sigma[src])});
      const auto one = np_forward(p, ctx, tgt.row(static_cast<Eigen::Index>(i)));
      fac_err = std::max({fac_err, std::abs(one.mu[0] - base.mu[i]), std::abs(one.sigma[0] - base.sigma[i])});
    }
  }
  return {ctx_err < 1e-9 && tgt_err < 1e-9 && fac_err < 1e-9,
          fmt::format("context perm {:.1e}, target perm {:.1e}, factorization {:.1e}", ctx_err, tgt_err, fac_err)};
}

// ---- 7: strategy oracles ----

struct Fixture {
  std::shared_ptr<const Dataset> data;
  ALState state;
};

Fixture fixture(const LabeledSet& s, std::size_t n_annot) {
  Dataset d = ref::as_dataset(s);
  auto shared = std::make_shared<const Dataset>(std::move(d));
  IndexList a(n_annot), p(s.size() - n_annot);
  std::iota(a.begin(), a.end(), std::size_t{0});
  std::iota(p.begin(), p.end(), n_annot);
  return {shared, ALState(shared, a, p)};
}

std::size_t entropy_argmax(const Matrix& proba) {
  std::size_t best = 0;
  double best_h = -1.0;
  for (Eigen::Index j = 0; j < proba.rows(); ++j) {
    double h = 0.0;
    for (Eigen::Index c = 0; c < proba.cols(); ++c) {
      if (proba(j, c) > 0) h -= proba(j, c) * std::log(proba(j, c));
    }
    if (h > best_h) best_h = h, best = static_cast<std::size_t>(j);
  }
  return best;
}

Outcome strategy_oracles() {
  std::mt19937_64 gen(707);
  int kc = 0, hal0 = 0, cbal0 = 0, fs_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index dim = 1 + trial % 6;
    const std::size_t n_annot = 1 + gen() % 12;
    LabeledSet s{ref::random_matrix(gen, 50, dim), Labels(50, 0)};
    for (std::size_t i = 0; i < 50; ++i) s.y[i] = static_cast<int>(i % 2);
    const auto f = fixture(s, n_annot);
    kc += select_kcenter_greedy(f.state) ==
          ref::kcenter(s.x.bottomRows(static_cast<Eigen::Index>(50 - n_annot)), s.x.topRows(static_cast<Eigen::Index>(n_annot)));
  }
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = fixture(ref::blobs(gen, 45, 3, 0.3, 0.5), 15);
    const auto model = fit_logistic(f.state.annotated_features(), f.state.annotated_labels(),
                                    std::vector<double>(15, 1.0), 2);
    const auto expected = entropy_argmax(predict_proba(model, f.state.pool_features()));
    Rng rng = make_rng({static_cast<std::uint64_t>(trial)});
    const StrategyConfig exploit{StrategyKind::hal_uniform, 0.0, 10.0, 1.0};
    hal0 += select_hal(f.state, model, HalScheme::uniform, exploit, rng) == expected &&
            select_hal(f.state, model, HalScheme::gaussian, exploit, rng) == expected;
    cbal0 += select_cbal(f.state, model, {StrategyKind::cbal, 0.5, 10.0, 0.0}) == expected;
  }
  // p_explore = 1: pure exploration, uniform or distance-weighted.
  const auto f = fixture(ref::blobs(gen, 16, 2, 0.3, 0.8), 10);
  const auto model = fit_logistic(f.state.annotated_features(), f.state.annotated_labels(),
                                  std::vector<double>(10, 1.0), 2);
  const Matrix pool = f.state.pool_features(), annot = f.state.annotated_features();
  std::vector<double> w(static_cast<std::size_t>(pool.rows()));
  for (Eigen::Index j = 0; j < pool.rows(); ++j) {
    double d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < annot.rows(); ++i) d = std::min(d, ref::euclid(pool, j, annot, i));
    w[static_cast<std::size_t>(j)] = std::exp(d / 0.2);
  }
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  const int draws = 200000;
  std::vector<double> uni(w.size(), 0.0), gau(w.size(), 0.0);
  Rng rng = make_rng({7});
  for (int i = 0; i < draws; ++i) {
    uni[select_hal(f.state, model, HalScheme::uniform, {StrategyKind::hal_uniform, 1.0, 0.2, 1.0}, rng)] += 1.0 / draws;
    gau[select_hal(f.state, model, HalScheme::gaussian, {StrategyKind::hal_gaussian, 1.0, 0.2, 1.0}, rng)] += 1.0 / draws;
  }
  double uni_dev = 0.0, gau_dev = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    uni_dev = std::max(uni_dev, std::abs(uni[j] - 1.0 / static_cast<double>(w.size())));
    gau_dev = std::max(gau_dev, std::abs(gau[j] - w[j] / wsum));
  }
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = fixture(ref::blobs(gen, 50, 2, 0.3, 0.5), 20);
    const auto m = fit_svm_rbf(g.state.annotated_features(), g.state.annotated_labels(), std::vector<double>(20, 1.0), 2);
    const Matrix p = g.state.pool_features();
    const auto& machine = m.svm[0];
    std::size_t best = 0;
    double best_abs = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < p.rows(); ++j) {
      double v = machine.b;
      for (Eigen::Index s = 0; s < machine.support_x.rows(); ++s) {
        v += machine.coef[s] * std::exp(-m.gamma * (machine.support_x.row(s) - p.row(j)).squaredNorm());
      }
      if (std::abs(v) < best_abs) best_abs = std::abs(v), best = static_cast<std::size_t>(j);
    }
    fs_ok += select_fscore(g.state, m) == best;
  }
  const bool pass = kc == 100 && hal0 == 50 && cbal0 == 50 && fs_ok == 50 && uni_dev < 0.005 && gau_dev < 0.005;
  return {pass, fmt::format("kcenter {}/100, hal p=0 {}/50, explore freq dev uniform {:.4f} gaussian {:.4f}, "
                            "cbal lambda=0 {}/50, fscore {}/50",
                            kc, hal0, uni_dev, gau_dev, cbal0, fs_ok)};
}

// ---- 8: determinism of the command line ----

int run_cli(const std::string& args, const std::string& env) {
  const std::string cmd = env + " \"" LAL_CLI_PATH "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome cli_determinism() {
  const auto dir = work_dir() / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string text = slurp(fs::path(LAL_SOURCE_DIR) / "configs" / "waveform_like_imbalanced_weighted.toml");
  text = std::regex_replace(text, std::regex("output_dir = \"[^\"]*\""), "output_dir = \"out\"");
  std::ofstream(dir / "config.toml") << text;
  const std::string args = "run --config " + (dir / "config.toml").string();
  const int first = run_cli(args, "LAL_WORKERS=1");
  const std::string traces = slurp(dir / "out" / "traces.csv"), runs = slurp(dir / "out" / "runs.csv");
  const int second = run_cli(args, "LAL_WORKERS=2");
  const bool same = traces == slurp(dir / "out" / "traces.csv") && runs == slurp(dir / "out" / "runs.csv");
  const auto lines = std::count(traces.begin(), traces.end(), '\n');
  return {first == 0 && second == 0 && same && lines > 1,
          fmt::format("exit codes {} and {}; traces.csv ({} lines) and runs.csv {}", first, second, lines,
                      same ? "byte-identical" : "DIFFER")};
}

// ---- 9: metrics ----

Outcome metric_checks() {
  const double flat = auac(std::vector<double>(11, 1.0));
  std::mt19937_64 gen(909);
  double acc_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int c = 2 + trial % 4;
    const std::size_t per = 1 + gen() % 30;
    Labels truth, pred;
    for (int k = 0; k < c; ++k) {
      for (std::size_t i = 0; i < per; ++i) truth.push_back(k);
    }
    for (std::size_t i = 0; i < truth.size(); ++i) pred.push_back(static_cast<int>(gen() % static_cast<unsigned>(c)));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += pred[i] == truth[i];
    const double plain = static_cast<double>(hits) / static_cast<double>(truth.size());
    acc_err = std::max(acc_err, std::abs(weighted_accuracy(pred, truth, class_weights(truth, c)) - plain));
  }
  double rank_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + gen() % 8;
    std::map<std::string, std::map<std::string, double>> results;
    for (int d = 0; d < 4; ++d) {
      std::vector<double> v;
      for (std::size_t s = 0; s < n; ++s) {
        v.push_back(static_cast<double>(gen() % 4));  // frequent ties
        results["d" + std::to_string(d)]["s" + std::to_string(s)] = v.back();
      }
      const auto r = average_ranks(v);
      rank_err = std::max(rank_err, std::abs(std::accumulate(r.begin(), r.end(), 0.0) - n * (n + 1) / 2.0));
    }
    double total = 0.0;
    for (const auto& [name, stat] : rank_strategies(results)) total += stat.mean;
    rank_err = std::max(rank_err, std::abs(total - n * (n + 1) / 2.0));
  }
  return {flat == 10.0 && acc_err < 1e-12 && rank_err < 1e-9,
          fmt::format("flat trace auac {}; weighted vs plain accuracy {:.1e}; rank sum error {:.1e}", flat, acc_err,
                      rank_err)};
}

}  // namespace

// Optional arguments pick a subset of criterion ids; the default runs all.
int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int id) { return only.empty() || only.contains(id); };
  std::size_t workers = 1;
  try {
    workers = workers_from_env();
  } catch (const std::exception& e) {
    fmt::print(stderr, "{}\n", e.what());
    return 2;
  }
  std::map<int, Outcome> results;
  auto guarded = [](const std::function<Outcome()>& f) -> Outcome {
    try {
      return f();
    } catch (const std::exception& e) {
      return {false, std::string("threw: ") + e.what()};
    }
  };
  auto report = [&](int id, const char* title, const std::function<Outcome()>& f) {
    if (!wanted(id)) return;
    const Outcome o = guarded(f);
    results[id] = o;
    fmt::print("{} {} {}: {}\n", o.pass ? "PASS" : "FAIL", id, title, o.detail);
    std::fflush(stdout);
  };

  std::map<std::string, SettingRun> settings;
  std::string settings_error;
  if (wanted(1) || wanted(2)) {
    try {
      settings = run_settings(workers);
    } catch (const std::exception& e) {
      settings_error = e.what();
    }
  }
  auto need_settings = [&](const std::function<Outcome()>& f) {
    return [&, f] { return settings_error.empty() ? f() : Outcome{false, "experiment threw: " + settings_error}; };
  };
  report(1, "oracle dominance", need_settings([&] { return oracle_dominance(settings); }));
  report(2, "imbalance gap", need_settings([&] { return imbalance_gap(settings); }));
  report(3, "np learns signal", [&] { return np_signal(workers); });
  report(4, "oracle brute-force equivalence", oracle_bitwise);
  report(5, "gradient suite", gradient_suite);
  report(6, "symmetry suite", symmetry_suite);
  report(7, "strategy oracles", strategy_oracles);
  report(8, "determinism", cli_determinism);
  report(9, "metric checks", metric_checks);

  int failed = 0;
  for (const auto& [id, o] : results) failed += !o.pass;
  fmt::print("{} of {} criteria passed\n", results.size() - static_cast<std::size_t>(failed), results.size());
  return failed ? 1 : 0;
}
