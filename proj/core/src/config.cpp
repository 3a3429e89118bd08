#include "lal/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>
#include <sstream>

#include "toml.hpp"

namespace lal {
namespace {

void check_keys(const toml::table& t, std::string_view where, std::initializer_list<std::string_view> allowed) {
  const std::set<std::string_view> ok(allowed);
  for (const auto& [k, v] : t) {
    if (!ok.contains(k.str())) throw ConfigError(fmt::format("unknown key '{}' in {}", k.str(), where));
  }
}

const toml::table* subtable(const toml::table& root, std::string_view key) {
  const auto* node = root.get(key);
  if (!node) return nullptr;
  const auto* t = node->as_table();
  if (!t) throw ConfigError(fmt::format("'{}' must be a table", key));
  return t;
}

template <typename T>
void read(const toml::table& t, std::string_view key, T& out) {
  const auto* node = t.get(key);
  if (!node) return;
  if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node->value<bool>()) return void(out = *v);
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node->value<std::string>()) return void(out = *v);
  } else if constexpr (std::is_floating_point_v<T>) {
    if (auto v = node->value<double>()) return void(out = *v);
  } else {
    if (auto v = node->value<std::int64_t>()) {
      if (*v < 0 && std::is_unsigned_v<T>) throw ConfigError(fmt::format("'{}' must be non-negative", key));
      return void(out = static_cast<T>(*v));
    }
  }
  throw ConfigError(fmt::format("'{}' has the wrong type", key));
}

template <typename T>
std::vector<T> read_list(const toml::table& t, std::string_view key) {
  const auto* arr = t.get_as<toml::array>(key);
  if (!arr) throw ConfigError(fmt::format("'{}' must be an array", key));
  std::vector<T> out;
  for (const auto& node : *arr) {
    if constexpr (std::is_same_v<T, std::string>) {
      auto v = node.value<std::string>();
      if (!v) throw ConfigError(fmt::format("'{}' must hold strings", key));
      out.push_back(*v);
    } else if constexpr (std::is_floating_point_v<T>) {
      auto v = node.value<double>();
      if (!v) throw ConfigError(fmt::format("'{}' must hold numbers", key));
      out.push_back(*v);
    } else {
      auto v = node.value<std::int64_t>();
      if (!v || (*v < 0 && std::is_unsigned_v<T>)) throw ConfigError(fmt::format("'{}' must hold non-negative integers", key));
      out.push_back(static_cast<T>(*v));
    }
  }
  return out;
}

void parse_dataset(const toml::table& t, const std::filesystem::path& base_dir, DatasetSpec& d) {
  check_keys(t, "[dataset]",
             {"source", "path", "format", "header", "dim", "n_per_class", "stdev", "separation", "means", "seed",
              "imbalance_factor", "rare_classes"});
  std::string source = "gaussian_mixture";
  read(t, "source", source);
  if (source == "gaussian_mixture") {
    d.source = DataSource::gaussian_mixture;
  } else if (source == "csv" || source == "libsvm" || source == "file") {
    d.source = DataSource::file;
    d.load.format = source == "libsvm" ? TableFormat::libsvm : TableFormat::csv;
  } else {
    throw ConfigError("unknown dataset source '" + source + "'");
  }
  if (t.contains("path")) {
    std::string p;
    read(t, "path", p);
    d.path = std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base_dir / p;
  }
  if (t.contains("format")) {
    std::string f;
    read(t, "format", f);
    if (f == "csv") d.load.format = TableFormat::csv;
    else if (f == "libsvm") d.load.format = TableFormat::libsvm;
    else throw ConfigError("unknown table format '" + f + "'");
  }
  if (t.contains("header")) {
    bool h = false;
    read(t, "header", h);
    d.load.header = h;
  }
  read(t, "dim", d.dim);
  if (d.source == DataSource::file && t.contains("dim")) d.load.dim = d.dim;
  if (t.contains("n_per_class")) d.n_per_class = read_list<std::size_t>(t, "n_per_class");
  read(t, "stdev", d.stdev);
  read(t, "separation", d.separation);
  read(t, "seed", d.seed);
  read(t, "imbalance_factor", d.imbalance_factor);
  if (t.contains("rare_classes")) {
    for (auto c : read_list<std::int64_t>(t, "rare_classes")) d.rare_classes.push_back(static_cast<int>(c));
  }
  if (const auto* arr = t.get_as<toml::array>("means")) {
    std::vector<std::vector<double>> rows;
    for (const auto& row : *arr) {
      const auto* r = row.as_array();
      if (!r) throw ConfigError("'means' must be an array of arrays");
      std::vector<double> vals;
      for (const auto& v : *r) {
        auto x = v.value<double>();
        if (!x) throw ConfigError("'means' must hold numbers");
        vals.push_back(*x);
      }
      rows.push_back(std::move(vals));
    }
    if (rows.empty() || rows.front().empty()) throw ConfigError("'means' is empty");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size()) throw ConfigError("'means' rows differ in length");
      for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    d.means = std::move(m);
  }
}

}  // namespace

std::string setting_name(Setting s) {
  switch (s) {
    case Setting::balanced: return "balanced";
    case Setting::imbalanced: return "imbalanced";
    case Setting::imbalanced_weighted: return "imbalanced_weighted";
  }
  return "?";
}

Setting parse_setting(std::string_view name) {
  if (name == "balanced") return Setting::balanced;
  if (name == "imbalanced") return Setting::imbalanced;
  if (name == "imbalanced_weighted") return Setting::imbalanced_weighted;
  throw ConfigError(fmt::format("unknown setting '{}'", name));
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.source().begin.line, e.description()));
  }
  check_keys(root, "config",
             {"name", "setting", "classifier", "strategies", "steps", "acquisitions_per_step", "data_seeds",
              "run_seeds", "output_dir", "dataset", "split", "logistic", "svm", "strategy_params", "np"});
  ExperimentConfig cfg;
  read(root, "name", cfg.name);
  if (root.contains("setting")) {
    std::string s;
    read(root, "setting", s);
    cfg.setting = parse_setting(s);
  }
  if (root.contains("classifier")) {
    std::string c;
    read(root, "classifier", c);
    if (c == "logistic") cfg.classifier.kind = ClassifierKind::logistic;
    else if (c == "svm") cfg.classifier.kind = ClassifierKind::svm;
    else throw ConfigError("unknown classifier '" + c + "'");
  }
  read(root, "steps", cfg.steps);
  read(root, "acquisitions_per_step", cfg.acquisitions_per_step);
  if (root.contains("data_seeds")) cfg.data_seeds = read_list<std::uint64_t>(root, "data_seeds");
  if (root.contains("run_seeds")) cfg.run_seeds = read_list<std::uint64_t>(root, "run_seeds");
  if (root.contains("output_dir")) {
    std::string p;
    read(root, "output_dir", p);
    cfg.output_dir = std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base_dir / p;
  } else {
    cfg.output_dir = base_dir / cfg.output_dir;
  }

  StrategyConfig params;
  if (const auto* t = subtable(root, "strategy_params")) {
    check_keys(*t, "[strategy_params]", {"p_explore", "delta", "lambda"});
    read(*t, "p_explore", params.p_explore);
    read(*t, "delta", params.delta);
    read(*t, "lambda", params.lambda);
  }
  if (!root.contains("strategies")) throw ConfigError("missing 'strategies'");
  for (const auto& name : read_list<std::string>(root, "strategies")) {
    StrategyConfig s = params;
    try {
      s.kind = parse_strategy(name);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    cfg.strategies.push_back(s);
  }

  if (const auto* t = subtable(root, "dataset")) parse_dataset(*t, base_dir, cfg.dataset);
  if (const auto* t = subtable(root, "split")) {
    check_keys(*t, "[split]", {"n_test", "n_reward", "n_init_annot"});
    read(*t, "n_test", cfg.split.n_test);
    read(*t, "n_reward", cfg.split.n_reward);
    read(*t, "n_init_annot", cfg.split.n_init_annot);
  }
  if (const auto* t = subtable(root, "logistic")) {
    check_keys(*t, "[logistic]", {"l2_strength", "max_iters", "tol"});
    read(*t, "l2_strength", cfg.classifier.logistic.l2_strength);
    read(*t, "max_iters", cfg.classifier.logistic.max_iters);
    read(*t, "tol", cfg.classifier.logistic.tol);
  }
  if (const auto* t = subtable(root, "svm")) {
    check_keys(*t, "[svm]", {"c", "gamma", "smo_tol", "max_passes"});
    read(*t, "c", cfg.classifier.svm.c);
    if (t->contains("gamma")) {
      double g = 0.0;
      read(*t, "gamma", g);
      cfg.classifier.svm.gamma = g;
    }
    read(*t, "smo_tol", cfg.classifier.svm.smo_tol);
    read(*t, "max_passes", cfg.classifier.svm.max_passes);
  }
  if (const auto* t = subtable(root, "np")) {
    check_keys(*t, "[np]",
               {"hidden_dim", "enc1_hidden_layers", "context_enc_layers", "value_mlp_hidden_layers", "attention_heads",
                "epochs", "batch_size", "lr", "lr_decay_factor", "sigma_floor", "n_sim", "fractions"});
    read(*t, "hidden_dim", cfg.np.hidden_dim);
    read(*t, "enc1_hidden_layers", cfg.np.enc1_hidden_layers);
    read(*t, "context_enc_layers", cfg.np.context_enc_layers);
    read(*t, "value_mlp_hidden_layers", cfg.np.value_mlp_hidden_layers);
    read(*t, "attention_heads", cfg.np.attention_heads);
    read(*t, "epochs", cfg.np.epochs);
    read(*t, "batch_size", cfg.np.batch_size);
    read(*t, "lr", cfg.np.lr);
    read(*t, "lr_decay_factor", cfg.np.lr_decay_factor);
    read(*t, "sigma_floor", cfg.np.sigma_floor);
    read(*t, "n_sim", cfg.n_sim);
    if (t->contains("fractions")) cfg.fractions = read_list<double>(*t, "fractions");
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

void validate(ExperimentConfig& cfg) {
  if (cfg.steps < 1) throw ConfigError("steps must be >= 1");
  if (cfg.acquisitions_per_step < 1) throw ConfigError("acquisitions_per_step must be >= 1");
  if (cfg.strategies.empty()) throw ConfigError("at least one strategy is required");
  if (cfg.data_seeds.empty() || cfg.run_seeds.empty()) throw ConfigError("seed lists must be nonempty");
  std::set<StrategyKind> seen;
  for (const auto& s : cfg.strategies) {
    if (!seen.insert(s.kind).second) throw ConfigError("strategy listed twice: " + strategy_name(s.kind));
    try {
      validate(s);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    if (needs_probabilities(s.kind) && cfg.classifier.kind != ClassifierKind::logistic) {
      throw ConfigError(strategy_name(s.kind) + " needs class probabilities; the svm classifier has none");
    }
    if (needs_svm(s.kind) && cfg.classifier.kind != ClassifierKind::svm) {
      throw ConfigError(strategy_name(s.kind) + " needs svm decision values");
    }
  }
  validate(cfg.np);
  if (cfg.n_sim == 0) throw ConfigError("n_sim must be >= 1");
  if (cfg.fractions.empty()) throw ConfigError("np fractions must be nonempty");
  for (double q : cfg.fractions) {
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("np fractions must lie in (0, 1)");
  }
  const auto& d = cfg.dataset;
  if (d.source == DataSource::file && d.path.empty()) throw ConfigError("dataset path is required for file sources");
  if (d.source == DataSource::gaussian_mixture) {
    if (d.n_per_class.size() < 2) throw ConfigError("n_per_class needs at least two classes");
    if (!(d.stdev > 0)) throw ConfigError("stdev must be positive");
    if (d.means) {
      if (static_cast<std::size_t>(d.means->rows()) != d.n_per_class.size()) throw ConfigError("means rows must match n_per_class");
    } else if (d.n_per_class.size() != 2) {
      throw ConfigError("means are required for more than two classes");
    } else if (d.dim < 1) {
      throw ConfigError("dim must be >= 1");
    }
  }
  if (cfg.setting != Setting::balanced && !(d.imbalance_factor >= 1.0)) throw ConfigError("imbalance_factor must be >= 1");
  if (cfg.classifier.logistic.l2_strength < 0 || cfg.classifier.logistic.max_iters < 1 || !(cfg.classifier.logistic.tol > 0)) {
    throw ConfigError("invalid logistic settings");
  }
  if (!(cfg.classifier.svm.c > 0) || (cfg.classifier.svm.gamma && !(*cfg.classifier.svm.gamma > 0)) ||
      !(cfg.classifier.svm.smo_tol > 0) || cfg.classifier.svm.max_passes < 1) {
    throw ConfigError("invalid svm settings");
  }
  if (cfg.split.n_init_annot < 1) throw ConfigError("n_init_annot must be >= 1");
  cfg.classifier.class_weighted = cfg.setting == Setting::imbalanced_weighted;
}

std::vector<int> rare_classes(const DatasetSpec& spec, int num_classes) {
  if (!spec.rare_classes.empty()) {
    for (int c : spec.rare_classes) {
      if (c < 0 || c >= num_classes) throw ConfigError(fmt::format("rare class {} outside [0, {})", c, num_classes));
    }
    return spec.rare_classes;
  }
  if (num_classes == 2) return {1};
  std::vector<int> out;
  for (int c = 0; c < num_classes; c += 2) out.push_back(c);
  return out;
}

std::string comparison_key(const ExperimentConfig& cfg) {
  return fmt::format("setting={};classifier={};steps={};batch={};split={}/{}/{}", setting_name(cfg.setting),
                     to_string(cfg.classifier.kind), cfg.steps, cfg.acquisitions_per_step, cfg.split.n_test,
                     cfg.split.n_reward, cfg.split.n_init_annot);
}

}  // namespace lal
