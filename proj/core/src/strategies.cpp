#include "lal/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lal {

StrategyKind parse_strategy(std::string_view name) {
  if (name == "random") return StrategyKind::random;
  if (name == "uncsamp" || name == "entropy") return StrategyKind::entropy;
  if (name == "margin") return StrategyKind::margin;
  if (name == "lstconf" || name == "least_confident") return StrategyKind::least_confident;
  if (name == "kcgrdy" || name == "kcenter") return StrategyKind::kcenter;
  if (name == "haluni" || name == "hal_uniform") return StrategyKind::hal_uniform;
  if (name == "halgau" || name == "hal_gaussian") return StrategyKind::hal_gaussian;
  if (name == "cbal") return StrategyKind::cbal;
  if (name == "fscore") return StrategyKind::fscore;
  if (name == "oracle") return StrategyKind::oracle;
  if (name == "np") return StrategyKind::np;
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

std::string strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::random: return "random";
    case StrategyKind::entropy: return "uncsamp";
    case StrategyKind::margin: return "margin";
    case StrategyKind::least_confident: return "lstconf";
    case StrategyKind::kcenter: return "kcgrdy";
    case StrategyKind::hal_uniform: return "haluni";
    case StrategyKind::hal_gaussian: return "halgau";
    case StrategyKind::cbal: return "cbal";
    case StrategyKind::fscore: return "fscore";
    case StrategyKind::oracle: return "oracle";
    case StrategyKind::np: return "np";
  }
  return "?";
}

bool needs_probabilities(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::entropy:
    case StrategyKind::margin:
    case StrategyKind::least_confident:
    case StrategyKind::hal_uniform:
    case StrategyKind::hal_gaussian:
    case StrategyKind::cbal:
      return true;
    default:
      return false;
  }
}

bool needs_svm(StrategyKind kind) { return kind == StrategyKind::fscore; }

void validate(const StrategyConfig& cfg) {
  if (!(cfg.p_explore >= 0.0 && cfg.p_explore <= 1.0)) throw ConfigError("p_explore must lie in [0, 1]");
  if (!(cfg.delta > 0.0)) throw ConfigError("delta must be positive");
  if (!(cfg.lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
}

std::size_t argmax_first(std::span<const double> scores) {
  if (scores.empty()) throw Error("argmax over an empty pool");
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j) {
    if (scores[j] > scores[best]) best = j;
  }
  return best;
}

std::size_t argmin_first(std::span<const double> scores) {
  if (scores.empty()) throw Error("argmin over an empty pool");
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j) {
    if (scores[j] < scores[best]) best = j;
  }
  return best;
}

std::vector<double> entropy(const Matrix& proba) {
  std::vector<double> h(static_cast<std::size_t>(proba.rows()), 0.0);
  for (Eigen::Index i = 0; i < proba.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < proba.cols(); ++c) {
      const double p = proba(i, c);
      if (p > 0) s -= p * std::log(p);
    }
    h[static_cast<std::size_t>(i)] = s;
  }
  return h;
}

std::size_t select_uncertainty(const Matrix& pool_proba, UncertaintyVariant variant) {
  if (variant == UncertaintyVariant::entropy) return argmax_first(entropy(pool_proba));
  std::vector<double> score(static_cast<std::size_t>(pool_proba.rows()));
  for (Eigen::Index i = 0; i < pool_proba.rows(); ++i) {
    double first = -1.0, second = -1.0;
    for (Eigen::Index c = 0; c < pool_proba.cols(); ++c) {
      const double p = pool_proba(i, c);
      if (p > first) {
        second = first;
        first = p;
      } else if (p > second) {
        second = p;
      }
    }
    score[static_cast<std::size_t>(i)] = variant == UncertaintyVariant::margin ? first - std::max(second, 0.0) : first;
  }
  return argmin_first(score);
}

std::vector<double> min_distances(const Matrix& pool, const Matrix& annotated) {
  if (annotated.rows() == 0) throw Error("distance to an empty annotated set");
  std::vector<double> d(static_cast<std::size_t>(pool.rows()));
  for (Eigen::Index j = 0; j < pool.rows(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < annotated.rows(); ++i) {
      best = std::min(best, (pool.row(j) - annotated.row(i)).squaredNorm());
    }
    d[static_cast<std::size_t>(j)] = std::sqrt(best);
  }
  return d;
}

std::vector<double> hal_gaussian_weights(std::span<const double> distances, double delta) {
  const double top = *std::max_element(distances.begin(), distances.end());
  std::vector<double> w(distances.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = std::exp((distances[j] - top) / delta);
  return w;
}

std::vector<double> cbal_scores(const Matrix& pool_proba, const Matrix& annotated_proba, double lambda) {
  const auto c = pool_proba.cols();
  const double target = static_cast<double>(annotated_proba.rows() + 1) / static_cast<double>(c);
  Vector deficit(c);
  for (Eigen::Index k = 0; k < c; ++k) deficit[k] = std::max(0.0, target - annotated_proba.col(k).sum());
  const double norm = std::max(deficit.lpNorm<1>(), 1e-12);
  auto scores = entropy(pool_proba);
  for (Eigen::Index j = 0; j < pool_proba.rows(); ++j) {
    scores[static_cast<std::size_t>(j)] += lambda * pool_proba.row(j).dot(deficit) / norm;
  }
  return scores;
}

std::size_t select_fscore(const Matrix& decision) {
  std::vector<double> closeness(static_cast<std::size_t>(decision.rows()));
  for (Eigen::Index j = 0; j < decision.rows(); ++j) closeness[static_cast<std::size_t>(j)] = decision.row(j).cwiseAbs().minCoeff();
  return argmin_first(closeness);
}

std::size_t select_random(const ALState& state, Rng& rng) {
  if (state.pool_size() == 0) throw Error("select_random: empty pool");
  return uniform_index(rng, state.pool_size());
}

std::size_t select_uncertainty(const ALState& state, const ClassifierModel& model, UncertaintyVariant variant) {
  if (state.pool_size() == 0) throw Error("select_uncertainty: empty pool");
  return select_uncertainty(predict_proba(model, state.pool_features()), variant);
}

std::size_t select_kcenter_greedy(const ALState& state) {
  if (state.pool_size() == 0) throw Error("select_kcenter_greedy: empty pool");
  return argmax_first(min_distances(state.pool_features(), state.annotated_features()));
}

std::size_t select_hal(const ALState& state, const ClassifierModel& model, HalScheme scheme,
                       const StrategyConfig& cfg, Rng& rng) {
  if (state.pool_size() == 0) throw Error("select_hal: empty pool");
  const Matrix pool = state.pool_features();
  const Matrix proba = predict_proba(model, pool);  // also rejects non-probabilistic models
  const bool explore = uniform01(rng) < cfg.p_explore;
  if (!explore) return select_uncertainty(proba, UncertaintyVariant::entropy);
  if (scheme == HalScheme::uniform) return uniform_index(rng, state.pool_size());
  const auto w = hal_gaussian_weights(min_distances(pool, state.annotated_features()), cfg.delta);
  double total = 0.0;
  for (double v : w) total += v;
  const double r = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    acc += w[j];
    if (r < acc) return j;
  }
  return w.size() - 1;
}

std::size_t select_cbal(const ALState& state, const ClassifierModel& model, const StrategyConfig& cfg) {
  if (state.pool_size() == 0) throw Error("select_cbal: empty pool");
  const Matrix pool_p = predict_proba(model, state.pool_features());
  const Matrix annot_p = predict_proba(model, state.annotated_features());
  return argmax_first(cbal_scores(pool_p, annot_p, cfg.lambda));
}

std::size_t select_fscore(const ALState& state, const ClassifierModel& model) {
  if (state.pool_size() == 0) throw Error("select_fscore: empty pool");
  if (model.kind != ClassifierKind::svm) throw UnsupportedOperation("fscore requires an SVM model");
  return select_fscore(decision_values(model, state.pool_features()));
}

std::size_t select_classical(const StrategyConfig& cfg, const ALState& state, const ClassifierModel& model, Rng& rng) {
  switch (cfg.kind) {
    case StrategyKind::random: return select_random(state, rng);
    case StrategyKind::entropy: return select_uncertainty(state, model, UncertaintyVariant::entropy);
    case StrategyKind::margin: return select_uncertainty(state, model, UncertaintyVariant::margin);
    case StrategyKind::least_confident: return select_uncertainty(state, model, UncertaintyVariant::least_confident);
    case StrategyKind::kcenter: return select_kcenter_greedy(state);
    case StrategyKind::hal_uniform: return select_hal(state, model, HalScheme::uniform, cfg, rng);
    case StrategyKind::hal_gaussian: return select_hal(state, model, HalScheme::gaussian, cfg, rng);
    case StrategyKind::cbal: return select_cbal(state, model, cfg);
    case StrategyKind::fscore: return select_fscore(state, model);
    case StrategyKind::oracle:
    case StrategyKind::np:
      break;
  }
  throw Error("select_classical: " + strategy_name(cfg.kind) + " is not a classical strategy");
}

}  // namespace lal
