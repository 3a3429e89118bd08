#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lal/classifiers.hpp"
#include "lal/dataset.hpp"
#include "lal/rng.hpp"

namespace lal {

enum class StrategyKind {
  random,
  entropy,
  margin,
  least_confident,
  kcenter,
  hal_uniform,
  hal_gaussian,
  cbal,
  fscore,
  oracle,
  np,
};

struct StrategyConfig {
  StrategyKind kind = StrategyKind::random;
  double p_explore = 0.5;  // HAL
  double delta = 10.0;     // HAL gaussian length scale
  double lambda = 1.0;     // CBAL
};

/// Accepts the report labels (random, uncsamp, kcgrdy, haluni, halgau, cbal,
/// fscore, oracle, np) plus entropy, margin, lstconf.
StrategyKind parse_strategy(std::string_view name);
std::string strategy_name(StrategyKind kind);
bool needs_probabilities(StrategyKind kind);
bool needs_svm(StrategyKind kind);
void validate(const StrategyConfig& cfg);

enum class UncertaintyVariant { entropy, margin, least_confident };
enum class HalScheme { uniform, gaussian };

// All selectors return a position in state.pool(). Ties go to the lowest position.

std::size_t select_random(const ALState& state, Rng& rng);
std::size_t select_uncertainty(const ALState& state, const ClassifierModel& model, UncertaintyVariant variant);
std::size_t select_kcenter_greedy(const ALState& state);
std::size_t select_hal(const ALState& state, const ClassifierModel& model, HalScheme scheme,
                       const StrategyConfig& cfg, Rng& rng);
std::size_t select_cbal(const ALState& state, const ClassifierModel& model, const StrategyConfig& cfg);
std::size_t select_fscore(const ALState& state, const ClassifierModel& model);

/// Dispatch for the classical strategies (everything except oracle and np).
std::size_t select_classical(const StrategyConfig& cfg, const ALState& state, const ClassifierModel& model, Rng& rng);

// Score-level building blocks, exposed for testing.

std::size_t argmax_first(std::span<const double> scores);
std::size_t argmin_first(std::span<const double> scores);
std::vector<double> entropy(const Matrix& proba);
std::size_t select_uncertainty(const Matrix& pool_proba, UncertaintyVariant variant);
/// Min Euclidean distance from each row of `pool` to the rows of `annotated`.
std::vector<double> min_distances(const Matrix& pool, const Matrix& annotated);
/// Unnormalized exploration weights exp(d_j / delta) (shifted by max d for stability).
std::vector<double> hal_gaussian_weights(std::span<const double> distances, double delta);
std::vector<double> cbal_scores(const Matrix& pool_proba, const Matrix& annotated_proba, double lambda);
std::size_t select_fscore(const Matrix& decision);

}  // namespace lal
