#include "lal/oracle.hpp"

#include "lal/metrics.hpp"
#include "lal/parallel.hpp"
#include "lal/strategies.hpp"

namespace lal {

ImprovementScores oracle_scores(const LabeledSet& annotated, const LabeledSet& pool, const Trainer& trainer,
                                const Dataset& eval_set, const OracleOptions& options) {
  if (eval_set.size() == 0) throw Error("oracle_scores: empty evaluation set");
  if (annotated.x.cols() != pool.x.cols() && pool.size() > 0) throw ShapeError("oracle_scores: feature count mismatch");
  ImprovementScores out;
  out.base_score = weighted_accuracy(trainer.fit(annotated), eval_set);
  const std::size_t n = pool.size();
  out.values.resize(n);
  out.refit_scores.resize(n);
  const Eigen::Index rows = annotated.x.rows();
  parallel_for(n, options.workers, [&](std::size_t j) {
    LabeledSet augmented;
    augmented.x.resize(rows + 1, annotated.x.cols());
    augmented.x.topRows(rows) = annotated.x;
    augmented.x.row(rows) = pool.x.row(static_cast<Eigen::Index>(j));
    augmented.y = annotated.y;
    augmented.y.push_back(pool.y[j]);
    double score = 0.0;
    try {
      score = weighted_accuracy(trainer.fit(augmented), eval_set);
    } catch (const std::exception& e) {
      throw Error("oracle refit failed for pool index " + std::to_string(j) + ": " + e.what());
    }
    out.refit_scores[j] = score;
    out.values[j] = score - out.base_score;
  });
  return out;
}

ImprovementScores oracle_scores(const ALState& state, const Trainer& trainer, const Dataset& eval_set,
                                LabelAccess access, const OracleOptions& options) {
  return oracle_scores(state.annotated_set(), state.pool_set(access), trainer, eval_set, options);
}

std::size_t select_oracle(const ImprovementScores& scores) { return argmax_first(scores.values); }

}  // namespace lal
