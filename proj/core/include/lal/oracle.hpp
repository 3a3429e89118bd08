#pragma once

#include <vector>

#include "lal/classifiers.hpp"
#include "lal/dataset.hpp"

namespace lal {

/// One improvement per pool point, aligned with the pool ordering.
struct ImprovementScores {
  std::vector<double> values;       // refit score minus base score
  double base_score = 0.0;
  std::vector<double> refit_scores;  // score after adding each pool point
};

struct OracleOptions {
  std::size_t workers = 1;
};

/// Myopic one-step lookahead: fit on `annotated`, then refit from scratch on
/// annotated + {pool[j]} for every j and score each fit by weighted accuracy on
/// `eval_set`. The pool point is appended after the annotated rows.
ImprovementScores oracle_scores(const LabeledSet& annotated, const LabeledSet& pool, const Trainer& trainer,
                                const Dataset& eval_set, const OracleOptions& options = {});

ImprovementScores oracle_scores(const ALState& state, const Trainer& trainer, const Dataset& eval_set,
                                LabelAccess access, const OracleOptions& options = {});

/// argmax of the improvements; ties go to the lowest position.
std::size_t select_oracle(const ImprovementScores& scores);

}  // namespace lal
