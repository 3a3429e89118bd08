#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lal/classifiers.hpp"
#include "lal/dataset.hpp"

namespace lal {

/// Test scores of one strategy run; scores[0] is the pre-acquisition score.
struct AcquisitionTrace {
  std::vector<double> scores;
  std::string strategy;
  std::string setting;
  std::uint64_t data_seed = 0;
  std::uint64_t run_seed = 0;
};

/// Accuracy with each point weighted by its class weight, weights taken from
/// the test set's own class counts.
double weighted_accuracy(const ClassifierModel& model, const Dataset& test);
double weighted_accuracy(const Labels& predicted, const Labels& truth, std::span<const double> class_weights);

/// Trapezoid rule with unit spacing over all points, step 0 included.
double auac(std::span<const double> scores);
double auac(const AcquisitionTrace& trace);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  /// Set when the class was never predicted (precision reported as 0).
  bool no_positive_predictions = false;
};

PrecisionRecall precision_recall(const Labels& predicted, const Labels& truth, int cls);
PrecisionRecall precision_recall(const ClassifierModel& model, const Dataset& test, int cls);

struct RankStat {
  double mean = 0.0;
  double stdev = 0.0;
};

/// dataset -> strategy -> AUAC. Rank 1 is the best AUAC; ties share the mean
/// rank. Mean and population stdev are taken over datasets.
std::map<std::string, RankStat> rank_strategies(
    const std::map<std::string, std::map<std::string, double>>& results);

/// Average ranks (1 = largest value) of `values`.
std::vector<double> average_ranks(std::span<const double> values);

double mean(std::span<const double> v);
/// Population standard deviation (divide by n).
double stdev(std::span<const double> v);

}  // namespace lal
