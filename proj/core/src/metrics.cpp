#include "lal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace lal {

double weighted_accuracy(const Labels& predicted, const Labels& truth, std::span<const double> class_weights) {
  if (predicted.size() != truth.size() || truth.empty()) throw Error("weighted_accuracy: bad input sizes");
  double hit = 0.0, total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double w = class_weights[static_cast<std::size_t>(truth[i])];
    total += w;
    if (predicted[i] == truth[i]) hit += w;
  }
  return total > 0 ? hit / total : 0.0;
}

double weighted_accuracy(const ClassifierModel& model, const Dataset& test) {
  const auto weights = present_class_weights(test.labels, test.num_classes);
  return weighted_accuracy(predict(model, test.features), test.labels, weights);
}

double auac(std::span<const double> scores) {
  double area = 0.0;
  for (std::size_t t = 1; t < scores.size(); ++t) area += 0.5 * (scores[t - 1] + scores[t]);
  return area;
}

double auac(const AcquisitionTrace& trace) { return auac(trace.scores); }

PrecisionRecall precision_recall(const Labels& predicted, const Labels& truth, int cls) {
  if (predicted.size() != truth.size()) throw Error("precision_recall: size mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] == cls, t = truth[i] == cls;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  PrecisionRecall out;
  out.no_positive_predictions = (tp + fp) == 0;
  out.precision = out.no_positive_predictions ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  out.recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  return out;
}

PrecisionRecall precision_recall(const ClassifierModel& model, const Dataset& test, int cls) {
  return precision_recall(predict(model, test.features), test.labels, cls);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] > values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::map<std::string, RankStat> rank_strategies(const std::map<std::string, std::map<std::string, double>>& results) {
  if (results.empty()) return {};
  std::set<std::string> names;
  for (const auto& [s, v] : results.begin()->second) names.insert(s);
  std::map<std::string, std::vector<double>> per_strategy;
  for (const auto& [dataset, scores] : results) {
    std::set<std::string> here;
    for (const auto& [s, v] : scores) here.insert(s);
    if (here != names) throw Error("rank_strategies: dataset '" + dataset + "' scores a different strategy set");
    std::vector<double> values;
    for (const auto& [s, v] : scores) values.push_back(v);
    const auto ranks = average_ranks(values);
    std::size_t k = 0;
    for (const auto& [s, v] : scores) per_strategy[s].push_back(ranks[k++]);
  }
  std::map<std::string, RankStat> out;
  for (const auto& [s, ranks] : per_strategy) out[s] = RankStat{mean(ranks), stdev(ranks)};
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stdev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace lal
