#include "lal/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lal/parallel.hpp"

namespace lal {
namespace {

LabeledSet gather(const LabeledSet& set, const IndexList& idx) {
  LabeledSet out;
  out.x.resize(static_cast<Eigen::Index>(idx.size()), set.x.cols());
  out.y.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.x.row(static_cast<Eigen::Index>(r)) = set.x.row(static_cast<Eigen::Index>(idx[r]));
    out.y.push_back(set.y[idx[r]]);
  }
  return out;
}

}  // namespace

std::vector<double> default_fractions() {
  std::vector<double> q;
  for (int i = 1; i <= 9; ++i) q.push_back(i / 10.0);
  return q;
}

std::size_t simulated_annot_size(double q, std::size_t n) {
  return static_cast<std::size_t>(std::nearbyint(q * static_cast<double>(n)));
}

std::vector<SimulatedScenario> sample_scenarios(std::size_t annot_size, std::span<const double> fractions,
                                                std::size_t n_sim, Rng& rng) {
  if (annot_size < 2) throw Error("sample_scenarios needs at least 2 annotated points");
  if (fractions.empty()) throw Error("sample_scenarios: empty fraction set");
  for (double q : fractions) {
    if (!(q > 0.0 && q < 1.0)) throw Error("annotation fractions must lie in (0, 1)");
    const auto k = simulated_annot_size(q, annot_size);
    if (k == 0 || k >= annot_size) {
      throw Error("fraction " + std::to_string(q) + " leaves an empty simulated set for " +
                  std::to_string(annot_size) + " annotated points");
    }
  }
  std::vector<SimulatedScenario> out;
  out.reserve(n_sim);
  IndexList order(annot_size);
  for (std::size_t i = 0; i < n_sim; ++i) {
    SimulatedScenario s;
    s.fraction = fractions[uniform_index(rng, fractions.size())];
    const auto k = simulated_annot_size(s.fraction, annot_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Partial Fisher-Yates: the first k slots are a uniform draw without replacement.
    for (std::size_t t = 0; t < k; ++t) {
      const std::size_t pick = t + uniform_index(rng, annot_size - t);
      std::swap(order[t], order[pick]);
    }
    s.s_annot.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    s.s_pool.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    std::sort(s.s_pool.begin(), s.s_pool.end());
    out.push_back(std::move(s));
  }
  return out;
}

void label_scenarios(std::vector<SimulatedScenario>& scenarios, const LabeledSet& annot, const Dataset& reward,
                     const Trainer& trainer, std::size_t workers) {
  if (reward.size() == 0) throw Error("label_scenarios: empty reward set");
  parallel_for(scenarios.size(), workers, [&](std::size_t i) {
    auto& s = scenarios[i];
    try {
      s.targets = oracle_scores(gather(annot, s.s_annot), gather(annot, s.s_pool), trainer, reward).values;
    } catch (const std::exception& e) {
      throw Error("scenario " + std::to_string(i) + ": " + e.what());
    }
  });
}

}  // namespace lal
