#pragma once

#include <span>
#include <vector>

#include "lal/classifiers.hpp"
#include "lal/dataset.hpp"
#include "lal/oracle.hpp"
#include "lal/rng.hpp"

namespace lal {

/// One simulated AL problem carved out of the annotated set. Indices are
/// positions in that set.
struct SimulatedScenario {
  IndexList s_annot;
  IndexList s_pool;
  std::vector<double> targets;  // oracle improvement per s_pool entry, once labeled
  double fraction = 0.0;
};

/// The nine fractions 0.1, 0.2, ..., 0.9.
std::vector<double> default_fractions();

/// Round-half-to-even of q * n.
std::size_t simulated_annot_size(double q, std::size_t n);

std::vector<SimulatedScenario> sample_scenarios(std::size_t annot_size, std::span<const double> fractions,
                                                std::size_t n_sim, Rng& rng);

/// Fills targets with oracle improvements on `reward`, using the scenario's
/// pseudo-annotated part as training data and its pseudo-pool as candidates.
void label_scenarios(std::vector<SimulatedScenario>& scenarios, const LabeledSet& annot, const Dataset& reward,
                     const Trainer& trainer, std::size_t workers = 1);

}  // namespace lal
