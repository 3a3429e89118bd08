#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lal/config.hpp"
#include "lal/metrics.hpp"
#include "lal/npmodel.hpp"
#include "lal/oracle.hpp"
#include "lal/scenario.hpp"

namespace lal {

/// Dataset and split for one data seed, shared by every run on that seed.
struct PreparedData {
  std::shared_ptr<const Dataset> dataset;
  Split split;
  int rare_class = 1;
};

/// Builds (generates or loads), imbalances and splits the dataset for `data_seed`.
PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t data_seed);

struct LoopOptions {
  std::size_t steps = 10;
  std::size_t acquisitions_per_step = 1;
  NPConfig np;
  std::size_t n_sim = 100;
  std::vector<double> fractions = default_fractions();
  /// Mixed into every seed the loop derives (NP init, scenario sampling).
  std::uint64_t data_seed = 0;
  std::uint64_t run_seed = 0;
  /// Labeled scenarios keyed by step, used instead of simulating when present.
  std::filesystem::path scenario_cache;
};

struct LoopResult {
  AcquisitionTrace trace;
  ClassifierModel final_model;
  std::vector<long> fits_per_step;  // entry 0 is the initial fit
  std::vector<IndexList> acquired;  // dataset indices per step
  /// NP strategy only: per-step training loss curves.
  std::vector<std::vector<double>> np_epoch_loss;
};

/// Runs `steps` acquisition rounds on `state` (modified in place). The trainer
/// is refit from scratch after every round; the oracle scores candidates on
/// `test`, the NP simulates on `reward`.
LoopResult active_learning_loop(ALState& state, const StrategyConfig& strategy, const Trainer& trainer,
                                const Dataset& test, const Dataset& reward, const LoopOptions& options, Rng& rng);

/// Scenario sampling and labeling for the NP at the state's current annotated set.
std::vector<SimulatedScenario> simulate_scenarios(const ALState& state, const Trainer& trainer, const Dataset& reward,
                                                  const LoopOptions& options, std::size_t step);

void save_scenarios(const std::vector<SimulatedScenario>& scenarios, const std::filesystem::path& path);
std::vector<SimulatedScenario> load_scenarios(const std::filesystem::path& path);
std::filesystem::path scenario_cache_file(const std::filesystem::path& dir, std::uint64_t data_seed,
                                          std::uint64_t run_seed, std::size_t step);

struct RunRecord {
  AcquisitionTrace trace;
  double auac = 0.0;
  double final_score = 0.0;
  int rare_class = 1;
  PrecisionRecall rare;
  double wall_seconds = 0.0;
  long fits = 0;
  std::vector<long> fits_per_step;
  std::vector<std::vector<double>> np_epoch_loss;
  /// Empty on success.
  std::string error;
  bool ok() const { return error.empty(); }
};

struct RunOptions {
  std::size_t workers = 1;
  /// Write traces.csv, runs.csv and summary.json into cfg.output_dir.
  bool persist = true;
};

/// Worker count from LAL_WORKERS (default 1). Throws ConfigError on junk.
std::size_t workers_from_env();

/// Runs every strategy x data_seed x run_seed. Failed runs carry an error and
/// do not stop the others. Records are sorted by (strategy order, data_seed,
/// run_seed).
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

inline constexpr int kSummarySchemaVersion = 1;

void write_results(const ExperimentConfig& cfg, const std::vector<RunRecord>& records,
                   const std::filesystem::path& dir);

struct ReportOptions {
  /// Files are written into the results directory when set.
  bool write_files = true;
};

/// Reads one results directory, or a directory whose subdirectories are
/// results directories (one per dataset), and returns the printable report.
/// Writes report.md, curves.csv and ranks.csv next to the inputs.
std::string report(const std::filesystem::path& dir, const ReportOptions& options = {});

/// Mean and two standard errors of the per-seed difference between `strategy`
/// and the AL average at every step.
struct RelativeCurve {
  std::string strategy;
  std::vector<double> mean;
  std::vector<double> two_stderr;
};

/// rows: strategy -> (seed pair -> trace). AL average excludes oracle, random and
/// np; "best" is the remaining strategy with the highest AUAC for each seed pair.
/// Empty when no strategy remains for the average.
std::vector<RelativeCurve> relative_curves(
    const std::map<std::string, std::map<std::pair<std::uint64_t, std::uint64_t>, std::vector<double>>>& traces);

}  // namespace lal
