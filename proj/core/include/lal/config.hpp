#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lal/classifiers.hpp"
#include "lal/dataset.hpp"
#include "lal/npmodel.hpp"
#include "lal/strategies.hpp"

namespace lal {

enum class Setting { balanced, imbalanced, imbalanced_weighted };

std::string setting_name(Setting s);
Setting parse_setting(std::string_view name);

enum class DataSource { gaussian_mixture, file };

struct DatasetSpec {
  DataSource source = DataSource::gaussian_mixture;
  std::filesystem::path path;
  LoadOptions load;
  // Generator parameters.
  std::vector<std::size_t> n_per_class{500, 500};
  std::size_t dim = 21;
  double stdev = 1.0;
  /// Distance between the two class means when `means` is unset (binary only).
  double separation = 2.5;
  std::optional<Matrix> means;
  std::uint64_t seed = 0;
  // Used by the two imbalanced settings.
  double imbalance_factor = 10.0;
  /// Empty means class 1 for binary data and the even class ids otherwise.
  std::vector<int> rare_classes;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Setting setting = Setting::balanced;
  DatasetSpec dataset;
  /// class_weighted is derived from the setting by validate().
  ClassifierSpec classifier;
  std::vector<StrategyConfig> strategies;
  std::size_t steps = 10;
  std::size_t acquisitions_per_step = 1;
  SplitSpec split;
  std::vector<std::uint64_t> data_seeds{0, 1, 2};
  std::vector<std::uint64_t> run_seeds{0, 1, 2};
  NPConfig np;
  std::size_t n_sim = 100;
  std::vector<double> fractions = default_fractions();
  std::filesystem::path output_dir = "results";
};

/// Parses TOML text. Relative paths resolve against `base_dir`. Throws
/// ConfigError on unknown keys, bad values or failed validation.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Normalizes derived fields and throws ConfigError on invalid or incompatible
/// choices (e.g. entropy sampling with an SVM).
void validate(ExperimentConfig& cfg);

/// Rare classes after defaults are applied.
std::vector<int> rare_classes(const DatasetSpec& spec, int num_classes);

/// Canonical one-line description of everything that must agree for results to
/// be compared in one report, except the dataset itself.
std::string comparison_key(const ExperimentConfig& cfg);

}  // namespace lal
