#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lal/types.hpp"

namespace lal {

/// Tabular data as read from disk: arbitrary feature scale, contiguous labels.
struct RawDataset {
  Matrix features;
  Labels labels;
  int num_classes = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
};

/// Normalized features in [-1, 1] per column, labels and per-class weights.
/// Treated as immutable once built.
struct Dataset {
  Matrix features;
  Labels labels;
  std::vector<double> class_weights;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  std::vector<std::size_t> class_counts() const;

  /// Rows `indices` in order; class weights re-derived from the subset's counts.
  Dataset subset(std::span<const std::size_t> indices) const;
  LabeledSet labeled(std::span<const std::size_t> indices) const;
};

enum class TableFormat { csv, libsvm };

struct LoadOptions {
  TableFormat format = TableFormat::csv;
  /// csv: unset means auto-detect.
  std::optional<bool> header;
  /// libsvm: feature count; unset means the largest index seen.
  std::optional<std::size_t> dim;
};

RawDataset load_table(const std::filesystem::path& path, const LoadOptions& options = {});
RawDataset parse_csv(std::istream& in, std::optional<bool> header = std::nullopt);
RawDataset parse_libsvm(std::istream& in, std::optional<std::size_t> dim = std::nullopt);

Dataset normalize_features(const RawDataset& raw);

/// Keeps floor(N_c / factor) points of every class in `rare_classes`.
Dataset make_imbalanced(const Dataset& ds, double factor, std::span<const int> rare_classes,
                        std::uint64_t seed);

/// w_c = M / (C * N_c). Throws if some class in [0, num_classes) has no points.
std::vector<double> class_weights(const Labels& labels, int num_classes);
std::vector<double> class_weights(const Dataset& ds);

/// Same formula restricted to present classes; absent classes get weight 0.
/// Used where a training or test subset may legitimately miss a class.
std::vector<double> present_class_weights(const Labels& labels, int num_classes);

struct SplitSpec {
  std::size_t n_test = 200;
  std::size_t n_reward = 100;
  std::size_t n_init_annot = 100;
  std::uint64_t data_seed = 0;
};

/// Explicit tag required to read pool labels. Strategies never construct one;
/// only the oracle, the acquisition step and simulation code do.
struct LabelAccess {
  explicit LabelAccess() = default;
};

/// Annotated and pool index sets over a shared dataset. Pool labels stay hidden
/// behind LabelAccess.
class ALState {
 public:
  ALState(std::shared_ptr<const Dataset> data, IndexList annotated, IndexList pool);

  const IndexList& annotated() const { return annotated_; }
  const IndexList& pool() const { return pool_; }
  std::size_t pool_size() const { return pool_.size(); }
  std::size_t dim() const { return data_->dim(); }
  int num_classes() const { return data_->num_classes; }

  /// Features of row `dataset_index` (any row; features are public).
  auto row(std::size_t dataset_index) const { return data_->features.row(static_cast<Eigen::Index>(dataset_index)); }
  Matrix pool_features() const;
  Matrix annotated_features() const;
  Labels annotated_labels() const;
  LabeledSet annotated_set() const;

  Labels pool_labels(LabelAccess) const;
  LabeledSet pool_set(LabelAccess) const;

  /// Moves pool position `pool_pos` into the annotated set (appended last) and
  /// returns its dataset index.
  std::size_t acquire(std::size_t pool_pos);

 private:
  std::shared_ptr<const Dataset> data_;
  IndexList annotated_;
  IndexList pool_;
};

struct Split {
  ALState state;
  Dataset test;
  Dataset reward;
  IndexList test_indices;
  IndexList reward_indices;
};

Split split_dataset(std::shared_ptr<const Dataset> ds, const SplitSpec& spec);

/// Isotropic Gaussian blobs, one per row of `means`, then normalize_features.
Dataset generate_gaussian_mixture(std::span<const std::size_t> n_per_class, const Matrix& means,
                                  double stdev, std::uint64_t seed);

/// Binary blobs at -/+ separation/2 along the all-ones diagonal of R^dim.
Matrix diagonal_means(std::size_t dim, double separation);

/// Largest-remainder apportionment of `total` over `weights` (ties: lower index first).
std::vector<std::size_t> largest_remainder(std::span<const std::size_t> weights, std::size_t total);

}  // namespace lal
