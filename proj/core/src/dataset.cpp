#include "lal/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "lal/rng.hpp"

namespace lal {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    fields.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return v;
}

// Numeric labels are ordered by value, anything else by first appearance.
std::pair<Labels, std::vector<std::string>> remap_labels(const std::vector<std::string>& raw) {
  std::vector<std::string> names;
  bool numeric = true;
  for (const auto& s : raw) {
    if (!parse_number(s)) {
      numeric = false;
      break;
    }
  }
  std::unordered_map<std::string, int> code;
  if (numeric) {
    std::map<double, std::vector<std::string>> by_value;
    for (const auto& s : raw) by_value[*parse_number(s)].push_back(s);
    int next = 0;
    for (auto& [value, spellings] : by_value) {
      for (const auto& sp : spellings) code.emplace(sp, next);
      names.push_back(spellings.front());
      ++next;
    }
  } else {
    for (const auto& s : raw) {
      if (code.emplace(s, static_cast<int>(names.size())).second) names.push_back(s);
    }
  }
  Labels labels;
  labels.reserve(raw.size());
  for (const auto& s : raw) labels.push_back(code.at(s));
  return {std::move(labels), std::move(names)};
}

}  // namespace

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(indices[r]));
    out.labels.push_back(labels[indices[r]]);
  }
  out.class_weights = present_class_weights(out.labels, num_classes);
  return out;
}

LabeledSet Dataset::labeled(std::span<const std::size_t> indices) const {
  LabeledSet out;
  out.x.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.y.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.x.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(indices[r]));
    out.y.push_back(labels[indices[r]]);
  }
  return out;
}

RawDataset parse_csv(std::istream& in, std::optional<bool> header) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (!rows.empty() && fields.size() != rows.front().size()) {
      throw ParseError(line_no, "expected " + std::to_string(rows.front().size()) + " fields, found " +
                                    std::to_string(fields.size()));
    }
    if (fields.size() < 2) throw ParseError(line_no, "need a label and at least one feature");
    rows.push_back(std::move(fields));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw Error("empty file");
  const std::size_t ncols = rows.front().size();

  // Header: some feature column is numeric in every data row but not in row 0.
  bool has_header = false;
  if (header) {
    has_header = *header;
  } else if (rows.size() > 1) {
    for (std::size_t j = 1; j < ncols && !has_header; ++j) {
      if (parse_number(rows[0][j])) continue;
      bool numeric_below = true;
      for (std::size_t r = 1; r < rows.size() && numeric_below; ++r) numeric_below = parse_number(rows[r][j]).has_value();
      has_header = numeric_below;
    }
  }
  std::vector<std::string> names;
  if (has_header) {
    names = rows.front();
    rows.erase(rows.begin());
    line_numbers.erase(line_numbers.begin());
  } else {
    for (std::size_t j = 0; j < ncols; ++j) names.push_back("c" + std::to_string(j));
  }
  if (rows.empty()) throw Error("empty file");

  struct Column {
    bool numeric = true;
    std::vector<std::string> categories;
    std::unordered_map<std::string, std::size_t> code;
  };
  std::vector<Column> cols(ncols);
  std::size_t width = 0;
  for (std::size_t j = 1; j < ncols; ++j) {
    for (const auto& row : rows) {
      if (!parse_number(row[j])) {
        cols[j].numeric = false;
        break;
      }
    }
    if (cols[j].numeric) {
      ++width;
      continue;
    }
    for (const auto& row : rows) {
      if (cols[j].code.emplace(row[j], cols[j].categories.size()).second) cols[j].categories.push_back(row[j]);
    }
    width += cols[j].categories.size();
  }

  RawDataset out;
  out.features = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t j = 1; j < ncols; ++j) {
    if (cols[j].numeric) {
      out.feature_names.push_back(names[j]);
    } else {
      for (const auto& cat : cols[j].categories) out.feature_names.push_back(names[j] + "=" + cat);
    }
  }
  std::vector<std::string> raw_labels;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    raw_labels.push_back(rows[r][0]);
    Eigen::Index k = 0;
    for (std::size_t j = 1; j < ncols; ++j) {
      if (cols[j].numeric) {
        const double v = *parse_number(rows[r][j]);
        if (!std::isfinite(v)) throw ParseError(line_numbers[r], "non-finite value in column " + names[j]);
        out.features(static_cast<Eigen::Index>(r), k++) = v;
      } else {
        out.features(static_cast<Eigen::Index>(r), k + static_cast<Eigen::Index>(cols[j].code.at(rows[r][j]))) = 1.0;
        k += static_cast<Eigen::Index>(cols[j].categories.size());
      }
    }
  }
  auto [labels, class_names] = remap_labels(raw_labels);
  out.labels = std::move(labels);
  out.class_names = std::move(class_names);
  out.num_classes = static_cast<int>(out.class_names.size());
  return out;
}

RawDataset parse_libsvm(std::istream& in, std::optional<std::size_t> dim) {
  struct Entry {
    std::size_t row, col;
    double value;
  };
  std::vector<Entry> entries;
  std::vector<std::string> raw_labels;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok)) continue;
    if (!parse_number(tok)) throw ParseError(line_no, "bad label '" + tok + "'");
    const std::size_t row = raw_labels.size();
    raw_labels.push_back(tok);
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError(line_no, "expected idx:val, found '" + tok + "'");
      const auto idx = parse_number(tok.substr(0, colon));
      const auto val = parse_number(tok.substr(colon + 1));
      if (!idx || !val || *idx < 1 || std::floor(*idx) != *idx) throw ParseError(line_no, "bad entry '" + tok + "'");
      if (!std::isfinite(*val)) throw ParseError(line_no, "non-finite value");
      const auto col = static_cast<std::size_t>(*idx);
      if (dim && col > *dim) throw ParseError(line_no, "feature index " + std::to_string(col) + " exceeds declared dim");
      max_index = std::max(max_index, col);
      entries.push_back({row, col - 1, *val});
    }
  }
  if (raw_labels.empty()) throw Error("empty file");
  const std::size_t k = dim.value_or(max_index);
  RawDataset out;
  out.features = Matrix::Zero(static_cast<Eigen::Index>(raw_labels.size()), static_cast<Eigen::Index>(k));
  for (const auto& e : entries) out.features(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) = e.value;
  for (std::size_t j = 0; j < k; ++j) out.feature_names.push_back("f" + std::to_string(j + 1));
  auto [labels, class_names] = remap_labels(raw_labels);
  out.labels = std::move(labels);
  out.class_names = std::move(class_names);
  out.num_classes = static_cast<int>(out.class_names.size());
  return out;
}

RawDataset load_table(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return options.format == TableFormat::csv ? parse_csv(in, options.header) : parse_libsvm(in, options.dim);
}

Dataset normalize_features(const RawDataset& raw) {
  const auto m = raw.features.rows();
  if (m < 2) throw Error("normalize_features needs at least 2 rows");
  if (static_cast<std::size_t>(m) != raw.labels.size()) throw Error("features/labels row mismatch");
  if (!raw.features.allFinite()) throw Error("non-finite feature value");
  Dataset out;
  out.features.resize(m, raw.features.cols());
  for (Eigen::Index j = 0; j < raw.features.cols(); ++j) {
    const double lo = raw.features.col(j).minCoeff();
    const double hi = raw.features.col(j).maxCoeff();
    if (hi == lo) {
      out.features.col(j).setZero();
      continue;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const double v = 2.0 * (raw.features(i, j) - lo) / (hi - lo) - 1.0;
      out.features(i, j) = std::clamp(v, -1.0, 1.0);
    }
  }
  out.labels = raw.labels;
  out.num_classes = raw.num_classes;
  int max_label = -1;
  for (int y : out.labels) {
    if (y < 0) throw Error("negative label");
    max_label = std::max(max_label, y);
  }
  out.num_classes = std::max(out.num_classes, max_label + 1);
  out.class_weights.assign(static_cast<std::size_t>(out.num_classes), 1.0);
  return out;
}

std::vector<double> present_class_weights(const Labels& labels, int num_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  std::vector<double> w(counts.size(), 0.0);
  const double m = static_cast<double>(labels.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0) w[c] = m / (static_cast<double>(num_classes) * static_cast<double>(counts[c]));
  }
  return w;
}

std::vector<double> class_weights(const Labels& labels, int num_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw Error("class " + std::to_string(c) + " has no points");
  }
  return present_class_weights(labels, num_classes);
}

std::vector<double> class_weights(const Dataset& ds) { return class_weights(ds.labels, ds.num_classes); }

Dataset make_imbalanced(const Dataset& ds, double factor, std::span<const int> rare_classes, std::uint64_t seed) {
  if (!(factor >= 1.0)) throw Error("imbalance factor must be >= 1");
  const auto counts = ds.class_counts();
  std::vector<bool> keep(ds.size(), true);
  Rng rng = make_rng({seed, 0x1ba1});
  for (int c : rare_classes) {
    if (c < 0 || c >= ds.num_classes || counts[static_cast<std::size_t>(c)] == 0) {
      throw Error("rare class " + std::to_string(c) + " is not present");
    }
    IndexList members;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] == c) members.push_back(i);
    }
    const auto kept = static_cast<std::size_t>(std::floor(static_cast<double>(members.size()) / factor));
    if (kept == 0) throw Error("class " + std::to_string(c) + " would drop to 0 points");
    shuffle(members.begin(), members.end(), rng);
    for (std::size_t r = kept; r < members.size(); ++r) keep[members[r]] = false;
  }
  IndexList rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (keep[i]) rows.push_back(i);
  }
  Dataset out = ds.subset(rows);
  out.class_weights = class_weights(out);
  return out;
}

std::vector<std::size_t> largest_remainder(std::span<const std::size_t> weights, std::size_t total) {
  const double sum = static_cast<double>(std::accumulate(weights.begin(), weights.end(), std::size_t{0}));
  std::vector<std::size_t> out(weights.size(), 0);
  if (sum == 0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    const double exact = static_cast<double>(total) * static_cast<double>(weights[c]) / sum;
    out[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += out[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++out[remainders[r % remainders.size()].second];
  return out;
}

ALState::ALState(std::shared_ptr<const Dataset> data, IndexList annotated, IndexList pool)
    : data_(std::move(data)), annotated_(std::move(annotated)), pool_(std::move(pool)) {
  std::vector<bool> seen(data_->size(), false);
  for (const auto* list : {&annotated_, &pool_}) {
    for (auto i : *list) {
      if (i >= data_->size()) throw Error("ALState index out of range");
      if (seen[i]) throw Error("ALState index listed twice");
      seen[i] = true;
    }
  }
}

Matrix ALState::pool_features() const { return data_->labeled(pool_).x; }
Matrix ALState::annotated_features() const { return data_->labeled(annotated_).x; }

Labels ALState::annotated_labels() const {
  Labels out;
  out.reserve(annotated_.size());
  for (auto i : annotated_) out.push_back(data_->labels[i]);
  return out;
}

LabeledSet ALState::annotated_set() const { return data_->labeled(annotated_); }

Labels ALState::pool_labels(LabelAccess) const {
  Labels out;
  out.reserve(pool_.size());
  for (auto i : pool_) out.push_back(data_->labels[i]);
  return out;
}

LabeledSet ALState::pool_set(LabelAccess) const { return data_->labeled(pool_); }

std::size_t ALState::acquire(std::size_t pool_pos) {
  if (pool_pos >= pool_.size()) throw Error("pool position out of range");
  const std::size_t idx = pool_[pool_pos];
  pool_.erase(pool_.begin() + static_cast<std::ptrdiff_t>(pool_pos));
  annotated_.push_back(idx);
  return idx;
}

Split split_dataset(std::shared_ptr<const Dataset> ds, const SplitSpec& spec) {
  const std::size_t m = ds->size();
  if (spec.n_test + spec.n_reward + spec.n_init_annot >= m) {
    throw Error("split needs more than " + std::to_string(spec.n_test + spec.n_reward + spec.n_init_annot) +
                " points, dataset has " + std::to_string(m));
  }
  IndexList perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng({spec.data_seed, 0x5b11});
  shuffle(perm.begin(), perm.end(), rng);

  IndexList test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(spec.n_test));
  IndexList reward(perm.begin() + static_cast<std::ptrdiff_t>(spec.n_test),
                   perm.begin() + static_cast<std::ptrdiff_t>(spec.n_test + spec.n_reward));
  IndexList rest(perm.begin() + static_cast<std::ptrdiff_t>(spec.n_test + spec.n_reward), perm.end());

  const auto quotas = largest_remainder(ds->class_counts(), spec.n_init_annot);
  std::vector<std::size_t> taken(quotas.size(), 0);
  IndexList annotated, pool;
  for (auto i : rest) {
    const auto c = static_cast<std::size_t>(ds->labels[i]);
    if (taken[c] < quotas[c]) {
      ++taken[c];
      annotated.push_back(i);
    } else {
      pool.push_back(i);
    }
  }
  for (std::size_t c = 0; c < quotas.size(); ++c) {
    if (taken[c] < quotas[c]) throw Error("not enough points of class " + std::to_string(c) + " for the initial set");
  }
  for (auto* list : {&test, &reward, &annotated, &pool}) std::sort(list->begin(), list->end());

  Dataset test_ds = ds->subset(test);
  Dataset reward_ds = ds->subset(reward);
  ALState state(ds, std::move(annotated), std::move(pool));
  return Split{std::move(state), std::move(test_ds), std::move(reward_ds), std::move(test), std::move(reward)};
}

Matrix diagonal_means(std::size_t dim, double separation) {
  Matrix means(2, static_cast<Eigen::Index>(dim));
  const double offset = 0.5 * separation / std::sqrt(static_cast<double>(dim));
  means.row(0).setConstant(-offset);
  means.row(1).setConstant(offset);
  return means;
}

Dataset generate_gaussian_mixture(std::span<const std::size_t> n_per_class, const Matrix& means, double stdev,
                                  std::uint64_t seed) {
  const auto c = n_per_class.size();
  if (c < 2) throw Error("gaussian mixture needs at least 2 classes");
  if (means.rows() != static_cast<Eigen::Index>(c) || means.cols() < 1) throw Error("means must be C x K with K >= 1");
  if (!(stdev > 0.0)) throw Error("stdev must be positive");
  RawDataset raw;
  const std::size_t total = std::accumulate(n_per_class.begin(), n_per_class.end(), std::size_t{0});
  raw.features.resize(static_cast<Eigen::Index>(total), means.cols());
  raw.num_classes = static_cast<int>(c);
  Rng rng = make_rng({seed, 0x6a55});
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < n_per_class[k]; ++i, ++r) {
      for (Eigen::Index j = 0; j < means.cols(); ++j) {
        raw.features(r, j) = means(static_cast<Eigen::Index>(k), j) + stdev * standard_normal(rng);
      }
      raw.labels.push_back(static_cast<int>(k));
    }
  }
  return normalize_features(raw);
}

}  // namespace lal
