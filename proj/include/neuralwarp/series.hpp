#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "neuralwarp/rng.hpp"

namespace neuralwarp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// A T x D measurement matrix (rows are time indices, columns channels)
/// with an optional class label. Values are validated finite on construction.
class TimeSeries {
 public:
  TimeSeries() = default;
  explicit TimeSeries(Matrix values, std::optional<int> label = std::nullopt);

  const Matrix& values() const noexcept { return values_; }
  std::optional<int> label() const noexcept { return label_; }
  void set_label(std::optional<int> label);

  std::size_t length() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t channels() const noexcept { return static_cast<std::size_t>(values_.cols()); }

  /// Row i as a D-vector (0-based).
  auto at(std::size_t i) const { return values_.row(static_cast<Eigen::Index>(i)); }

  static TimeSeries univariate(const std::vector<double>& values,
                               std::optional<int> label = std::nullopt);

 private:
  Matrix values_;
  std::optional<int> label_;
};

/// Equal-length, equal-width labeled series with labels in [0, num_classes).
/// class_names[k] is the label dense id k had in the source file.
struct Dataset {
  std::vector<TimeSeries> instances;
  int num_classes = 0;
  std::vector<long> class_names;
  std::size_t length = 0;
  std::size_t channels = 0;

  std::size_t size() const noexcept { return instances.size(); }
  /// Throws FormatError if any instance breaks the uniform-shape or label invariants.
  void validate() const;
  std::vector<int> labels() const;
};

enum class Format { UcrTsv, MtsV1 };

Format parse_format(const std::string& name);
std::string format_name(Format format);

/// Ragged-input handling. With neither set, rows of differing length are rejected.
struct LoadOptions {
  /// Zero-pad every series at the end to this length (0 = to the longest row).
  std::optional<std::size_t> pad_to;
  /// Cut every series to this length; shorter rows are an error.
  std::optional<std::size_t> truncate;
  /// Seed the label remapping (e.g. with the training set's class_names) so
  /// that separately loaded splits agree on dense ids. Unseen labels extend it.
  std::vector<long> class_names;
};

/// Reads a dataset. Labels are remapped densely to 0..C-1 in order of first appearance.
Dataset load_dataset(const std::filesystem::path& path, Format format,
                     const LoadOptions& options = {});
Dataset read_dataset(std::istream& in, Format format, const LoadOptions& options = {});

/// Writes mts-v1 with round-trip precision.
void save_mts(const Dataset& dataset, const std::filesystem::path& path);
void write_mts(const Dataset& dataset, std::ostream& out);

/// Channel-wise z-normalization (population std); constant channels map to 0.
TimeSeries znormalize(const TimeSeries& series);
Dataset znormalize(const Dataset& dataset);

struct PairItem {
  std::size_t first = 0;
  std::size_t second = 0;
  int target = 0;  ///< 1 iff both instances share a label
};

/// Pairs drawn from a dataset, stored as instance indices.
struct PairBatch {
  std::vector<PairItem> pairs;
  std::size_t positives() const;
  std::size_t negatives() const;
};

/// K same-label and K different-label pairs, uniformly with replacement,
/// never pairing an instance with itself. Positives come first.
PairBatch sample_pair_batch(const Dataset& dataset, std::size_t k, Rng& rng);

struct SyntheticSpec {
  int num_classes = 2;
  std::size_t instances_per_class = 20;
  std::size_t length = 64;
  std::size_t channels = 1;
  std::size_t shift_range = 8;
  double warp_strength = 0.2;
  double noise_sigma = 0.1;
};

/// Class prototypes (trains of c + 2 narrow spikes) perturbed per instance by a
/// circular shift, a monotone time warp and additive Gaussian noise.
Dataset gen_synthetic(const SyntheticSpec& spec, Rng& rng);

/// Stratified random split; returns {train, test}.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction,
                                  std::uint64_t seed);

/// Row-major CSV, 9 significant digits, no header.
void write_csv(const Matrix& matrix, std::ostream& out);
void save_csv(const Matrix& matrix, const std::filesystem::path& path);

}  // namespace neuralwarp
