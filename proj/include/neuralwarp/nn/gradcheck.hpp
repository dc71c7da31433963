#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "neuralwarp/nn/param_store.hpp"

namespace neuralwarp::nn {

/// A tensor to perturb together with its analytic gradient.
struct GradTarget {
  std::string name;
  Matrix* value;
  const Matrix* analytic;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst;  ///< "name[r,c]" of the worst component
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  /// Components left out because the two probes took different branches at
  /// a kink (ReLU, absolute value, clamp), where no derivative exists.
  std::size_t skipped = 0;
};

/// While alive, collects the side taken at every kink evaluated on this
/// thread. Nested recorders shadow outer ones.
class KinkRecorder {
 public:
  KinkRecorder();
  ~KinkRecorder();
  KinkRecorder(const KinkRecorder&) = delete;
  KinkRecorder& operator=(const KinkRecorder&) = delete;

  const std::vector<signed char>& pattern() const { return pattern_; }

  /// Sign of each argument relative to the kink at zero; no-op without a recorder.
  static void record(const Matrix& z);
  static void record(double z);

 private:
  std::vector<signed char> pattern_;
  KinkRecorder* previous_;
};

/// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

/// Central differences of `loss` against every component of every target.
/// `loss` must re-evaluate from the current target values and be deterministic.
/// With skip_kinks, components whose probes straddle a recorded kink are
/// counted in `skipped` instead of compared.
GradCheckReport finite_diff_check(const std::function<double()>& loss,
                                  const std::vector<GradTarget>& targets, double epsilon = 1e-5,
                                  bool skip_kinks = false);

/// Targets for every trainable group of a store whose .grad holds the analytic gradient.
std::vector<GradTarget> trainable_targets(ParamStore& store);

}  // namespace neuralwarp::nn
