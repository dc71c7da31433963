#include "neuralwarp/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace neuralwarp::nn {

namespace {
thread_local KinkRecorder* current_recorder = nullptr;
}  // namespace

KinkRecorder::KinkRecorder() : previous_(current_recorder) { current_recorder = this; }

KinkRecorder::~KinkRecorder() { current_recorder = previous_; }

void KinkRecorder::record(const Matrix& z) {
  if (!current_recorder) return;
  auto& p = current_recorder->pattern_;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double v = z.data()[i];
    p.push_back(static_cast<signed char>((v > 0.0) - (v < 0.0)));
  }
}

void KinkRecorder::record(double z) {
  if (current_recorder) current_recorder->pattern_.push_back(static_cast<signed char>((z > 0.0) - (z < 0.0)));
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckReport finite_diff_check(const std::function<double()>& loss,
                                  const std::vector<GradTarget>& targets, double epsilon,
                                  bool skip_kinks) {
  GradCheckReport report;
  report.max_relative_error = 0.0;
  for (const auto& target : targets) {
    Matrix& x = *target.value;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double saved = x(r, c);
        double up = 0.0;
        double down = 0.0;
        bool straddles = false;
        {
          KinkRecorder up_kinks;
          x(r, c) = saved + epsilon;
          up = loss();
          KinkRecorder down_kinks;
          x(r, c) = saved - epsilon;
          down = loss();
          straddles = up_kinks.pattern() != down_kinks.pattern();
        }
        x(r, c) = saved;
        if (skip_kinks && straddles) {
          ++report.skipped;
          continue;
        }
        const double analytic = (*target.analytic)(r, c);
        const double numeric = (up - down) / (2.0 * epsilon);
        const double err = relative_error(analytic, numeric);
        ++report.checked;
        if (report.worst.empty() || err > report.max_relative_error) {
          report.max_relative_error = err;
          report.worst = target.name + "[" + std::to_string(r) + "," + std::to_string(c) + "]";
          report.worst_analytic = analytic;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  return report;
}

std::vector<GradTarget> trainable_targets(ParamStore& store) {
  std::vector<GradTarget> out;
  for (auto& p : store) {
    if (p.trainable) out.push_back({p.name, &p.value, &p.grad});
  }
  return out;
}

}  // namespace neuralwarp::nn
