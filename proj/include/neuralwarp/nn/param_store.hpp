#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace neuralwarp::nn {

using Matrix = Eigen::MatrixXd;

/// One named parameter group with its gradient and Adam moments. Buffers
/// (trainable == false) hold state such as batch-norm running statistics;
/// they are checkpointed but never receive gradients or updates.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;
  bool trainable = true;
};

/// Insertion-ordered parameter groups plus the optimizer step counter.
/// Layers keep integer handles into the store, so copying a store gives an
/// independent snapshot usable with the same layer objects.
class ParamStore {
 public:
  std::size_t add(const std::string& name, Matrix init, bool trainable = true);

  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  Param& at(const std::string& name) { return params_[index(name)]; }
  const Param& at(const std::string& name) const { return params_[index(name)]; }

  const Matrix& value(std::size_t i) const { return params_[i].value; }
  Matrix& grad(std::size_t i) { return params_[i].grad; }

  std::size_t size() const noexcept { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  /// Total number of trainable scalars.
  std::size_t num_weights() const;
  bool all_finite() const;

  std::int64_t step = 0;

 private:
  std::vector<Param> params_;
  std::map<std::string, std::size_t> by_name_;
};

}  // namespace neuralwarp::nn
