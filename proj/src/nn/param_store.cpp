#include "neuralwarp/nn/param_store.hpp"

#include <stdexcept>

namespace neuralwarp::nn {

std::size_t ParamStore::add(const std::string& name, Matrix init, bool trainable) {
  if (by_name_.count(name) != 0) throw std::invalid_argument("duplicate parameter '" + name + "'");
  Param p;
  p.name = name;
  p.grad = Matrix::Zero(init.rows(), init.cols());
  p.m = Matrix::Zero(init.rows(), init.cols());
  p.v = Matrix::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  p.trainable = trainable;
  params_.push_back(std::move(p));
  by_name_[name] = params_.size() - 1;
  return params_.size() - 1;
}

std::size_t ParamStore::index(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

std::size_t ParamStore::num_weights() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += static_cast<std::size_t>(p.value.size());
  }
  return n;
}

bool ParamStore::all_finite() const {
  for (const auto& p : params_) {
    if (!p.value.allFinite() || !p.m.allFinite() || !p.v.allFinite()) return false;
  }
  return true;
}

}  // namespace neuralwarp::nn
