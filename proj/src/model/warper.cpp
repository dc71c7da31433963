#include "neuralwarp/model/warper.hpp"

#include <stdexcept>

#include "neuralwarp/errors.hpp"

namespace neuralwarp::model {

Warper::Warper(const WarperConfig& config, std::size_t context_width, nn::ParamStore& store,
               Rng& init_rng, const std::string& prefix)
    : config_(config), context_width_(context_width) {
  if (context_width == 0) throw ConfigError("warper needs a positive context width");
  std::size_t in = 2 * context_width;
  for (std::size_t i = 0; i < config_.hidden.size(); ++i) {
    if (config_.hidden[i] == 0) throw ConfigError("warper hidden sizes must be positive");
    layers_.emplace_back(store, prefix + "." + std::to_string(i), in, config_.hidden[i],
                         config_.hidden_activation, init_rng);
    in = config_.hidden[i];
  }
  layers_.emplace_back(store, prefix + ".out", in, 1, nn::Activation::Sigmoid, init_rng);
}

double Warper::prob(const nn::ParamStore& store, const RowVector& ctx_a, const RowVector& ctx_b) const {
  if (static_cast<std::size_t>(ctx_a.size()) != context_width_ ||
      static_cast<std::size_t>(ctx_b.size()) != context_width_) {
    throw std::invalid_argument("warper context width mismatch");
  }
  Matrix x(1, ctx_a.size() + ctx_b.size());
  x << ctx_a, ctx_b;
  for (const auto& layer : layers_) x = layer.forward(store, x);
  return x(0, 0);
}

Matrix Warper::all_pairs(const nn::ParamStore& store, const Matrix& ctx_a, const Matrix& ctx_b,
                         PairCache* cache) const {
  const auto k = static_cast<Eigen::Index>(context_width_);
  if (ctx_a.cols() != k || ctx_b.cols() != k) throw std::invalid_argument("warper context width mismatch");
  const Eigen::Index ta = ctx_a.rows();
  const Eigen::Index tb = ctx_b.rows();
  const nn::Dense& first = layers_.front();
  const Matrix& w = store.value(first.weight());

  const Matrix proj_a = ctx_a * w.topRows(k);
  Matrix proj_b = ctx_b * w.bottomRows(k);
  proj_b.rowwise() += store.value(first.bias()).row(0);

  Matrix z(ta * tb, w.cols());
  for (Eigen::Index i = 0; i < ta; ++i) {
    z.middleRows(i * tb, tb) = proj_b.rowwise() + proj_a.row(i);
  }
  Matrix h = nn::activate(first.activation(), z);

  std::vector<nn::DenseCache> rest(cache ? layers_.size() - 1 : 0);
  if (cache) {
    cache->ctx_a = ctx_a;
    cache->ctx_b = ctx_b;
    cache->first_out = h;
  }
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    h = layers_[l].forward(store, h, cache ? &rest[l - 1] : nullptr);
  }
  if (cache) cache->rest = std::move(rest);

  // h is (ta * tb) x 1 in row order i * tb + j.
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      h.data(), ta, tb);
}

void Warper::backward_all_pairs(nn::ParamStore& store, const Matrix& grad_phi, const PairCache& cache,
                                Matrix& grad_a, Matrix& grad_b) const {
  const auto k = static_cast<Eigen::Index>(context_width_);
  const Eigen::Index ta = cache.ctx_a.rows();
  const Eigen::Index tb = cache.ctx_b.rows();

  Matrix g(ta * tb, 1);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(g.data(), ta, tb) =
      grad_phi;
  for (std::size_t l = layers_.size(); l-- > 1;) {
    g = layers_[l].backward(store, g, cache.rest[l - 1]);
  }
  const nn::Dense& first = layers_.front();
  const Matrix dz = nn::activate_backward(first.activation(), cache.first_out, g);

  Matrix d_proj_a(ta, dz.cols());
  Matrix d_proj_b = Matrix::Zero(tb, dz.cols());
  for (Eigen::Index i = 0; i < ta; ++i) {
    const auto block = dz.middleRows(i * tb, tb);
    d_proj_a.row(i) = block.colwise().sum();
    d_proj_b += block;
  }
  const Matrix& w = store.value(first.weight());
  Matrix& dw = store.grad(first.weight());
  dw.topRows(k).noalias() += cache.ctx_a.transpose() * d_proj_a;
  dw.bottomRows(k).noalias() += cache.ctx_b.transpose() * d_proj_b;
  store.grad(first.bias()) += d_proj_b.colwise().sum();
  grad_a.noalias() += d_proj_a * w.topRows(k).transpose();
  grad_b.noalias() += d_proj_b * w.bottomRows(k).transpose();
}

}  // namespace neuralwarp::model
