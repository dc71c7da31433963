#include "neuralwarp/nn/layers.hpp"

#include "neuralwarp/nn/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "neuralwarp/errors.hpp"

namespace neuralwarp::nn {

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string activation_name(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

Matrix activate(Activation act, const Matrix& z) {
  switch (act) {
    case Activation::Identity: return z;
    case Activation::Relu:
      KinkRecorder::record(z);
      return z.cwiseMax(0.0);
    case Activation::Sigmoid: return (1.0 + (-z.array()).exp()).inverse().matrix();
    case Activation::Tanh: return z.array().tanh().matrix();
  }
  return z;
}

Matrix activate_backward(Activation act, const Matrix& y, const Matrix& grad_y) {
  switch (act) {
    case Activation::Identity: return grad_y;
    case Activation::Relu: return (y.array() > 0.0).select(grad_y, 0.0);
    case Activation::Sigmoid: return (grad_y.array() * y.array() * (1.0 - y.array())).matrix();
    case Activation::Tanh: return (grad_y.array() * (1.0 - y.array().square())).matrix();
  }
  return grad_y;
}

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, double fan_in, double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(rows, cols);
  // Fill row-major so the draw order does not depend on Eigen's storage order.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = dist(rng);
  }
  return w;
}

void LayerConfig::validate() const {
  switch (kind) {
    case LayerKind::Dense:
    case LayerKind::BiLstm:
      if (units == 0) throw ConfigError("layer units must be positive");
      break;
    case LayerKind::Conv1d:
      if (units == 0 || width == 0) throw ConfigError("conv filters and width must be positive");
      if (stride < 1) throw ConfigError("conv stride must be >= 1");
      break;
    case LayerKind::Dropout:
      if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
      break;
    case LayerKind::BatchNorm:
      break;
  }
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
             Activation act, Rng& rng)
    : in_(in), out_(out), act_(act) {
  if (in == 0 || out == 0) throw ConfigError("dense layer sizes must be positive");
  const auto ei = static_cast<Eigen::Index>(in);
  const auto eo = static_cast<Eigen::Index>(out);
  w_ = store.add(prefix + ".W", glorot_uniform(ei, eo, static_cast<double>(in), static_cast<double>(out), rng));
  b_ = store.add(prefix + ".b", Matrix::Zero(1, eo));
}

Matrix Dense::forward(const ParamStore& store, const Matrix& x, DenseCache* cache) const {
  if (static_cast<std::size_t>(x.cols()) != in_) {
    throw std::invalid_argument("dense input width " + std::to_string(x.cols()) + ", expected " +
                                std::to_string(in_));
  }
  Matrix z = x * store.value(w_);
  z.rowwise() += store.value(b_).row(0);
  Matrix y = activate(act_, z);
  if (cache) {
    cache->x = x;
    cache->y = y;
  }
  return y;
}

Matrix Dense::backward(ParamStore& store, const Matrix& grad_y, const DenseCache& cache) const {
  if (grad_y.rows() != cache.y.rows() || grad_y.cols() != cache.y.cols()) {
    throw std::invalid_argument("dense gradient shape mismatch");
  }
  const Matrix dz = activate_backward(act_, cache.y, grad_y);
  store.grad(w_).noalias() += cache.x.transpose() * dz;
  store.grad(b_) += dz.colwise().sum();
  return dz * store.value(w_).transpose();
}

// ---------------------------------------------------------------------------
// Conv1d

namespace {

struct ConvCache : LayerCache {
  std::vector<Matrix> cols;
  std::vector<std::size_t> lengths;
};

struct BiLstmDirCache {
  std::vector<Matrix> x;
  std::vector<Matrix> h_prev;
  std::vector<Matrix> c_prev;
  std::vector<Matrix> gates;
  std::vector<Matrix> tanh_c;
};

struct BiLstmCache : LayerCache {
  std::size_t batch = 0;
  std::size_t length = 0;
  BiLstmDirCache dirs[2];
};

struct BatchNormCache : LayerCache {
  Matrix xhat;
  Eigen::RowVectorXd inv_std;
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd var;
  std::vector<Eigen::Index> lengths;
  bool train = false;
};

struct MaskCache : LayerCache {
  std::vector<Matrix> masks;
};

struct OutputCache : LayerCache {
  std::vector<Matrix> y;
};

void require_width(const SeqBatch& x, std::size_t width, const char* layer) {
  for (const auto& s : x) {
    if (static_cast<std::size_t>(s.cols()) != width) {
      throw std::invalid_argument(std::string(layer) + " input width " + std::to_string(s.cols()) +
                                  ", expected " + std::to_string(width));
    }
    if (s.rows() < 1) throw std::invalid_argument(std::string(layer) + " got an empty sequence");
  }
}

Matrix sigmoid(const Matrix& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

}  // namespace

Conv1d::Conv1d(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t filters,
               std::size_t width, std::size_t stride, Rng& rng, bool bias)
    : in_(in), filters_(filters), width_(width), stride_(stride), has_bias_(bias) {
  if (in == 0 || filters == 0 || width == 0 || stride == 0) {
    throw ConfigError("conv1d sizes and stride must be positive");
  }
  const double fan_in = static_cast<double>(width * in);
  const double fan_out = static_cast<double>(width * filters);
  w_ = store.add(prefix + ".W", glorot_uniform(static_cast<Eigen::Index>(width * in),
                                               static_cast<Eigen::Index>(filters), fan_in, fan_out, rng));
  if (bias) b_ = store.add(prefix + ".b", Matrix::Zero(1, static_cast<Eigen::Index>(filters)));
}

std::size_t Conv1d::output_length(std::size_t length) const {
  return (length + stride_ - 1) / stride_;
}

std::size_t Conv1d::pad_left(std::size_t length) const {
  const std::size_t out = output_length(length);
  const std::size_t span = (out - 1) * stride_ + width_;
  const std::size_t total = span > length ? span - length : 0;
  return total / 2;
}

Matrix Conv1d::im2col(const Matrix& x) const {
  const std::size_t length = static_cast<std::size_t>(x.rows());
  const std::size_t out = output_length(length);
  const auto pad = static_cast<long>(pad_left(length));
  const auto ein = static_cast<Eigen::Index>(in_);
  Matrix col = Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(width_ * in_));
  for (std::size_t t = 0; t < out; ++t) {
    for (std::size_t k = 0; k < width_; ++k) {
      const long src = static_cast<long>(t * stride_ + k) - pad;
      if (src < 0 || src >= static_cast<long>(length)) continue;
      col.block(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k) * ein, 1, ein) = x.row(src);
    }
  }
  return col;
}

SeqBatch Conv1d::forward(const ParamStore& store, const SeqBatch& x, Mode /*mode*/, Rng* /*rng*/,
                         std::unique_ptr<LayerCache>* cache) const {
  require_width(x, in_, "conv1d");
  auto c = cache ? std::make_unique<ConvCache>() : nullptr;
  SeqBatch y;
  y.reserve(x.size());
  for (const auto& s : x) {
    Matrix col = im2col(s);
    Matrix out = col * store.value(w_);
    if (has_bias_) out.rowwise() += store.value(b_).row(0);
    y.push_back(std::move(out));
    if (c) {
      c->cols.push_back(std::move(col));
      c->lengths.push_back(static_cast<std::size_t>(s.rows()));
    }
  }
  if (cache) *cache = std::move(c);
  return y;
}

SeqBatch Conv1d::backward(ParamStore& store, const SeqBatch& grad_y, const LayerCache& cache) const {
  const auto& c = dynamic_cast<const ConvCache&>(cache);
  const auto ein = static_cast<Eigen::Index>(in_);
  SeqBatch dx;
  dx.reserve(grad_y.size());
  for (std::size_t n = 0; n < grad_y.size(); ++n) {
    const Matrix& g = grad_y[n];
    store.grad(w_).noalias() += c.cols[n].transpose() * g;
    if (has_bias_) store.grad(b_) += g.colwise().sum();
    const Matrix dcol = g * store.value(w_).transpose();
    const std::size_t length = c.lengths[n];
    const auto pad = static_cast<long>(pad_left(length));
    Matrix d = Matrix::Zero(static_cast<Eigen::Index>(length), ein);
    for (Eigen::Index t = 0; t < dcol.rows(); ++t) {
      for (std::size_t k = 0; k < width_; ++k) {
        const long src = static_cast<long>(static_cast<std::size_t>(t) * stride_ + k) - pad;
        if (src < 0 || src >= static_cast<long>(length)) continue;
        d.row(src) += dcol.block(t, static_cast<Eigen::Index>(k) * ein, 1, ein);
      }
    }
    dx.push_back(std::move(d));
  }
  return dx;
}

// ---------------------------------------------------------------------------
// BiLstm

BiLstm::BiLstm(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t cells, Rng& rng)
    : in_(in), cells_(cells) {
  if (in == 0 || cells == 0) throw ConfigError("bilstm sizes must be positive");
  const auto ein = static_cast<Eigen::Index>(in);
  const auto h = static_cast<Eigen::Index>(cells);
  const char* names[2] = {".fwd", ".bwd"};
  for (int d = 0; d < 2; ++d) {
    const std::string p = prefix + names[d];
    dirs_[d].wx = store.add(p + ".Wx", glorot_uniform(ein, 4 * h, static_cast<double>(in),
                                                      static_cast<double>(4 * cells), rng));
    dirs_[d].wh = store.add(p + ".Wh", glorot_uniform(h, 4 * h, static_cast<double>(cells),
                                                      static_cast<double>(4 * cells), rng));
    Matrix b = Matrix::Zero(1, 4 * h);
    b.block(0, h, 1, h).setOnes();  // forget gate
    dirs_[d].b = store.add(p + ".b", std::move(b));
  }
}

SeqBatch BiLstm::forward(const ParamStore& store, const SeqBatch& x, Mode /*mode*/, Rng* /*rng*/,
                         std::unique_ptr<LayerCache>* cache) const {
  require_width(x, in_, "bilstm");
  if (x.empty()) return {};
  const auto length = x.front().rows();
  for (const auto& s : x) {
    if (s.rows() != length) throw std::invalid_argument("bilstm batch sequences must share a length");
  }
  const auto batch = static_cast<Eigen::Index>(x.size());
  const auto h = static_cast<Eigen::Index>(cells_);

  auto c = cache ? std::make_unique<BiLstmCache>() : nullptr;
  if (c) {
    c->batch = x.size();
    c->length = static_cast<std::size_t>(length);
  }
  SeqBatch y(x.size(), Matrix(length, 2 * h));

  for (int d = 0; d < 2; ++d) {
    const Matrix& wx = store.value(dirs_[d].wx);
    const Matrix& wh = store.value(dirs_[d].wh);
    const auto bias = store.value(dirs_[d].b).row(0);
    Matrix hidden = Matrix::Zero(batch, h);
    Matrix cell = Matrix::Zero(batch, h);
    Matrix xt(batch, static_cast<Eigen::Index>(in_));
    for (Eigen::Index step = 0; step < length; ++step) {
      const Eigen::Index t = d == 0 ? step : length - 1 - step;
      for (Eigen::Index n = 0; n < batch; ++n) xt.row(n) = x[static_cast<std::size_t>(n)].row(t);
      Matrix z = xt * wx;
      z.noalias() += hidden * wh;
      z.rowwise() += bias;
      Matrix gates(batch, 4 * h);
      gates.leftCols(2 * h) = sigmoid(z.leftCols(2 * h));
      gates.middleCols(2 * h, h) = z.middleCols(2 * h, h).array().tanh().matrix();
      gates.rightCols(h) = sigmoid(z.rightCols(h));

      Matrix new_cell = (gates.middleCols(h, h).array() * cell.array() +
                         gates.leftCols(h).array() * gates.middleCols(2 * h, h).array())
                            .matrix();
      Matrix tc = new_cell.array().tanh().matrix();
      Matrix new_hidden = (gates.rightCols(h).array() * tc.array()).matrix();
      if (c) {
        auto& dc = c->dirs[d];
        dc.x.push_back(xt);
        dc.h_prev.push_back(hidden);
        dc.c_prev.push_back(cell);
        dc.gates.push_back(std::move(gates));
        dc.tanh_c.push_back(std::move(tc));
      }
      hidden = std::move(new_hidden);
      cell = std::move(new_cell);
      for (Eigen::Index n = 0; n < batch; ++n) {
        y[static_cast<std::size_t>(n)].block(t, d * h, 1, h) = hidden.row(n);
      }
    }
  }
  if (cache) *cache = std::move(c);
  return y;
}

SeqBatch BiLstm::backward(ParamStore& store, const SeqBatch& grad_y, const LayerCache& cache) const {
  const auto& c = dynamic_cast<const BiLstmCache&>(cache);
  const auto batch = static_cast<Eigen::Index>(c.batch);
  const auto length = static_cast<Eigen::Index>(c.length);
  const auto h = static_cast<Eigen::Index>(cells_);
  SeqBatch dx(c.batch, Matrix::Zero(length, static_cast<Eigen::Index>(in_)));

  for (int d = 0; d < 2; ++d) {
    const auto& dc = c.dirs[d];
    const Matrix& wx = store.value(dirs_[d].wx);
    const Matrix& wh = store.value(dirs_[d].wh);
    Matrix dh_next = Matrix::Zero(batch, h);
    Matrix dc_next = Matrix::Zero(batch, h);
    Matrix dz(batch, 4 * h);
    for (Eigen::Index step = length - 1; step >= 0; --step) {
      const Eigen::Index t = d == 0 ? step : length - 1 - step;
      const auto s = static_cast<std::size_t>(step);
      const Matrix& gates = dc.gates[s];
      const auto i = gates.leftCols(h).array();
      const auto f = gates.middleCols(h, h).array();
      const auto g = gates.middleCols(2 * h, h).array();
      const auto o = gates.rightCols(h).array();
      const auto tc = dc.tanh_c[s].array();

      Matrix dh = dh_next;
      for (Eigen::Index n = 0; n < batch; ++n) {
        dh.row(n) += grad_y[static_cast<std::size_t>(n)].block(t, d * h, 1, h);
      }
      const Eigen::ArrayXXd dcell = dh.array() * o * (1.0 - tc.square()) + dc_next.array();
      dz.leftCols(h) = (dcell * g * i * (1.0 - i)).matrix();
      dz.middleCols(h, h) = (dcell * dc.c_prev[s].array() * f * (1.0 - f)).matrix();
      dz.middleCols(2 * h, h) = (dcell * i * (1.0 - g.square())).matrix();
      dz.rightCols(h) = (dh.array() * tc * o * (1.0 - o)).matrix();
      dc_next = (dcell * f).matrix();

      store.grad(dirs_[d].wx).noalias() += dc.x[s].transpose() * dz;
      store.grad(dirs_[d].wh).noalias() += dc.h_prev[s].transpose() * dz;
      store.grad(dirs_[d].b) += dz.colwise().sum();
      const Matrix dxt = dz * wx.transpose();
      dh_next = dz * wh.transpose();
      for (Eigen::Index n = 0; n < batch; ++n) dx[static_cast<std::size_t>(n)].row(t) += dxt.row(n);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(ParamStore& store, const std::string& prefix, std::size_t features)
    : features_(features) {
  if (features == 0) throw ConfigError("batchnorm needs a positive feature count");
  const auto f = static_cast<Eigen::Index>(features);
  gamma_ = store.add(prefix + ".gamma", Matrix::Ones(1, f));
  beta_ = store.add(prefix + ".beta", Matrix::Zero(1, f));
  mean_ = store.add(prefix + ".running_mean", Matrix::Zero(1, f), false);
  var_ = store.add(prefix + ".running_var", Matrix::Ones(1, f), false);
}

SeqBatch BatchNorm::forward(const ParamStore& store, const SeqBatch& x, Mode mode, Rng* /*rng*/,
                            std::unique_ptr<LayerCache>* cache) const {
  require_width(x, features_, "batchnorm");
  if (x.empty()) return {};
  const auto f = static_cast<Eigen::Index>(features_);
  Eigen::Index rows = 0;
  for (const auto& s : x) rows += s.rows();
  Matrix all(rows, f);
  std::vector<Eigen::Index> lengths;
  Eigen::Index r = 0;
  for (const auto& s : x) {
    all.middleRows(r, s.rows()) = s;
    r += s.rows();
    lengths.push_back(s.rows());
  }

  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd var;
  if (mode == Mode::Train) {
    mean = all.colwise().mean();
    var = (all.rowwise() - mean).array().square().colwise().mean().matrix();
  } else {
    mean = store.value(mean_).row(0);
    var = store.value(var_).row(0);
  }
  const Eigen::RowVectorXd inv_std = (var.array() + kEpsilon).rsqrt().matrix();
  Matrix xhat = ((all.rowwise() - mean).array().rowwise() * inv_std.array()).matrix();
  Matrix out = (xhat.array().rowwise() * store.value(gamma_).row(0).array()).matrix();
  out.rowwise() += store.value(beta_).row(0);

  SeqBatch y;
  y.reserve(x.size());
  r = 0;
  for (auto len : lengths) {
    y.push_back(out.middleRows(r, len));
    r += len;
  }
  if (cache) {
    auto c = std::make_unique<BatchNormCache>();
    c->xhat = std::move(xhat);
    c->inv_std = inv_std;
    c->mean = mean;
    c->var = var;
    c->lengths = std::move(lengths);
    c->train = mode == Mode::Train;
    *cache = std::move(c);
  }
  return y;
}

SeqBatch BatchNorm::backward(ParamStore& store, const SeqBatch& grad_y, const LayerCache& cache) const {
  const auto& c = dynamic_cast<const BatchNormCache&>(cache);
  const auto f = static_cast<Eigen::Index>(features_);
  const Eigen::Index rows = c.xhat.rows();
  Matrix dy(rows, f);
  Eigen::Index r = 0;
  for (const auto& g : grad_y) {
    dy.middleRows(r, g.rows()) = g;
    r += g.rows();
  }
  store.grad(gamma_) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  store.grad(beta_) += dy.colwise().sum();

  const Matrix dxhat = (dy.array().rowwise() * store.value(gamma_).row(0).array()).matrix();
  Matrix dx;
  if (c.train) {
    const double n = static_cast<double>(rows);
    const Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
    const Eigen::RowVectorXd sum_dx = (dxhat.array() * c.xhat.array()).colwise().sum().matrix();
    dx = ((n * dxhat.array()).rowwise() - sum_d.array()).matrix();
    dx -= (c.xhat.array().rowwise() * sum_dx.array()).matrix();
    dx = (dx.array().rowwise() * (c.inv_std.array() / n)).matrix();
  } else {
    dx = (dxhat.array().rowwise() * c.inv_std.array()).matrix();
  }

  SeqBatch out;
  out.reserve(c.lengths.size());
  r = 0;
  for (auto len : c.lengths) {
    out.push_back(dx.middleRows(r, len));
    r += len;
  }
  return out;
}

void BatchNorm::commit(ParamStore& store, const LayerCache& cache) const {
  const auto& c = dynamic_cast<const BatchNormCache&>(cache);
  if (!c.train) return;
  store[mean_].value = kMomentum * store.value(mean_) + (1.0 - kMomentum) * Matrix(c.mean);
  store[var_].value = kMomentum * store.value(var_) + (1.0 - kMomentum) * Matrix(c.var);
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(std::size_t features, double rate) : features_(features), rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
}

SeqBatch Dropout::forward(const ParamStore& /*store*/, const SeqBatch& x, Mode mode, Rng* rng,
                          std::unique_ptr<LayerCache>* cache) const {
  require_width(x, features_, "dropout");
  if (mode == Mode::Eval || rate_ == 0.0) {
    if (cache) *cache = std::make_unique<MaskCache>();
    return x;
  }
  if (rng == nullptr) throw std::invalid_argument("train-mode dropout needs a random stream");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate_);
  auto c = std::make_unique<MaskCache>();
  SeqBatch y;
  y.reserve(x.size());
  for (const auto& s : x) {
    Matrix mask(s.rows(), s.cols());
    for (Eigen::Index t = 0; t < s.rows(); ++t) {
      for (Eigen::Index j = 0; j < s.cols(); ++j) mask(t, j) = unit(*rng) < rate_ ? 0.0 : keep_scale;
    }
    y.push_back((s.array() * mask.array()).matrix());
    c->masks.push_back(std::move(mask));
  }
  if (cache) *cache = std::move(c);
  return y;
}

SeqBatch Dropout::backward(ParamStore& /*store*/, const SeqBatch& grad_y, const LayerCache& cache) const {
  const auto& c = dynamic_cast<const MaskCache&>(cache);
  if (c.masks.empty()) return grad_y;
  SeqBatch dx;
  dx.reserve(grad_y.size());
  for (std::size_t n = 0; n < grad_y.size(); ++n) {
    dx.push_back((grad_y[n].array() * c.masks[n].array()).matrix());
  }
  return dx;
}

// ---------------------------------------------------------------------------
// ActivationLayer

SeqBatch ActivationLayer::forward(const ParamStore& /*store*/, const SeqBatch& x, Mode /*mode*/,
                                  Rng* /*rng*/, std::unique_ptr<LayerCache>* cache) const {
  require_width(x, features_, "activation");
  SeqBatch y;
  y.reserve(x.size());
  for (const auto& s : x) y.push_back(activate(act_, s));
  if (cache) {
    auto c = std::make_unique<OutputCache>();
    c->y = y;
    *cache = std::move(c);
  }
  return y;
}

SeqBatch ActivationLayer::backward(ParamStore& /*store*/, const SeqBatch& grad_y,
                                   const LayerCache& cache) const {
  const auto& c = dynamic_cast<const OutputCache&>(cache);
  SeqBatch dx;
  dx.reserve(grad_y.size());
  for (std::size_t n = 0; n < grad_y.size(); ++n) dx.push_back(activate_backward(act_, c.y[n], grad_y[n]));
  return dx;
}

}  // namespace neuralwarp::nn
