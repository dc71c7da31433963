#include "neuralwarp/model/similarity.hpp"

#include <cmath>
#include <stdexcept>

#include "neuralwarp/errors.hpp"
#include "neuralwarp/nn/checkpoint.hpp"
#include "neuralwarp/nn/gradcheck.hpp"

namespace neuralwarp::model {

namespace {

constexpr double kMinComplement = 1e-12;

// Adds the gradient of sum_ij |a_i - b_j|_1 * weight_ij into grad_a / grad_b.
void pairwise_l1_backward(const Matrix& a, const Matrix& b, const Matrix& weight, Matrix& grad_a,
                          Matrix& grad_b) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Matrix sign = (-(b.rowwise() - a.row(i))).array().sign().matrix();  // sign(a_i - b_j)
    grad_a.row(i) += weight.row(i) * sign;
    grad_b -= (sign.array().colwise() * weight.row(i).transpose().array()).matrix();
  }
}

}  // namespace

double SimilarityScore::s() const { return std::exp(log_s); }

Matrix pairwise_l1(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("context width mismatch");
  Matrix d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Matrix diff = b.rowwise() - a.row(i);
    nn::KinkRecorder::record(diff);
    d.row(i) = diff.cwiseAbs().rowwise().sum().transpose();
  }
  return d;
}

double warped_log_similarity(const Matrix& ctx_a, const Matrix& ctx_b, const Matrix& phi) {
  const Matrix d = pairwise_l1(ctx_a, ctx_b);
  const double n = static_cast<double>(ctx_a.rows() * ctx_b.rows());
  return -(d.array() * phi.array()).sum() / n;
}

double siamese_log_similarity(const Matrix& ctx_a, const Matrix& ctx_b) {
  if (ctx_a.rows() != ctx_b.rows()) {
    throw std::invalid_argument("siamese similarity needs equal encoded lengths");
  }
  if (ctx_a.cols() != ctx_b.cols()) throw std::invalid_argument("context width mismatch");
  return -(ctx_a - ctx_b).cwiseAbs().sum() / static_cast<double>(ctx_a.rows());
}

double pair_nll(double log_s, int target) {
  if (target == 1) return -log_s;
  const double complement = -std::expm1(log_s);
  nn::KinkRecorder::record(complement - kMinComplement);
  return -std::log(std::max(complement, kMinComplement));
}

double pair_nll_grad(double log_s, int target) {
  if (target == 1) return -1.0;
  const double complement = -std::expm1(log_s);
  if (complement <= kMinComplement) return 0.0;
  return std::exp(log_s) / complement;
}

SimilarityModel::SimilarityModel(const ModelConfig& config, Rng& init_rng) : config_(config) {
  encoder_ = Encoder(config_.encoder, store_, init_rng);
  if (warped()) warper_ = Warper(config_.warper, encoder_.context_width(), store_, init_rng);
}

SimilarityScore SimilarityModel::score(const TimeSeries& a, const TimeSeries& b) const {
  return score_encoded(encode(a), encode(b));
}

SimilarityScore SimilarityModel::score_encoded(const Matrix& ctx_a, const Matrix& ctx_b) const {
  if (!warped()) return SimilarityScore::from_log(siamese_log_similarity(ctx_a, ctx_b));
  const Matrix phi = warper_.all_pairs(store_, ctx_a, ctx_b);
  return SimilarityScore::from_log(warped_log_similarity(ctx_a, ctx_b, phi));
}

LossResult SimilarityModel::pair_loss(const Dataset& data, const PairBatch& batch, nn::Mode mode,
                                      Rng* dropout_rng, bool compute_grads, bool commit_stats) {
  if (batch.pairs.empty()) throw std::invalid_argument("pair loss needs a non-empty batch");
  const double n_pos = static_cast<double>(batch.positives());
  const double n_neg = static_cast<double>(batch.negatives());

  nn::SeqBatch inputs;
  inputs.reserve(2 * batch.pairs.size());
  for (const auto& p : batch.pairs) {
    inputs.push_back(data.instances.at(p.first).values());
    inputs.push_back(data.instances.at(p.second).values());
  }
  Encoder::Tape tape;
  const nn::SeqBatch ctx = encoder_.forward(store_, inputs, mode, dropout_rng,
                                            compute_grads || commit_stats ? &tape : nullptr);

  nn::SeqBatch grad_ctx;
  if (compute_grads) {
    grad_ctx.reserve(ctx.size());
    for (const auto& c : ctx) grad_ctx.push_back(Matrix::Zero(c.rows(), c.cols()));
  }

  LossResult result;
  for (std::size_t k = 0; k < batch.pairs.size(); ++k) {
    const int target = batch.pairs[k].target;
    const double weight = target == 1 ? 1.0 / n_pos : 1.0 / n_neg;
    const Matrix& a = ctx[2 * k];
    const Matrix& b = ctx[2 * k + 1];

    double log_s;
    Warper::PairCache cache;
    Matrix phi;
    Matrix d;
    if (warped()) {
      phi = warper_.all_pairs(store_, a, b, compute_grads ? &cache : nullptr);
      d = pairwise_l1(a, b);
      log_s = -(d.array() * phi.array()).sum() / static_cast<double>(a.rows() * b.rows());
    } else {
      log_s = siamese_log_similarity(a, b);
    }
    result.loss += weight * pair_nll(log_s, target);
    if (target == 0 && -std::expm1(log_s) < kMinComplement) ++result.saturated_negatives;
    (target == 1 ? result.mean_positive_s : result.mean_negative_s) += weight * std::exp(log_s);

    if (!compute_grads) continue;
    const double g = weight * pair_nll_grad(log_s, target);
    if (g == 0.0) continue;
    Matrix& ga = grad_ctx[2 * k];
    Matrix& gb = grad_ctx[2 * k + 1];
    if (warped()) {
      const double n = static_cast<double>(a.rows() * b.rows());
      // log_s = -(1/n) sum d .* phi
      const Matrix grad_phi = (-g / n) * d;
      const Matrix grad_d = (-g / n) * phi;
      pairwise_l1_backward(a, b, grad_d, ga, gb);
      warper_.backward_all_pairs(store_, grad_phi, cache, ga, gb);
    } else {
      const double n = static_cast<double>(a.rows());
      const Matrix sign = (a - b).array().sign().matrix();
      ga += (-g / n) * sign;
      gb -= (-g / n) * sign;
    }
  }

  if (compute_grads) encoder_.backward(store_, grad_ctx, tape);
  if (commit_stats) encoder_.commit(store_, tape);
  return result;
}

std::string SimilarityModel::config_json() const {
  nlohmann::json j = to_json(config_);
  j["model"] = "similarity";
  return j.dump();
}

void SimilarityModel::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(path, store_, config_json());
}

SimilarityModel SimilarityModel::load(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ck.config);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  if (j.value("model", std::string()) != "similarity") {
    throw FormatError("checkpoint does not hold a similarity model");
  }
  Rng scratch(0);
  SimilarityModel model(model_from_json(j), scratch);
  nn::apply_checkpoint(ck, model.store_);
  return model;
}

}  // namespace neuralwarp::model
