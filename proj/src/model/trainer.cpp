#include "neuralwarp/model/trainer.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

#include "neuralwarp/errors.hpp"
#include "neuralwarp/nn/optim.hpp"

namespace neuralwarp::model {

namespace {

struct Attempt {
  SimilarityModel model;
  std::vector<TraceRow> trace;
};

// Runs one optimization from a fresh initialization; throws DivergenceError.
Attempt run_attempt(const Dataset& data, const ModelConfig& config, const TrainOptions& options,
                    double learning_rate) {
  Rng init_rng = derive_stream(options.seed, "init");
  Rng sampling_rng = derive_stream(options.seed, "sampling");
  Rng dropout_rng = derive_stream(options.seed, "dropout");

  Attempt attempt{SimilarityModel(config, init_rng), {}};
  attempt.trace.reserve(options.iterations);
  double window_sum = 0.0;
  double reference = 0.0;
  std::vector<double> losses;
  losses.reserve(options.iterations);

  for (std::size_t it = 1; it <= options.iterations; ++it) {
    const PairBatch batch = sample_pair_batch(data, options.pairs_per_side, sampling_rng);
    auto& store = attempt.model.params();
    store.zero_grad();
    const LossResult r = attempt.model.pair_loss(data, batch, nn::Mode::Train, &dropout_rng, true, true);
    if (!std::isfinite(r.loss)) {
      throw DivergenceError("non-finite loss at iteration " + std::to_string(it));
    }
    if (r.saturated_negatives > 0) {
      throw DivergenceError("negative pair scored s = 1 within rounding (loss of 1 - s is infinite) at iteration " +
                            std::to_string(it));
    }
    nn::clip_gradients(store, options.clip);
    nn::adam_step(store, learning_rate);
    if (!store.all_finite()) {
      throw DivergenceError("non-finite parameters after iteration " + std::to_string(it));
    }

    losses.push_back(r.loss);
    window_sum += r.loss;
    if (losses.size() > options.smoothing_window) window_sum -= losses[losses.size() - 1 - options.smoothing_window];
    const std::size_t count = std::min(losses.size(), options.smoothing_window);
    const TraceRow row{it, r.loss, window_sum / static_cast<double>(count)};
    attempt.trace.push_back(row);

    if (it == options.smoothing_window) reference = row.smoothed;
    if (reference > 0.0 && it > options.smoothing_window &&
        row.smoothed > options.divergence_factor * reference) {
      std::ostringstream msg;
      msg << "smoothed loss " << row.smoothed << " exceeded " << options.divergence_factor
          << "x its initial value " << reference << " at iteration " << it;
      throw DivergenceError(msg.str());
    }
    if (options.on_log && options.log_every > 0 && it % options.log_every == 0) options.on_log(row);
  }
  return attempt;
}

}  // namespace

TrainResult train(const Dataset& train_set, const ModelConfig& config, const TrainOptions& options) {
  if (!(options.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (options.pairs_per_side == 0) throw ConfigError("pairs per side must be positive");
  if (options.smoothing_window == 0) throw ConfigError("smoothing window must be positive");
  if (train_set.channels != config.encoder.input_channels) {
    throw ConfigError("dataset has " + std::to_string(train_set.channels) +
                      " channels, encoder expects " + std::to_string(config.encoder.input_channels));
  }
  if (options.iterations > 0) {
    Rng probe(0);
    sample_pair_batch(train_set, 1, probe);  // fail early if pairs cannot be formed
  }

  double lr = options.learning_rate;
  for (int restarts = 0;; ++restarts) {
    try {
      Attempt a = run_attempt(train_set, config, options, lr);
      return TrainResult{std::move(a.model), std::move(a.trace), lr, restarts};
    } catch (const DivergenceError& e) {
      if (restarts >= 1) {
        std::ostringstream msg;
        msg << "training diverged twice (last learning rate " << lr << "): " << e.what();
        throw DivergenceError(msg.str());
      }
      lr /= 10.0;
      if (options.on_restart) options.on_restart(e.what(), lr);
    }
  }
}

std::vector<double> smooth(const std::vector<double>& losses, std::size_t window) {
  std::vector<double> out;
  out.reserve(losses.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    sum += losses[i];
    if (i >= window) sum -= losses[i - window];
    out.push_back(sum / static_cast<double>(std::min(i + 1, window)));
  }
  return out;
}

void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& out, std::size_t every) {
  auto put = [&out](double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, ptr - buf);
  };
  out << "iteration,loss,smoothed\n";
  if (every == 0) every = 1;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].iteration % every != 0 && i + 1 != trace.size()) continue;
    out << trace[i].iteration << ',';
    put(trace[i].loss);
    out << ',';
    put(trace[i].smoothed);
    out << '\n';
  }
}

}  // namespace neuralwarp::model
