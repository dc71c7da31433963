#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "neuralwarp/model/similarity.hpp"

namespace neuralwarp::model {

struct TraceRow {
  std::size_t iteration = 0;  ///< 1-based
  double loss = 0.0;
  double smoothed = 0.0;      ///< trailing mean over the last `smoothing_window` losses
};

struct TrainOptions {
  std::size_t iterations = 10000;
  std::size_t pairs_per_side = 15;  ///< K positives and K negatives per batch
  double learning_rate = 1e-3;
  double clip = 10.0;
  std::uint64_t seed = 0;
  std::size_t smoothing_window = 100;
  /// A smoothed loss above this multiple of the first full-window smoothed
  /// loss counts as divergence, as do a non-finite loss or parameter and a
  /// negative pair whose 1 - s underflows the loss floor.
  double divergence_factor = 10.0;
  /// Called every `log_every` iterations (0 disables).
  std::size_t log_every = 0;
  std::function<void(const TraceRow&)> on_log;
  /// Called before a restart with the reason and the new learning rate.
  std::function<void(const std::string&, double)> on_restart;
};

struct TrainResult {
  SimilarityModel model;
  std::vector<TraceRow> trace;
  double learning_rate = 0.0;  ///< rate of the run that produced `model`
  int restarts = 0;
};

/// Pair-sampling SGD with Adam: sample K positive and K negative pairs, take
/// the mean pair loss, clip gradients element-wise, update encoder and warper
/// jointly. On divergence the run restarts once from scratch at a tenth of
/// the learning rate; a second divergence throws DivergenceError.
/// Random streams "init", "sampling" and "dropout" derive from options.seed.
TrainResult train(const Dataset& train_set, const ModelConfig& config, const TrainOptions& options);

/// Trailing means of `losses` with the given window.
std::vector<double> smooth(const std::vector<double>& losses, std::size_t window);

/// "iteration,loss,smoothed" rows with round-trip precision, every `every`-th row plus the last.
void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& out, std::size_t every = 1);

}  // namespace neuralwarp::model
