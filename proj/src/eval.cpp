#include "neuralwarp/eval.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <thread>

#include "neuralwarp/elastic.hpp"
#include "neuralwarp/errors.hpp"

namespace neuralwarp {

namespace {

// Calls fn(row) for every row in [0, rows), split into contiguous blocks per thread.
template <typename Fn>
void for_rows(std::size_t rows, unsigned jobs, Fn fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(jobs, rows));
  if (workers == 1) {
    for (std::size_t r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (rows + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        const std::size_t end = std::min(rows, (w + 1) * chunk);
        for (std::size_t r = w * chunk; r < end; ++r) fn(r);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::string semantics_name(Semantics semantics) {
  return semantics == Semantics::Distance ? "distance" : "similarity";
}

Matrix Measure::score_matrix(const std::vector<TimeSeries>& queries, const std::vector<TimeSeries>& refs,
                             unsigned jobs) const {
  Matrix out(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(refs.size()));
  for_rows(queries.size(), jobs, [&](std::size_t r) {
    for (std::size_t c = 0; c < refs.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = score(queries[r], refs[c]);
    }
  });
  return out;
}

double DtwMeasure::score(const TimeSeries& a, const TimeSeries& b) const {
  return dtw_distance(a, b, band_);
}

TwedMeasure::TwedMeasure(double stiffness, double penalty) : stiffness_(stiffness), penalty_(penalty) {
  if (stiffness < 0.0 || penalty < 0.0) throw ConfigError("TWED parameters must be non-negative");
}

double TwedMeasure::score(const TimeSeries& a, const TimeSeries& b) const {
  return twed(a, b, stiffness_, penalty_);
}

double EuclideanMeasure::score(const TimeSeries& a, const TimeSeries& b) const { return euclidean(a, b); }

LearnedMeasure::LearnedMeasure(std::shared_ptr<const model::SimilarityModel> model, std::string name)
    : LearnedMeasure(std::move(model), std::move(name), Options{}) {}

LearnedMeasure::LearnedMeasure(std::shared_ptr<const model::SimilarityModel> model, std::string name,
                               Options options)
    : model_(std::move(model)), name_(std::move(name)), options_(options) {
  if (!model_) throw ConfigError("learned measure needs a model");
}

double LearnedMeasure::combine(const Matrix& ea, const Matrix& eb) const {
  const double forward = model_->score_encoded(ea, eb).log_s;
  if (!options_.symmetrize) return options_.log_scale ? forward : std::exp(forward);
  const double backward = model_->score_encoded(eb, ea).log_s;
  if (options_.log_scale) return std::log((std::exp(forward) + std::exp(backward)) / 2.0);
  return (std::exp(forward) + std::exp(backward)) / 2.0;
}

double LearnedMeasure::score(const TimeSeries& a, const TimeSeries& b) const {
  return combine(model_->encode(a), model_->encode(b));
}

Matrix LearnedMeasure::score_matrix(const std::vector<TimeSeries>& queries,
                                    const std::vector<TimeSeries>& refs, unsigned jobs) const {
  std::vector<Matrix> eq(queries.size());
  std::vector<Matrix> er(refs.size());
  for_rows(queries.size(), jobs, [&](std::size_t i) { eq[i] = model_->encode(queries[i]); });
  for_rows(refs.size(), jobs, [&](std::size_t i) { er[i] = model_->encode(refs[i]); });
  Matrix out(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(refs.size()));
  for_rows(queries.size(), jobs, [&](std::size_t r) {
    for (std::size_t c = 0; c < refs.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = combine(eq[r], er[c]);
    }
  });
  return out;
}

std::size_t best_neighbor(const Eigen::Ref<const RowVector>& scores, Semantics semantics) {
  std::size_t best = 0;
  for (Eigen::Index j = 1; j < scores.size(); ++j) {
    const bool better = semantics == Semantics::Distance ? scores(j) < scores(static_cast<Eigen::Index>(best))
                                                         : scores(j) > scores(static_cast<Eigen::Index>(best));
    if (better) best = static_cast<std::size_t>(j);
  }
  return best;
}

ClassificationResult nn_classify(const Matrix& scores, Semantics semantics, const Dataset& train,
                                 const Dataset& test) {
  if (train.size() == 0) throw ConfigError("1-NN classification needs a non-empty train set");
  if (scores.rows() != static_cast<Eigen::Index>(test.size()) ||
      scores.cols() != static_cast<Eigen::Index>(train.size())) {
    throw std::invalid_argument("score matrix shape does not match test x train");
  }
  ClassificationResult result;
  result.predictions.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::size_t nb = best_neighbor(scores.row(static_cast<Eigen::Index>(i)), semantics);
    const int predicted = train.instances[nb].label().value_or(-1);
    result.predictions.push_back(predicted);
    if (test.instances[i].label() && *test.instances[i].label() == predicted) ++result.correct;
  }
  result.accuracy = test.size() == 0 ? 0.0
                                     : static_cast<double>(result.correct) / static_cast<double>(test.size());
  return result;
}

ClassificationResult nn_classify(const Dataset& train, const Dataset& test, const Measure& measure,
                                 unsigned jobs) {
  if (train.size() == 0) throw ConfigError("1-NN classification needs a non-empty train set");
  if (test.size() > 0 && train.channels != test.channels) {
    throw ConfigError("train and test sets have different channel counts");
  }
  const Matrix scores = measure.score_matrix(test.instances, train.instances, jobs);
  return nn_classify(scores, measure.semantics(), train, test);
}

DistanceMatrix distance_matrix(const Dataset& set, const Measure& measure, unsigned jobs) {
  return DistanceMatrix{measure.score_matrix(set.instances, set.instances, jobs), measure.semantics()};
}

Matrix as_distances(const DistanceMatrix& matrix) {
  if (matrix.semantics == Semantics::Distance) return matrix.values;
  return (1.0 - matrix.values.array()).matrix();
}

void write_accuracy_line(std::ostream& out, const std::string& measure, const std::string& dataset,
                         std::size_t n_train, std::size_t n_test, double accuracy) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), accuracy);
  out << measure << ',' << dataset << ',' << n_train << ',' << n_test << ',' << std::string(buf, ptr) << '\n';
}

}  // namespace neuralwarp
