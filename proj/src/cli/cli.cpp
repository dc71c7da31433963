#include "neuralwarp/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "neuralwarp/errors.hpp"
#include "neuralwarp/eval.hpp"
#include "neuralwarp/model/gradient_check.hpp"
#include "neuralwarp/model/trainer.hpp"
#include "neuralwarp/series.hpp"

namespace neuralwarp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kConfigFile = "config.json";
constexpr double kGradTolerance = 1e-3;

class CheckFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string exact(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string absolute_path(const std::string& p) { return fs::absolute(fs::path(p)).lexically_normal().string(); }

// Fully resolved argument vector, recorded next to every run's outputs.
class Resolved {
 public:
  explicit Resolved(std::string command) { argv_.push_back(std::move(command)); }
  void add(const std::string& flag, const std::string& value) {
    argv_.push_back("--" + flag);
    argv_.push_back(value);
  }
  void add(const std::string& flag, double value) { add(flag, exact(value)); }
  void add(const std::string& flag, std::uint64_t value) { add(flag, std::to_string(value)); }
  void add(const std::string& flag, std::optional<std::size_t> value) {
    if (value) add(flag, static_cast<std::uint64_t>(*value));
  }
  void flag(const std::string& name, bool on) {
    if (on) argv_.push_back("--" + name);
  }
  void write(const fs::path& dir) const {
    json j;
    j["command"] = argv_.front();
    j["argv"] = argv_;
    std::ofstream f(dir / kConfigFile);
    if (!f) throw FormatError("cannot write '" + (dir / kConfigFile).string() + "'");
    f << j.dump(2) << '\n';
  }

 private:
  std::vector<std::string> argv_;
};

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// Measures

struct MeasureSpec {
  enum class Kind { Dtw, Twed, Euclidean, Learned } kind = Kind::Dtw;
  model::EncoderKind encoder = model::EncoderKind::Rnn;
  model::SimilarityKind similarity = model::SimilarityKind::Warped;
};

const std::vector<std::string>& measure_names() {
  static const std::vector<std::string> names{"dtw",           "twed",          "euclidean",
                                              "siamese-cnn",   "siamese-rnn",   "neuralwarp-cnn",
                                              "neuralwarp-rnn"};
  return names;
}

MeasureSpec parse_measure(const std::string& name) {
  MeasureSpec m;
  if (name == "dtw") return m;
  if (name == "twed") { m.kind = MeasureSpec::Kind::Twed; return m; }
  if (name == "euclidean") { m.kind = MeasureSpec::Kind::Euclidean; return m; }
  const auto dash = name.find('-');
  if (dash != std::string::npos) {
    const std::string family = name.substr(0, dash);
    const std::string enc = name.substr(dash + 1);
    if ((family == "siamese" || family == "neuralwarp") && (enc == "cnn" || enc == "rnn")) {
      m.kind = MeasureSpec::Kind::Learned;
      m.encoder = model::parse_encoder_kind(enc);
      m.similarity = family == "siamese" ? model::SimilarityKind::Siamese : model::SimilarityKind::Warped;
      return m;
    }
  }
  throw UsageError("unknown measure '" + name + "'");
}

struct MeasureFlags {
  std::string measure;
  std::string checkpoint;
  std::optional<std::size_t> band;
  bool symmetrize = false;
  double stiffness = 0.001;
  double penalty = 1.0;
  unsigned jobs = 1;
};

std::unique_ptr<Measure> make_measure(const MeasureFlags& f, std::size_t channels) {
  const MeasureSpec spec = parse_measure(f.measure);
  switch (spec.kind) {
    case MeasureSpec::Kind::Dtw: return std::make_unique<DtwMeasure>(f.band);
    case MeasureSpec::Kind::Twed: return std::make_unique<TwedMeasure>(f.stiffness, f.penalty);
    case MeasureSpec::Kind::Euclidean: return std::make_unique<EuclideanMeasure>();
    case MeasureSpec::Kind::Learned: break;
  }
  if (f.checkpoint.empty()) throw UsageError("measure '" + f.measure + "' needs --checkpoint");
  auto model = std::make_shared<const model::SimilarityModel>(model::SimilarityModel::load(f.checkpoint));
  const auto& cfg = model->config();
  if (cfg.encoder.kind != spec.encoder || cfg.similarity != spec.similarity) {
    const std::string held = std::string(cfg.similarity == model::SimilarityKind::Siamese ? "siamese-" : "neuralwarp-") +
                             model::encoder_kind_name(cfg.encoder.kind);
    throw UsageError("checkpoint holds a " + held + " model, not " + f.measure);
  }
  if (cfg.encoder.input_channels != channels) {
    throw ConfigError("checkpoint expects " + std::to_string(cfg.encoder.input_channels) +
                      " channels, data has " + std::to_string(channels));
  }
  LearnedMeasure::Options opts;
  opts.symmetrize = f.symmetrize;
  return std::make_unique<LearnedMeasure>(std::move(model), f.measure, opts);
}

void add_measure_flags(CLI::App* cmd, MeasureFlags& f) {
  cmd->add_option("--measure", f.measure, "Similarity or distance measure")
      ->required()
      ->check(CLI::IsMember(measure_names()));
  cmd->add_option("--checkpoint", f.checkpoint, "Trained model for learned measures");
  cmd->add_option("--band", f.band, "Sakoe-Chiba radius for dtw");
  cmd->add_flag("--symmetrize", f.symmetrize, "Average s(A,B) and s(B,A) for learned measures");
  cmd->add_option("--twed-stiffness", f.stiffness, "TWED stiffness nu")->capture_default_str();
  cmd->add_option("--twed-penalty", f.penalty, "TWED deletion penalty lambda")->capture_default_str();
  cmd->add_option("--jobs", f.jobs, "Worker threads for scoring")->capture_default_str()->check(CLI::PositiveNumber);
}

void record_measure(Resolved& r, const MeasureFlags& f) {
  r.add("measure", f.measure);
  if (!f.checkpoint.empty()) r.add("checkpoint", absolute_path(f.checkpoint));
  r.add("band", f.band);
  r.flag("symmetrize", f.symmetrize);
  r.add("twed-stiffness", f.stiffness);
  r.add("twed-penalty", f.penalty);
  r.add("jobs", static_cast<std::uint64_t>(f.jobs));
}

// ---------------------------------------------------------------------------
// Data loading

struct DataFlags {
  std::string format = "mts-v1";
  std::optional<std::size_t> pad_to;
  std::optional<std::size_t> truncate;
  bool normalize = false;
};

void add_data_flags(CLI::App* cmd, DataFlags& f) {
  cmd->add_option("--format", f.format, "Dataset format")
      ->capture_default_str()
      ->check(CLI::IsMember({"mts-v1", "ucr-tsv"}));
  auto* pad = cmd->add_option("--pad-to", f.pad_to, "Zero-pad ragged series to this length (0 = longest)");
  auto* trunc = cmd->add_option("--truncate", f.truncate, "Cut series to this length");
  pad->excludes(trunc);
  cmd->add_flag("--normalize", f.normalize, "Z-normalize each series per channel");
}

void record_data(Resolved& r, const DataFlags& f) {
  r.add("format", f.format);
  r.add("pad-to", f.pad_to);
  r.add("truncate", f.truncate);
  r.flag("normalize", f.normalize);
}

Dataset load(const std::string& path, const DataFlags& f, const std::vector<long>& class_names = {}) {
  LoadOptions opts;
  opts.pad_to = f.pad_to;
  opts.truncate = f.truncate;
  opts.class_names = class_names;
  Dataset ds = load_dataset(path, parse_format(f.format), opts);
  return f.normalize ? znormalize(ds) : ds;
}

// ---------------------------------------------------------------------------
// Commands

struct GenFlags {
  int classes = 2;
  std::size_t per_class = 20;
  std::size_t len = 64;
  std::size_t channels = 1;
  std::size_t shift = 8;
  double warp = 0.2;
  double noise = 0.1;
  std::uint64_t seed = 0;
  double test_fraction = 0.1;
  std::string out;
};

void cmd_gen(const GenFlags& f, std::ostream& out) {
  SyntheticSpec spec;
  spec.num_classes = f.classes;
  spec.instances_per_class = f.per_class;
  spec.length = f.len;
  spec.channels = f.channels;
  spec.shift_range = f.shift;
  spec.warp_strength = f.warp;
  spec.noise_sigma = f.noise;
  Rng rng = derive_stream(f.seed, "gen");
  const Dataset ds = gen_synthetic(spec, rng);
  const auto [train, test] = split(ds, f.test_fraction, f.seed);

  const fs::path dir = prepare_out(f.out);
  save_mts(ds, dir / "data.mts");
  save_mts(train, dir / "train.mts");
  save_mts(test, dir / "test.mts");

  Resolved r("gen");
  r.add("classes", static_cast<std::uint64_t>(f.classes));
  r.add("per-class", static_cast<std::uint64_t>(f.per_class));
  r.add("len", static_cast<std::uint64_t>(f.len));
  r.add("channels", static_cast<std::uint64_t>(f.channels));
  r.add("shift", static_cast<std::uint64_t>(f.shift));
  r.add("warp", f.warp);
  r.add("noise", f.noise);
  r.add("seed", f.seed);
  r.add("test-fraction", f.test_fraction);
  r.add("out", absolute_path(f.out));
  r.write(dir);
  out << "wrote " << ds.size() << " series (" << train.size() << " train, " << test.size() << " test) to "
      << dir.string() << '\n';
}

struct TrainFlags {
  std::string data;
  DataFlags data_flags;
  std::string measure = "neuralwarp-rnn";
  std::string scale = "desk";
  std::size_t iters = 10000;
  std::size_t batch_pairs = 30;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t log_every = 1000;
  std::string out;
};

void cmd_train(const TrainFlags& f, std::ostream& out, std::ostream& err) {
  const MeasureSpec spec = parse_measure(f.measure);
  if (spec.kind != MeasureSpec::Kind::Learned) {
    throw UsageError("measure '" + f.measure + "' is non-parametric and takes no training");
  }
  if (f.batch_pairs < 2 || f.batch_pairs % 2 != 0) {
    throw UsageError("--batch-pairs must be a positive even number (half positive, half negative)");
  }
  if (!(f.lr > 0.0)) throw UsageError("--lr must be positive");

  const Dataset train = load(f.data, f.data_flags);
  const model::ModelConfig config =
      model::make_model_config(spec.encoder, spec.similarity, model::parse_scale(f.scale), train.channels);

  model::TrainOptions opts;
  opts.iterations = f.iters;
  opts.pairs_per_side = f.batch_pairs / 2;
  opts.learning_rate = f.lr;
  opts.seed = f.seed;
  opts.log_every = f.log_every;
  opts.on_log = [&out](const model::TraceRow& row) {
    out << "iteration " << row.iteration << " loss " << row.loss << " smoothed " << row.smoothed << '\n';
  };
  opts.on_restart = [&err](const std::string& why, double lr) {
    err << "warning: divergence: " << why << "; restarting with learning rate " << lr << '\n';
  };
  const model::TrainResult result = model::train(train, config, opts);

  const fs::path dir = prepare_out(f.out);
  result.model.save(dir / "model.ckpt");
  {
    std::ofstream csv(dir / "loss.csv");
    if (!csv) throw FormatError("cannot write '" + (dir / "loss.csv").string() + "'");
    model::write_trace_csv(result.trace, csv);
  }
  Resolved r("train");
  r.add("data", absolute_path(f.data));
  record_data(r, f.data_flags);
  r.add("measure", f.measure);
  r.add("scale", f.scale);
  r.add("iters", static_cast<std::uint64_t>(f.iters));
  r.add("batch-pairs", static_cast<std::uint64_t>(f.batch_pairs));
  r.add("lr", f.lr);
  r.add("seed", f.seed);
  r.add("log-every", static_cast<std::uint64_t>(f.log_every));
  r.add("out", absolute_path(f.out));
  r.write(dir);

  out << "trained " << f.measure << " iterations " << result.trace.size() << " restarts " << result.restarts
      << " learning_rate " << result.learning_rate;
  if (!result.trace.empty()) out << " final_smoothed " << result.trace.back().smoothed;
  out << '\n';
}

struct EvalFlags {
  std::string train_data;
  std::string test_data;
  std::string dataset;
  DataFlags data_flags;
  MeasureFlags measure;
  std::string out;
};

void cmd_eval(const EvalFlags& f, std::ostream& out) {
  parse_measure(f.measure.measure);
  const Dataset train = load(f.train_data, f.data_flags);
  const Dataset test = load(f.test_data, f.data_flags, train.class_names);
  const auto measure = make_measure(f.measure, train.channels);
  const ClassificationResult result = nn_classify(train, test, *measure, f.measure.jobs);
  const std::string name = f.dataset.empty() ? fs::path(f.test_data).stem().string() : f.dataset;

  const fs::path dir = prepare_out(f.out);
  {
    std::ofstream csv(dir / "accuracy.csv");
    if (!csv) throw FormatError("cannot write '" + (dir / "accuracy.csv").string() + "'");
    write_accuracy_line(csv, measure->name(), name, train.size(), test.size(), result.accuracy);
  }
  Resolved r("eval");
  r.add("train-data", absolute_path(f.train_data));
  r.add("test-data", absolute_path(f.test_data));
  r.add("dataset", name);
  record_data(r, f.data_flags);
  record_measure(r, f.measure);
  r.add("out", absolute_path(f.out));
  r.write(dir);
  write_accuracy_line(out, measure->name(), name, train.size(), test.size(), result.accuracy);
}

struct DistFlags {
  std::string data;
  DataFlags data_flags;
  MeasureFlags measure;
  std::string out;
};

void cmd_dist(const DistFlags& f, std::ostream& out) {
  parse_measure(f.measure.measure);
  const Dataset set = load(f.data, f.data_flags);
  const auto measure = make_measure(f.measure, set.channels);
  const DistanceMatrix matrix = distance_matrix(set, *measure, f.measure.jobs);

  const fs::path dir = prepare_out(f.out);
  save_csv(as_distances(matrix), dir / "dist.csv");
  Resolved r("dist");
  r.add("data", absolute_path(f.data));
  record_data(r, f.data_flags);
  record_measure(r, f.measure);
  r.add("out", absolute_path(f.out));
  r.write(dir);
  out << "wrote " << set.size() << "x" << set.size() << " " << measure->name() << " distances to "
      << (dir / "dist.csv").string() << '\n';
}

struct GradcheckFlags {
  std::string scale = "desk";
  std::string encoder = "both";
  std::string similarity = "neuralwarp";
  std::size_t len = 8;
  std::uint64_t seed = 0;
};

void cmd_gradcheck(const GradcheckFlags& f, std::ostream& out) {
  std::vector<model::EncoderKind> kinds;
  if (f.encoder == "both" || f.encoder == "cnn") kinds.push_back(model::EncoderKind::Cnn);
  if (f.encoder == "both" || f.encoder == "rnn") kinds.push_back(model::EncoderKind::Rnn);
  const auto similarity = f.similarity == "siamese" ? model::SimilarityKind::Siamese : model::SimilarityKind::Warped;

  double worst = 0.0;
  for (auto kind : kinds) {
    const auto config = model::make_model_config(kind, similarity, model::parse_scale(f.scale), 1);
    model::PairLossCheckOptions opts;
    opts.length = f.len;
    opts.seed = f.seed;
    const nn::GradCheckReport report = model::check_pair_loss_gradients(config, opts);
    worst = std::max(worst, report.max_relative_error);
    out << "gradcheck " << f.similarity << '-' << model::encoder_kind_name(kind) << " scale " << f.scale
        << " checked " << report.checked << " skipped_at_kinks " << report.skipped << " max_relative_error "
        << report.max_relative_error << " worst " << report.worst << " analytic " << report.worst_analytic
        << " numeric " << report.worst_numeric << ' ' << (report.max_relative_error < kGradTolerance ? "PASS" : "FAIL") << '\n';
  }
  if (!(worst < kGradTolerance)) {
    std::ostringstream msg;
    msg << "max relative error " << worst << " is not below " << kGradTolerance;
    throw CheckFailed(msg.str());
  }
}

// ---------------------------------------------------------------------------

struct Failure {
  std::string kind;
  int code;
};

std::string one_line(std::string msg) {
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  return msg;
}

int run_parsed(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth);

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth) {
  CLI::App app{"Elastic and learned time-series similarity", "neuralwarp"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  GenFlags gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic labeled dataset (mts-v1)");
  g->add_option("--classes", gen.classes, "Number of classes")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--per-class", gen.per_class, "Instances per class")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--len", gen.len, "Series length T")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--channels", gen.channels, "Channels D")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--shift", gen.shift, "Maximum circular shift")->capture_default_str();
  g->add_option("--warp", gen.warp, "Time-warp strength in [0, 1)")->capture_default_str()->check(CLI::Range(0.0, 0.999999));
  g->add_option("--noise", gen.noise, "Gaussian noise sigma")->capture_default_str()->check(CLI::NonNegativeNumber);
  g->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  g->add_option("--test-fraction", gen.test_fraction, "Stratified test share for train/test files")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.999999));
  g->add_option("--out", gen.out, "Output directory")->required();

  TrainFlags train;
  auto* t = app.add_subcommand("train", "Train a learned similarity measure");
  t->add_option("--data", train.data, "Training dataset")->required();
  add_data_flags(t, train.data_flags);
  t->add_option("--measure", train.measure, "Measure to train")
      ->capture_default_str()
      ->check(CLI::IsMember(measure_names()));
  t->add_option("--scale", train.scale, "Architecture scale")->capture_default_str()->check(CLI::IsMember({"desk", "paper"}));
  t->add_option("--iters", train.iters, "Training batches")->capture_default_str();
  t->add_option("--batch-pairs", train.batch_pairs, "Pairs per batch, half positive and half negative")->capture_default_str();
  t->add_option("--lr", train.lr, "Initial Adam learning rate")->capture_default_str();
  t->add_option("--seed", train.seed, "Random seed")->capture_default_str();
  t->add_option("--log-every", train.log_every, "Progress line interval (0 = quiet)")->capture_default_str();
  t->add_option("--out", train.out, "Output directory")->required();

  EvalFlags eval;
  auto* e = app.add_subcommand("eval", "1-NN accuracy of a measure");
  e->add_option("--train-data", eval.train_data, "Reference (training) set")->required();
  e->add_option("--test-data", eval.test_data, "Query (test) set")->required();
  e->add_option("--dataset", eval.dataset, "Dataset name in the report (default: test file stem)");
  add_data_flags(e, eval.data_flags);
  add_measure_flags(e, eval.measure);
  e->add_option("--out", eval.out, "Output directory")->required();

  DistFlags dist;
  auto* d = app.add_subcommand("dist", "Pairwise distance matrix of a set");
  d->add_option("--data", dist.data, "Dataset")->required();
  add_data_flags(d, dist.data_flags);
  add_measure_flags(d, dist.measure);
  d->add_option("--out", dist.out, "Output directory")->required();

  GradcheckFlags grad;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full pair loss");
  gc->add_option("--scale", grad.scale, "Architecture scale")->capture_default_str()->check(CLI::IsMember({"desk", "paper"}));
  gc->add_option("--encoder", grad.encoder, "Encoder kind")->capture_default_str()->check(CLI::IsMember({"cnn", "rnn", "both"}));
  gc->add_option("--similarity", grad.similarity, "Similarity kind")
      ->capture_default_str()
      ->check(CLI::IsMember({"neuralwarp", "siamese"}));
  gc->add_option("--len", grad.len, "Series length")->capture_default_str()->check(CLI::PositiveNumber);
  gc->add_option("--seed", grad.seed, "Random seed")->capture_default_str();

  std::string rerun_config;
  std::string rerun_out;
  auto* rr = app.add_subcommand("rerun", "Re-execute a run from its resolved config file");
  rr->add_option("--config", rerun_config, "Resolved config.json of an earlier run")->required()->check(CLI::ExistingFile);
  rr->add_option("--out", rerun_out, "Replace the recorded output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    throw UsageError(ex.what());
  }

  if (*g) cmd_gen(gen, out);
  if (*t) cmd_train(train, out, err);
  if (*e) cmd_eval(eval, out);
  if (*d) cmd_dist(dist, out);
  if (*gc) cmd_gradcheck(grad, out);
  if (*rr) {
    if (depth > 0) throw UsageError("a resolved config cannot itself be a rerun");
    std::ifstream f(rerun_config);
    json j;
    try {
      j = json::parse(f);
    } catch (const json::exception& ex) {
      throw FormatError(std::string("resolved config is not valid JSON: ") + ex.what());
    }
    if (!j.contains("argv") || !j["argv"].is_array()) throw FormatError("resolved config has no argv array");
    auto argv = j["argv"].get<std::vector<std::string>>();
    if (!rerun_out.empty()) {
      const auto it = std::find(argv.begin(), argv.end(), "--out");
      if (it == argv.end() || it + 1 == argv.end()) throw FormatError("resolved config has no --out");
      *(it + 1) = rerun_out;
    }
    return run_parsed(argv, out, err, depth + 1);
  }
  return kOk;
}

int run_parsed(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth) {
  Failure failure{"runtime", kFailure};
  std::string message;
  try {
    return dispatch(args, out, err, depth);
  } catch (const UsageError& ex) {
    failure = {"usage", kUsage};
    message = ex.what();
  } catch (const ConfigError& ex) {
    failure = {"config", kUsage};
    message = ex.what();
  } catch (const ParseError& ex) {
    failure = {"parse", kFailure};
    message = ex.what();
  } catch (const FormatError& ex) {
    failure = {"format", kFailure};
    message = ex.what();
  } catch (const DivergenceError& ex) {
    failure = {"divergence", kFailure};
    message = ex.what();
  } catch (const fs::filesystem_error& ex) {
    failure = {"io", kFailure};
    message = ex.what();
  } catch (const CheckFailed& ex) {
    failure = {"gradcheck", kFailure};
    message = ex.what();
  } catch (const std::exception& ex) {
    message = ex.what();
  }
  err << "error: " << failure.kind << ": " << one_line(message) << '\n';
  return failure.code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return run_parsed(args, out, err, 0);
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace neuralwarp::cli
