#include "neuralwarp/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string_view>

#include "neuralwarp/errors.hpp"

namespace neuralwarp {

TimeSeries::TimeSeries(Matrix values, std::optional<int> label) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw ConfigError("time series needs T >= 1 and D >= 1");
  }
  if (!values_.allFinite()) {
    throw ConfigError("time series contains non-finite values");
  }
  set_label(label);
}

void TimeSeries::set_label(std::optional<int> label) {
  if (label && *label < 0) throw ConfigError("labels must be non-negative");
  label_ = label;
}

TimeSeries TimeSeries::univariate(const std::vector<double>& values, std::optional<int> label) {
  Matrix m(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
  return TimeSeries(std::move(m), label);
}

void Dataset::validate() const {
  if (num_classes < 0 || static_cast<std::size_t>(num_classes) != class_names.size()) {
    throw FormatError("dataset class table does not match num_classes");
  }
  for (std::size_t n = 0; n < instances.size(); ++n) {
    const auto& s = instances[n];
    if (s.length() != length || s.channels() != channels) {
      throw FormatError("instance " + std::to_string(n) + " has shape " +
                        std::to_string(s.length()) + "x" + std::to_string(s.channels()) +
                        ", expected " + std::to_string(length) + "x" + std::to_string(channels));
    }
    if (s.label() && *s.label() >= num_classes) {
      throw FormatError("instance " + std::to_string(n) + " label out of range");
    }
  }
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(instances.size());
  for (const auto& s : instances) out.push_back(s.label().value_or(-1));
  return out;
}

Format parse_format(const std::string& name) {
  if (name == "ucr-tsv") return Format::UcrTsv;
  if (name == "mts-v1") return Format::MtsV1;
  throw ConfigError("unknown dataset format '" + name + "'");
}

std::string format_name(Format format) {
  return format == Format::UcrTsv ? "ucr-tsv" : "mts-v1";
}

namespace {

std::string_view trim_eol(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
  return line;
}

double parse_real(std::string_view token, std::size_t line_no) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw ParseError(line_no, "expected a real number, got '" + std::string(token) + "'");
  }
  if (!std::isfinite(value)) {
    throw ParseError(line_no, "non-finite value '" + std::string(token) + "'");
  }
  return value;
}

long parse_label(std::string_view token, std::size_t line_no) {
  long value = 0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw ParseError(line_no, "expected an integer label, got '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

class LabelMapper {
 public:
  explicit LabelMapper(std::vector<long> seed) : names_(std::move(seed)) {}
  int map(long raw) {
    auto it = std::find(names_.begin(), names_.end(), raw);
    if (it != names_.end()) return static_cast<int>(it - names_.begin());
    names_.push_back(raw);
    return static_cast<int>(names_.size() - 1);
  }
  const std::vector<long>& names() const { return names_; }

 private:
  std::vector<long> names_;
};

struct RawRow {
  long label;
  std::vector<double> values;
  std::size_t line;
};

Dataset read_ucr(std::istream& in, const LoadOptions& options) {
  std::vector<RawRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim_eol(line);
    if (view.empty()) continue;
    auto fields = split_on(view, '\t');
    if (fields.size() < 2) throw ParseError(line_no, "row has a label but no values");
    RawRow row{parse_label(fields[0], line_no), {}, line_no};
    row.values.reserve(fields.size() - 1);
    for (std::size_t f = 1; f < fields.size(); ++f) {
      row.values.push_back(parse_real(fields[f], line_no));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("dataset has no instances");

  std::size_t target = rows.front().values.size();
  if (options.truncate) {
    target = *options.truncate;
    if (target == 0) throw ConfigError("truncate length must be positive");
  } else if (options.pad_to) {
    std::size_t longest = 0;
    for (const auto& r : rows) longest = std::max(longest, r.values.size());
    target = *options.pad_to == 0 ? longest : *options.pad_to;
  }
  for (auto& r : rows) {
    if (r.values.size() == target) continue;
    if (options.truncate && r.values.size() > target) {
      r.values.resize(target);
    } else if (options.pad_to && !options.truncate && r.values.size() < target) {
      r.values.resize(target, 0.0);
    } else {
      throw FormatError("line " + std::to_string(r.line) + ": row has " +
                        std::to_string(r.values.size()) + " values, expected " +
                        std::to_string(target) +
                        (options.pad_to || options.truncate ? "" : " (use --pad-to or --truncate)"));
    }
  }

  LabelMapper mapper(options.class_names);
  Dataset ds;
  ds.length = target;
  ds.channels = 1;
  ds.instances.reserve(rows.size());
  for (const auto& r : rows) {
    ds.instances.push_back(TimeSeries::univariate(r.values, mapper.map(r.label)));
  }
  ds.class_names = mapper.names();
  ds.num_classes = static_cast<int>(ds.class_names.size());
  return ds;
}

Dataset read_mts(std::istream& in, const LoadOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string_view {
    while (std::getline(in, line)) {
      ++line_no;
      auto view = trim_eol(line);
      if (!view.empty()) return view;
    }
    throw ParseError(line_no + 1, "unexpected end of file");
  };

  auto header = split_ws(next_line());
  if (header.size() != 3) throw ParseError(line_no, "header must be 'N T D'");
  const long n = parse_label(header[0], line_no);
  const long t = parse_label(header[1], line_no);
  const long d = parse_label(header[2], line_no);
  if (n < 1 || t < 1 || d < 1) throw ParseError(line_no, "header sizes must be positive");

  std::size_t length = static_cast<std::size_t>(t);
  if (options.truncate) {
    if (*options.truncate == 0 || *options.truncate > length) {
      throw FormatError("cannot truncate length " + std::to_string(length) + " to " +
                        std::to_string(*options.truncate));
    }
    length = *options.truncate;
  } else if (options.pad_to && *options.pad_to != 0) {
    if (*options.pad_to < length) throw FormatError("pad length shorter than series length");
    length = *options.pad_to;
  }

  LabelMapper mapper(options.class_names);
  Dataset ds;
  ds.length = length;
  ds.channels = static_cast<std::size_t>(d);
  ds.instances.reserve(static_cast<std::size_t>(n));
  for (long k = 0; k < n; ++k) {
    auto label_fields = split_ws(next_line());
    if (label_fields.size() != 1) throw ParseError(line_no, "expected a single label");
    const int label = mapper.map(parse_label(label_fields[0], line_no));
    Matrix values = Matrix::Zero(static_cast<Eigen::Index>(length), d);
    for (long i = 0; i < t; ++i) {
      auto fields = split_ws(next_line());
      if (fields.size() != static_cast<std::size_t>(d)) {
        throw ParseError(line_no, "expected " + std::to_string(d) + " values, got " +
                                      std::to_string(fields.size()));
      }
      for (long c = 0; c < d; ++c) {
        const double v = parse_real(fields[static_cast<std::size_t>(c)], line_no);
        if (static_cast<std::size_t>(i) < length) values(i, c) = v;
      }
    }
    ds.instances.emplace_back(std::move(values), label);
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim_eol(line).empty()) throw ParseError(line_no, "trailing content after last block");
  }
  ds.class_names = mapper.names();
  ds.num_classes = static_cast<int>(ds.class_names.size());
  return ds;
}

void write_real(std::ostream& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, ptr - buf);
}

}  // namespace

Dataset read_dataset(std::istream& in, Format format, const LoadOptions& options) {
  if (options.pad_to && options.truncate) {
    throw ConfigError("--pad-to and --truncate are mutually exclusive");
  }
  Dataset ds = format == Format::UcrTsv ? read_ucr(in, options) : read_mts(in, options);
  ds.validate();
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, Format format, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset file '" + path.string() + "'");
  return read_dataset(in, format, options);
}

void write_mts(const Dataset& dataset, std::ostream& out) {
  out << dataset.size() << ' ' << dataset.length << ' ' << dataset.channels << '\n';
  for (const auto& s : dataset.instances) {
    const int label = s.label().value_or(0);
    const long raw = static_cast<std::size_t>(label) < dataset.class_names.size()
                         ? dataset.class_names[static_cast<std::size_t>(label)]
                         : label;
    out << raw << '\n';
    for (Eigen::Index i = 0; i < s.values().rows(); ++i) {
      for (Eigen::Index c = 0; c < s.values().cols(); ++c) {
        if (c > 0) out << ' ';
        write_real(out, s.values()(i, c));
      }
      out << '\n';
    }
  }
}

void save_mts(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  write_mts(dataset, out);
}

TimeSeries znormalize(const TimeSeries& series) {
  Matrix v = series.values();
  const double n = static_cast<double>(v.rows());
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    auto col = v.col(c);
    const double mean = col.sum() / n;
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / n);
    if (sd > 0.0) {
      col /= sd;
    } else {
      col.setZero();
    }
  }
  return TimeSeries(std::move(v), series.label());
}

Dataset znormalize(const Dataset& dataset) {
  Dataset out = dataset;
  for (auto& s : out.instances) s = znormalize(s);
  return out;
}

std::size_t PairBatch::positives() const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const PairItem& p) { return p.target == 1; }));
}

std::size_t PairBatch::negatives() const { return pairs.size() - positives(); }

PairBatch sample_pair_batch(const Dataset& dataset, std::size_t k, Rng& rng) {
  if (k == 0) throw ConfigError("pair batch needs K >= 1");
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(dataset.num_classes));
  for (std::size_t n = 0; n < dataset.size(); ++n) {
    const auto label = dataset.instances[n].label();
    if (!label) throw ConfigError("pair sampling requires labeled instances");
    members[static_cast<std::size_t>(*label)].push_back(n);
  }
  const std::size_t total = dataset.size();

  // |P| per class is n_c (n_c - 1) ordered pairs; |N| per first element is N - n_c.
  std::vector<std::size_t> pos_weight(members.size());
  std::size_t pos_total = 0;
  std::size_t nonempty = 0;
  for (std::size_t c = 0; c < members.size(); ++c) {
    const std::size_t nc = members[c].size();
    pos_weight[c] = nc * (nc > 0 ? nc - 1 : 0);
    pos_total += pos_weight[c];
    if (nc > 0) ++nonempty;
  }
  if (nonempty < 2) throw ConfigError("cannot form negative pairs: dataset has fewer than 2 classes");
  if (pos_total == 0) throw ConfigError("cannot form positive pairs: no class has 2 or more instances");

  std::vector<std::size_t> neg_weight(total);
  std::size_t neg_total = 0;
  for (std::size_t n = 0; n < total; ++n) {
    neg_weight[n] = total - members[static_cast<std::size_t>(*dataset.instances[n].label())].size();
    neg_total += neg_weight[n];
  }

  auto pick = [&rng](const std::vector<std::size_t>& weights, std::size_t sum) {
    std::uniform_int_distribution<std::size_t> dist(0, sum - 1);
    std::size_t r = dist(rng);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (r < weights[i]) return i;
      r -= weights[i];
    }
    return weights.size() - 1;
  };
  auto uniform = [&rng](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };

  PairBatch batch;
  batch.pairs.reserve(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& m = members[pick(pos_weight, pos_total)];
    const std::size_t a = uniform(m.size());
    std::size_t b = uniform(m.size() - 1);
    if (b >= a) ++b;
    batch.pairs.push_back({m[a], m[b], 1});
  }
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t a = pick(neg_weight, neg_total);
    const int la = *dataset.instances[a].label();
    std::size_t r = uniform(neg_weight[a]);
    std::size_t b = 0;
    for (std::size_t n = 0; n < total; ++n) {
      if (*dataset.instances[n].label() == la) continue;
      if (r == 0) {
        b = n;
        break;
      }
      --r;
    }
    batch.pairs.push_back({a, b, 0});
  }
  return batch;
}

namespace {

// Slopes in [1 - w, 1 + w] summing exactly to n. The deviations are a random
// mix of two low-frequency sinusoids, so timing drifts smoothly over the series.
std::vector<double> monotone_slopes(std::size_t n, double w, Rng& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double c1 = unit(rng);
  const double c2 = unit(rng);
  const double p1 = phase(rng);
  const double p2 = phase(rng);
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    u[i] = c1 * std::sin(x + p1) + c2 * std::sin(2.0 * x + p2);
  }
  const double mean = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(n);
  double peak = 0.0;
  for (auto& x : u) {
    x -= mean;
    peak = std::max(peak, std::abs(x));
  }
  std::vector<double> slopes(n);
  for (std::size_t i = 0; i < n; ++i) slopes[i] = 1.0 + (peak > 0.0 ? w * (u[i] / peak) : 0.0);
  return slopes;
}

}  // namespace

Dataset gen_synthetic(const SyntheticSpec& spec, Rng& rng) {
  if (spec.num_classes < 1 || spec.instances_per_class < 1 || spec.length < 1 || spec.channels < 1) {
    throw ConfigError("synthetic spec sizes must be positive");
  }
  if (spec.shift_range >= spec.length) throw ConfigError("shift_range must be smaller than T");
  if (spec.warp_strength < 0.0 || spec.warp_strength >= 1.0) {
    throw ConfigError("warp_strength must be in [0, 1)");
  }
  if (spec.noise_sigma < 0.0) throw ConfigError("noise_sigma must be non-negative");

  const auto T = static_cast<Eigen::Index>(spec.length);
  const auto D = static_cast<Eigen::Index>(spec.channels);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Class c is a train of c + 2 narrow, evenly spaced spikes. Shifts and
  // warps misalign spikes, which lock-step distances punish, while elastic
  // alignment cannot create or remove a spike.
  std::vector<Matrix> prototypes;
  const double width = std::max(1.0, static_cast<double>(T) / 64.0);
  const double first = static_cast<double>(T) / 8.0;
  const double last = 7.0 * static_cast<double>(T) / 8.0;
  for (int c = 0; c < spec.num_classes; ++c) {
    const int spikes = c + 2;
    Matrix proto = Matrix::Zero(T, D);
    for (int k = 0; k < spikes; ++k) {
      const double center = first + (last - first) * k / (spikes - 1.0);
      for (Eigen::Index t = 0; t < T; ++t) {
        const double u = (static_cast<double>(t) - center) / width;
        proto.row(t).array() += 2.0 * std::exp(-0.5 * u * u);
      }
    }
    prototypes.push_back(std::move(proto));
  }

  Dataset ds;
  ds.length = spec.length;
  ds.channels = spec.channels;
  ds.num_classes = spec.num_classes;
  for (int c = 0; c < spec.num_classes; ++c) ds.class_names.push_back(c);

  const auto shift_span = static_cast<long>(spec.shift_range);
  std::uniform_int_distribution<long> shift_dist(-shift_span, shift_span);
  for (int c = 0; c < spec.num_classes; ++c) {
    const Matrix& proto = prototypes[static_cast<std::size_t>(c)];
    for (std::size_t k = 0; k < spec.instances_per_class; ++k) {
      const long shift = shift_dist(rng);
      Matrix shifted(T, D);
      for (Eigen::Index t = 0; t < T; ++t) {
        const long src = ((static_cast<long>(t) - shift) % T + T) % T;
        shifted.row(t) = proto.row(src);
      }

      Matrix warped(T, D);
      if (T == 1) {
        warped = shifted;
      } else {
        const auto slopes = monotone_slopes(spec.length - 1, spec.warp_strength, rng);
        double pos = 0.0;
        for (Eigen::Index t = 0; t < T; ++t) {
          if (t > 0) pos += slopes[static_cast<std::size_t>(t - 1)];
          const double clamped = std::clamp(pos, 0.0, static_cast<double>(T - 1));
          const auto lo = static_cast<Eigen::Index>(std::floor(clamped));
          const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, T - 1);
          const double frac = clamped - static_cast<double>(lo);
          warped.row(t) = shifted.row(lo) + frac * (shifted.row(hi) - shifted.row(lo));
        }
      }

      if (spec.noise_sigma > 0.0) {
        for (Eigen::Index t = 0; t < T; ++t) {
          for (Eigen::Index d = 0; d < D; ++d) warped(t, d) += spec.noise_sigma * gauss(rng);
        }
      }
      ds.instances.emplace_back(std::move(warped), c);
    }
  }
  return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test fraction must be in [0, 1)");
  }
  Rng rng = derive_stream(seed, "split");
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(dataset.num_classes));
  for (std::size_t n = 0; n < dataset.size(); ++n) {
    members[static_cast<std::size_t>(dataset.instances[n].label().value_or(0))].push_back(n);
  }
  std::vector<bool> is_test(dataset.size(), false);
  for (auto& m : members) {
    std::shuffle(m.begin(), m.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(m.size())));
    for (std::size_t i = 0; i < n_test && i < m.size(); ++i) is_test[m[i]] = true;
  }
  Dataset train;
  Dataset test;
  for (Dataset* part : {&train, &test}) {
    part->num_classes = dataset.num_classes;
    part->class_names = dataset.class_names;
    part->length = dataset.length;
    part->channels = dataset.channels;
  }
  for (std::size_t n = 0; n < dataset.size(); ++n) {
    (is_test[n] ? test : train).instances.push_back(dataset.instances[n]);
  }
  return {std::move(train), std::move(test)};
}

void write_csv(const Matrix& matrix, std::ostream& out) {
  const auto old_flags = out.flags();
  const auto old_prec = out.precision();
  out << std::setprecision(9);
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      if (c > 0) out << ',';
      out << matrix(r, c);
    }
    out << '\n';
  }
  out.flags(old_flags);
  out.precision(old_prec);
}

void save_csv(const Matrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  write_csv(matrix, out);
}

}  // namespace neuralwarp
