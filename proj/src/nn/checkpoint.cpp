#include "neuralwarp/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "neuralwarp/errors.hpp"

namespace neuralwarp::nn {

namespace {

constexpr char kMagic[8] = {'N', 'W', 'A', 'R', 'P', 'C', 'K', '\0'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 4);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void get_bytes(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("checkpoint is truncated");
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  get_bytes(in, reinterpret_cast<char*>(bytes), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  get_bytes(in, reinterpret_cast<char*>(bytes), 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParamStore& store, const std::string& config) {
  out.write(kMagic, 8);
  put_u32(out, kCheckpointVersion);
  put_u64(out, config.size());
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  put_u64(out, static_cast<std::uint64_t>(store.step));
  put_u64(out, store.size());
  for (const auto& p : store) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    out.put(p.trainable ? 1 : 0);
    put_u64(out, static_cast<std::uint64_t>(p.value.rows()));
    put_u64(out, static_cast<std::uint64_t>(p.value.cols()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) put_f64(out, p.value(r, c));
    }
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store, const std::string& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(out, store, config);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  get_bytes(in, magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw FormatError("not a checkpoint file (bad magic)");
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const std::uint64_t config_len = get_u64(in);
  if (config_len > (1ULL << 30)) throw FormatError("checkpoint config block too large");
  ck.config.resize(config_len);
  get_bytes(in, ck.config.data(), config_len);
  ck.step = static_cast<std::int64_t>(get_u64(in));
  const std::uint64_t count = get_u64(in);
  for (std::uint64_t g = 0; g < count; ++g) {
    CheckpointGroup group;
    const std::uint32_t name_len = get_u32(in);
    group.name.resize(name_len);
    get_bytes(in, group.name.data(), name_len);
    char flag = 0;
    get_bytes(in, &flag, 1);
    group.trainable = flag != 0;
    const std::uint64_t rows = get_u64(in);
    const std::uint64_t cols = get_u64(in);
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw FormatError("checkpoint group too large");
    group.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < group.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < group.value.cols(); ++c) {
        group.value(r, c) = std::bit_cast<double>(get_u64(in));
      }
    }
    ck.groups.push_back(std::move(group));
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

void apply_checkpoint(const Checkpoint& checkpoint, ParamStore& store) {
  if (checkpoint.groups.size() != store.size()) {
    throw FormatError("checkpoint has " + std::to_string(checkpoint.groups.size()) +
                      " groups, model expects " + std::to_string(store.size()));
  }
  for (const auto& g : checkpoint.groups) {
    if (!store.contains(g.name)) throw FormatError("checkpoint group '" + g.name + "' not in model");
    Param& p = store.at(g.name);
    if (p.value.rows() != g.value.rows() || p.value.cols() != g.value.cols()) {
      throw FormatError("checkpoint group '" + g.name + "' has the wrong shape");
    }
    p.value = g.value;
    p.trainable = g.trainable;
  }
  store.step = checkpoint.step;
}

}  // namespace neuralwarp::nn
