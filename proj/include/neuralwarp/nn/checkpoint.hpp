#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "neuralwarp/nn/param_store.hpp"

namespace neuralwarp::nn {

/// Binary checkpoint, all integers and doubles little-endian:
///
///   magic    8 bytes  "NWARPCK\0"
///   version  u32      (currently 1)
///   config   u64 length, then that many bytes of UTF-8 text (JSON model config)
///   step     i64      optimizer step counter
///   groups   u64 count, then per group:
///              u32 name length, name bytes,
///              u8 trainable flag,
///              u64 rows, u64 cols,
///              rows*cols f64 values, row-major
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointGroup {
  std::string name;
  bool trainable = true;
  Matrix value;
};

struct Checkpoint {
  std::string config;
  std::int64_t step = 0;
  std::vector<CheckpointGroup> groups;
};

void write_checkpoint(std::ostream& out, const ParamStore& store, const std::string& config);
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store, const std::string& config);

/// Throws FormatError on bad magic, unknown version or truncation.
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every group into a store with the same architecture. Names and
/// shapes must match exactly.
void apply_checkpoint(const Checkpoint& checkpoint, ParamStore& store);

}  // namespace neuralwarp::nn
