#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "model/model.hpp"
#include "train/adam.hpp"

namespace sf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to resume training bit-exactly.
struct Checkpoint {
  ModelConfig config;
  ParamStore params;
  AdamState adam;  // empty moments when saved without optimizer state
  std::uint64_t step = 0;
  std::uint64_t rng_key = 0;
  std::uint64_t rng_counter = 0;

  Model model() const { return Model(config, params); }
};

/// Layout, all integers little-endian:
///   "SNDF" | u32 version | u32 len + config text | u64 step | u64 rng key | u64 rng counter
///   | u32 n | n x (u32 len + name | u32 rank | rank x u32 dim | f32 data)
///   | u32 moment count (0 or n) | per tensor: f32 m data, f32 v data
///   | u32 CRC32 of every preceding byte
std::vector<unsigned char> encode_checkpoint(const Checkpoint& ck);
/// Format error on bad magic, unsupported-version error on version != 1,
/// corruption error (with byte offset) on truncation or checksum mismatch.
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);
/// As load_checkpoint, then config-mismatch error naming the first differing field.
Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected);

}  // namespace sf
