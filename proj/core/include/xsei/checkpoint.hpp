#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xsei/nn.hpp"

namespace xsei::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Versioned binary container, all integers little-endian:
///
///   "XSEICKPT"            8-byte magic
///   u32 version
///   u32 header_bytes      followed by a UTF-8 JSON header
///   u64 param_count       followed by param_count IEEE-754 f64 values
///   u32 crc32             over every preceding byte
///
/// The JSON header describes what the parameters mean (layer specs, model
/// family, tree structure); the container itself does not interpret it.
struct Checkpoint {
  std::string header_json;
  std::vector<double> params;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Checkpoint of a bare network: header holds the input shape and layer table.
Checkpoint network_checkpoint(const Network& net);
Network network_from_checkpoint(const Checkpoint& ckpt);

}  // namespace xsei::nn
