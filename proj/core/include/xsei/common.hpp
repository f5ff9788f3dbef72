#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xsei {

/// Thrown for every contract violation and IO failure in the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Derives an independent 64-bit sub-seed from a root seed and a stream tag.
///
/// The words fed to std::seed_seq are: low and high halves of `root`, one word
/// per byte of `tag`, then low and high halves of each entry of `indices`.
/// Portable across conforming standard libraries.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                          std::initializer_list<std::int64_t> indices = {});

/// Index of the largest element; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

/// SHA-256 of `bytes`, lowercase hex.
std::string sha256_hex(std::string_view bytes);

/// CRC-32 (zlib polynomial) of `bytes`.
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Toolkit version string, baked in at build time.
std::string_view version();

}  // namespace xsei
