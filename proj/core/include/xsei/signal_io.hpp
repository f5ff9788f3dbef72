#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "xsei/signal.hpp"

namespace xsei::signal {

inline constexpr int kDatasetSchemaVersion = 1;

enum class Encoding { csv, binary };

std::string to_string(Encoding e);
Encoding encoding_from_string(const std::string& s);

struct WindowEntry {
  std::uint32_t id = 0;
  int label = kNormalClass;
  std::string load;
  std::size_t start = 0;
  std::size_t length = 0;
};

struct DatasetManifest {
  int schema_version = kDatasetSchemaVersion;
  std::vector<std::string> class_names{"normal", "arc"};
  double sample_period_ms = kBaseSamplePeriodMs;
  std::size_t window_width = 10000;
  std::size_t window_step = 5000;
  std::map<std::string, std::uint64_t> seeds;
  Encoding encoding = Encoding::binary;
  std::string records = "windows.bin";
  std::vector<WindowEntry> windows;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SignalWindow> windows;

  /// Rebuilds manifest.windows from `windows`.
  void sync_manifest();
};

/// Writes manifest.json plus the record file into `dir` (created if needed).
/// Samples are stored as float32; returns the paths written.
std::vector<std::filesystem::path> write_dataset(const Dataset& dataset,
                                                 const std::filesystem::path& dir);

/// Reads and validates a dataset directory. Any schema, length, or value
/// problem raises Error naming the offending record.
Dataset read_dataset(const std::filesystem::path& dir);

/// Rounds every sample to float32 precision, the precision of the on-disk formats.
void quantize_to_float(Dataset& dataset);

}  // namespace xsei::signal
