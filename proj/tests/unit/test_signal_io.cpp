#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "xsei/common.hpp"
#include "xsei/signal_io.hpp"

using namespace xsei;
using namespace xsei::signal;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("xsei_io_" + name);
  fs::remove_all(p);
  return p;
}

Dataset small_dataset() {
  LoadProfile p;
  p.name = "heater";
  p.amplitude = 8;
  p.harmonics = {{3, 0.05, 0.0}};
  p.measurement_noise = 0.01;
  p.arc_fraction = 0.4;
  p.arc_episode_min_ms = 20;
  p.arc_episode_max_ms = 40;
  p.arc.shoulder = 0.2;
  p.arc.spike_rate = 2;
  p.arc.spike_amplitude = 0.3;
  auto [w, m] = synthesize(p, 60000, 9);
  Dataset d;
  d.windows = window(w, m, 10000, 5000);
  d.manifest.seeds["root"] = 9;
  d.sync_manifest();
  quantize_to_float(d);
  return d;
}

void expect_equal(const Dataset& a, const Dataset& b) {
  ASSERT_EQ(a.windows.size(), b.windows.size());
  for (std::size_t i = 0; i < a.windows.size(); ++i) {
    const auto& x = a.windows[i];
    const auto& y = b.windows[i];
    EXPECT_EQ(x.id, y.id);
    EXPECT_EQ(x.samples, y.samples);
    EXPECT_EQ(x.mask.flags, y.mask.flags);
    EXPECT_EQ(x.label, y.label);
    EXPECT_EQ(x.load, y.load);
    EXPECT_EQ(x.start, y.start);
    EXPECT_EQ(x.sample_period_ms, y.sample_period_ms);
  }
  EXPECT_EQ(a.manifest.seeds, b.manifest.seeds);
  EXPECT_EQ(a.manifest.window_width, b.manifest.window_width);
  EXPECT_EQ(a.manifest.class_names, b.manifest.class_names);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

}  // namespace

TEST(DatasetIo, BinaryRoundTrip) {
  const auto d = small_dataset();
  ASSERT_GT(d.windows.size(), 3u);
  const auto dir = scratch("bin");
  const auto files = write_dataset(d, dir);
  EXPECT_EQ(files.size(), 2u);
  expect_equal(d, read_dataset(dir));
}

TEST(DatasetIo, CsvRoundTrip) {
  auto d = small_dataset();
  d.manifest.encoding = Encoding::csv;
  const auto dir = scratch("csv");
  write_dataset(d, dir);
  const auto back = read_dataset(dir);
  EXPECT_EQ(back.manifest.encoding, Encoding::csv);
  expect_equal(d, back);
}

TEST(DatasetIo, WriteIsDeterministic) {
  const auto d = small_dataset();
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  write_dataset(d, a);
  write_dataset(d, b);
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  EXPECT_EQ(slurp(a / "windows.bin"), slurp(b / "windows.bin"));
}

TEST(DatasetIo, CorruptLengthPrefixNamesRecord) {
  const auto dir = scratch("corrupt");
  write_dataset(small_dataset(), dir);
  auto bytes = slurp(dir / "windows.bin");
  bytes[16] = static_cast<char>(bytes[16] + 1);
  spit(dir / "windows.bin", bytes);
  try {
    read_dataset(dir);
    FAIL() << "corrupt length accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("record 0"), std::string::npos) << e.what();
  }
}

TEST(DatasetIo, TruncatedRecordRejected) {
  const auto dir = scratch("trunc");
  write_dataset(small_dataset(), dir);
  auto bytes = slurp(dir / "windows.bin");
  spit(dir / "windows.bin", bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_dataset(dir), Error);
}

TEST(DatasetIo, BadManifestRejected) {
  const auto dir = scratch("manifest");
  write_dataset(small_dataset(), dir);
  const auto good = slurp(dir / "manifest.json");

  auto replace = [&](const std::string& from, const std::string& to) {
    auto text = good;
    const auto pos = text.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    text.replace(pos, from.size(), to);
    spit(dir / "manifest.json", text);
  };
  replace("\"sample_period_ms\": 0.005", "\"sample_period_ms\": 0");
  EXPECT_THROW(read_dataset(dir), Error);
  replace("\"sample_period_ms\": 0.005", "\"sample_period_ms\": -1");
  EXPECT_THROW(read_dataset(dir), Error);
  replace("\"schema_version\": 1", "\"schema_version\": 2");
  EXPECT_THROW(read_dataset(dir), Error);
  spit(dir / "manifest.json", "{not json");
  EXPECT_THROW(read_dataset(dir), Error);
}

TEST(DatasetIo, NonFiniteSampleNamesRecord) {
  auto d = small_dataset();
  d.manifest.encoding = Encoding::csv;
  const auto dir = scratch("nan");
  write_dataset(d, dir);
  auto text = slurp(dir / "windows.csv");
  const std::string id1 = "\n" + std::to_string(d.windows[1].id) + ",0,";
  const auto pos = text.find(id1);
  ASSERT_NE(pos, std::string::npos);
  const auto comma = text.find(',', pos + id1.size());
  text.replace(pos + id1.size(), comma - pos - id1.size(), "nan");
  spit(dir / "windows.csv", text);
  try {
    read_dataset(dir);
    FAIL() << "non-finite sample accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos) << e.what();
  }
}

TEST(DatasetIo, EncodingNames) {
  EXPECT_EQ(encoding_from_string("csv"), Encoding::csv);
  EXPECT_EQ(encoding_from_string("binary"), Encoding::binary);
  EXPECT_THROW(encoding_from_string("hdf5"), Error);
}
