#include "xsei/signal_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "xsei/common.hpp"

namespace xsei::signal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 8> kBinaryMagic = {'X', 'S', 'E', 'I', 'D', 'S', '0', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  bool has(std::size_t n) const { return pos_ + n <= bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint32_t u32(const std::string& what) {
    if (!has(4)) throw Error("truncated dataset: missing " + what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  float f32(const std::string& what) { return std::bit_cast<float>(u32(what)); }
  std::string take(std::size_t n) {
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + p.string());
}

std::string format_float(float f) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), f);
  if (ec != std::errc{}) throw Error("failed to format float");
  return std::string(buf.data(), ptr);
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> runs_of(const ArcMask& mask) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> runs;
  std::size_t i = 0;
  while (i < mask.flags.size()) {
    if (!mask.flags[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < mask.flags.size() && mask.flags[j]) ++j;
    runs.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j - i));
    i = j;
  }
  return runs;
}

std::string encode_binary(const Dataset& d) {
  std::string out(kBinaryMagic.begin(), kBinaryMagic.end());
  put_u32(out, static_cast<std::uint32_t>(d.windows.size()));
  for (const SignalWindow& w : d.windows) {
    put_u32(out, w.id);
    put_u32(out, static_cast<std::uint32_t>(w.samples.size()));
    for (double v : w.samples) put_f32(out, static_cast<float>(v));
    const auto runs = runs_of(w.mask);
    put_u32(out, static_cast<std::uint32_t>(runs.size()));
    for (auto [start, len] : runs) {
      put_u32(out, start);
      put_u32(out, len);
    }
  }
  return out;
}

std::string encode_csv(const Dataset& d) {
  std::string out = "window_id,index,current,mask_flag\n";
  for (const SignalWindow& w : d.windows) {
    const std::string id = std::to_string(w.id);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      out += id;
      out += ',';
      out += std::to_string(i);
      out += ',';
      out += format_float(static_cast<float>(w.samples[i]));
      out += ',';
      out += w.mask.flags[i] ? '1' : '0';
      out += '\n';
    }
  }
  return out;
}

json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["schema_version"] = m.schema_version;
  j["class_names"] = m.class_names;
  j["sample_period_ms"] = m.sample_period_ms;
  j["window"] = {{"width", m.window_width}, {"step", m.window_step}};
  j["seeds"] = json::object();
  for (const auto& [k, v] : m.seeds) j["seeds"][k] = v;
  j["encoding"] = to_string(m.encoding);
  j["records"] = m.records;
  j["windows"] = json::array();
  for (const WindowEntry& e : m.windows) {
    j["windows"].push_back({{"id", e.id},
                            {"label", e.label},
                            {"load", e.load},
                            {"start", e.start},
                            {"length", e.length}});
  }
  return j;
}

DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  try {
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kDatasetSchemaVersion) {
      throw Error("dataset schema_version " + std::to_string(m.schema_version) +
                  " is not supported (expected " + std::to_string(kDatasetSchemaVersion) + ")");
    }
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.sample_period_ms = j.at("sample_period_ms").get<double>();
    m.window_width = j.at("window").at("width").get<std::size_t>();
    m.window_step = j.at("window").at("step").get<std::size_t>();
    for (const auto& [k, v] : j.at("seeds").items()) m.seeds[k] = v.get<std::uint64_t>();
    m.encoding = encoding_from_string(j.at("encoding").get<std::string>());
    m.records = j.at("records").get<std::string>();
    if (m.records.empty() || fs::path(m.records).filename() != fs::path(m.records)) {
      throw Error("manifest records must be a plain file name");
    }
    std::size_t idx = 0;
    for (const json& e : j.at("windows")) {
      WindowEntry w;
      w.id = e.at("id").get<std::uint32_t>();
      w.label = e.at("label").get<int>();
      w.load = e.at("load").get<std::string>();
      w.start = e.at("start").get<std::size_t>();
      w.length = e.at("length").get<std::size_t>();
      if (w.label < 0 || static_cast<std::size_t>(w.label) >= m.class_names.size()) {
        throw Error("manifest window record " + std::to_string(idx) + " has label " +
                    std::to_string(w.label) + " outside the class list");
      }
      m.windows.push_back(std::move(w));
      ++idx;
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed dataset manifest: ") + e.what());
  }
  if (!(m.sample_period_ms > 0.0) || !std::isfinite(m.sample_period_ms)) {
    throw Error("dataset manifest sample_period_ms must be positive");
  }
  if (m.class_names.size() < 2) throw Error("dataset manifest needs at least two classes");
  return m;
}

std::vector<SignalWindow> decode_binary(const std::string& bytes, const DatasetManifest& m) {
  Reader r(bytes);
  if (!r.has(kBinaryMagic.size()) ||
      std::memcmp(bytes.data(), kBinaryMagic.data(), kBinaryMagic.size()) != 0) {
    throw Error("dataset record file has a bad magic header");
  }
  r.take(kBinaryMagic.size());
  const std::uint32_t count = r.u32("window count");
  if (count != m.windows.size()) {
    throw Error("record file holds " + std::to_string(count) + " windows but the manifest lists " +
                std::to_string(m.windows.size()));
  }
  std::vector<SignalWindow> out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string rec = "record " + std::to_string(k);
    const std::uint32_t id = r.u32(rec + " id");
    const std::uint32_t len = r.u32(rec + " length");
    if (len != m.windows[k].length || static_cast<std::size_t>(len) * 4 > r.remaining()) {
      throw Error(rec + ": length prefix " + std::to_string(len) + " is inconsistent (manifest " +
                  std::to_string(m.windows[k].length) + ")");
    }
    if (id != m.windows[k].id) throw Error(rec + ": window id does not match the manifest");
    SignalWindow w;
    w.id = id;
    w.label = m.windows[k].label;
    w.load = m.windows[k].load;
    w.start = m.windows[k].start;
    w.sample_period_ms = m.sample_period_ms;
    w.samples.resize(len);
    for (std::uint32_t i = 0; i < len; ++i) {
      const float f = r.f32(rec + " samples");
      if (!std::isfinite(f)) {
        throw Error(rec + ": sample " + std::to_string(i) + " is not finite");
      }
      w.samples[i] = f;
    }
    w.mask.flags.assign(len, 0);
    const std::uint32_t runs = r.u32(rec + " run count");
    for (std::uint32_t q = 0; q < runs; ++q) {
      const std::uint32_t start = r.u32(rec + " run start");
      const std::uint32_t run_len = r.u32(rec + " run length");
      if (static_cast<std::uint64_t>(start) + run_len > len) {
        throw Error(rec + ": arc run exceeds the window");
      }
      std::fill_n(w.mask.flags.begin() + start, run_len, 1);
    }
    out.push_back(std::move(w));
  }
  if (r.remaining() != 0) throw Error("record file has trailing bytes after the last window");
  return out;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw Error("csv line " + std::to_string(line) + ": cannot parse '" + std::string(field) + "'");
  }
  return value;
}

std::vector<SignalWindow> decode_csv(const std::string& text, const DatasetManifest& m) {
  std::vector<SignalWindow> out;
  out.reserve(m.windows.size());
  std::size_t pos = text.find('\n');
  if (pos == std::string::npos || text.substr(0, pos) != "window_id,index,current,mask_flag") {
    throw Error("csv dataset header must be window_id,index,current,mask_flag");
  }
  ++pos;
  std::size_t line_no = 1;
  std::size_t record = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    std::array<std::string_view, 4> f;
    std::size_t s = 0;
    for (int c = 0; c < 4; ++c) {
      const std::size_t comma = c < 3 ? line.find(',', s) : line.size();
      if (comma == std::string_view::npos) {
        throw Error("csv line " + std::to_string(line_no) + ": expected 4 fields");
      }
      f[c] = line.substr(s, comma - s);
      s = comma + 1;
    }
    const auto id = parse_number<std::uint32_t>(f[0], line_no);
    const auto index = parse_number<std::size_t>(f[1], line_no);
    const auto current = parse_number<float>(f[2], line_no);
    const auto flag = parse_number<int>(f[3], line_no);
    if (index == 0) {
      if (record >= m.windows.size()) {
        throw Error("csv holds more windows than the manifest lists");
      }
      if (id != m.windows[record].id) {
        throw Error("record " + std::to_string(record) + ": window id does not match the manifest");
      }
      SignalWindow w;
      w.id = id;
      w.label = m.windows[record].label;
      w.load = m.windows[record].load;
      w.start = m.windows[record].start;
      w.sample_period_ms = m.sample_period_ms;
      out.push_back(std::move(w));
      ++record;
    }
    if (out.empty() || out.back().id != id || index != out.back().samples.size()) {
      throw Error("csv line " + std::to_string(line_no) + ": samples out of order");
    }
    if (!std::isfinite(current)) {
      throw Error("record " + std::to_string(record - 1) + ": sample " + std::to_string(index) +
                  " is not finite");
    }
    if (flag != 0 && flag != 1) {
      throw Error("csv line " + std::to_string(line_no) + ": mask_flag must be 0 or 1");
    }
    out.back().samples.push_back(current);
    out.back().mask.flags.push_back(static_cast<std::uint8_t>(flag));
  }
  if (out.size() != m.windows.size()) {
    throw Error("csv holds " + std::to_string(out.size()) + " windows but the manifest lists " +
                std::to_string(m.windows.size()));
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k].samples.size() != m.windows[k].length) {
      throw Error("record " + std::to_string(k) + ": length " +
                  std::to_string(out[k].samples.size()) + " differs from manifest length " +
                  std::to_string(m.windows[k].length));
    }
  }
  return out;
}

}  // namespace

std::string to_string(Encoding e) { return e == Encoding::csv ? "csv" : "binary"; }

Encoding encoding_from_string(const std::string& s) {
  if (s == "csv") return Encoding::csv;
  if (s == "binary" || s == "bin") return Encoding::binary;
  throw Error("unknown dataset encoding '" + s + "' (expected csv or binary)");
}

void Dataset::sync_manifest() {
  manifest.windows.clear();
  manifest.windows.reserve(windows.size());
  for (const SignalWindow& w : windows) {
    manifest.windows.push_back({w.id, w.label, w.load, w.start, w.samples.size()});
  }
}

std::vector<fs::path> write_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < dataset.windows.size(); ++k) {
    if (dataset.windows[k].mask.size() != dataset.windows[k].samples.size()) {
      throw Error("record " + std::to_string(k) + ": mask length differs from sample count");
    }
  }
  Dataset d = dataset;
  d.sync_manifest();
  d.manifest.records = d.manifest.encoding == Encoding::csv ? "windows.csv" : "windows.bin";
  const fs::path records = dir / d.manifest.records;
  const fs::path manifest = dir / "manifest.json";
  write_file(records, d.manifest.encoding == Encoding::csv ? encode_csv(d) : encode_binary(d));
  write_file(manifest, manifest_to_json(d.manifest).dump(2) + "\n");
  return {manifest, records};
}

Dataset read_dataset(const fs::path& dir) {
  json j;
  try {
    j = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw Error(std::string("dataset manifest is not valid JSON: ") + e.what());
  }
  Dataset d;
  d.manifest = manifest_from_json(j);
  const std::string bytes = read_file(dir / d.manifest.records);
  d.windows = d.manifest.encoding == Encoding::csv ? decode_csv(bytes, d.manifest)
                                                   : decode_binary(bytes, d.manifest);
  return d;
}

void quantize_to_float(Dataset& dataset) {
  for (SignalWindow& w : dataset.windows) {
    for (double& v : w.samples) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace xsei::signal
