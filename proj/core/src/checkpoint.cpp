#include "xsei/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "xsei/common.hpp"

namespace xsei::nn {

namespace {

constexpr std::array<char, 8> kMagic = {'X', 'S', 'E', 'I', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::string& out, T v) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error("checkpoint is truncated");
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return static_cast<T>(u);
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.header_json.size()));
  out += ckpt.header_json;
  put_le<std::uint64_t>(out, ckpt.params.size());
  out.reserve(out.size() + 8 * ckpt.params.size() + 4);
  for (double v : ckpt.params) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  const auto crc = crc32(std::span(reinterpret_cast<const std::uint8_t*>(out.data()), out.size()));
  put_le<std::uint32_t>(out, crc);
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < kMagic.size() + 4 + 4 + 8 + 4 ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error("not a checkpoint file (bad magic)");
  }
  const std::size_t body = bytes.size() - 4;
  std::size_t crc_pos = body;
  const auto stored = get_le<std::uint32_t>(bytes, crc_pos);
  const auto actual = crc32(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), body));
  if (stored != actual) throw Error("checkpoint checksum mismatch");
  std::size_t pos = kMagic.size();
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw Error("checkpoint version " + std::to_string(version) + " is not supported");
  }
  const auto header_len = get_le<std::uint32_t>(bytes, pos);
  if (pos + header_len > body) throw Error("checkpoint header overruns the file");
  Checkpoint ckpt;
  ckpt.header_json = bytes.substr(pos, header_len);
  pos += header_len;
  const auto count = get_le<std::uint64_t>(bytes, pos);
  if (count > (body - pos) / 8 || pos + count * 8 != body) {
    throw Error("checkpoint parameter count does not match the file size");
  }
  ckpt.params.resize(count);
  for (auto& v : ckpt.params) v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

namespace {

nlohmann::json network_header(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& s : net.layers()) {
    layers.push_back({{"kind", to_string(s.kind)},
                      {"kernel", s.kernel},
                      {"padding", s.padding},
                      {"stride", s.stride},
                      {"out", s.out},
                      {"activation", to_string(s.activation)}});
  }
  return {{"input", {{"channels", net.input_shape().channels}, {"length", net.input_shape().length}}},
          {"layers", layers}};
}

}  // namespace

Checkpoint network_checkpoint(const Network& net) {
  nlohmann::json h;
  h["format"] = "network";
  h["network"] = network_header(net);
  return {h.dump(), std::vector<double>(net.parameters().begin(), net.parameters().end())};
}

Network network_from_checkpoint(const Checkpoint& ckpt) {
  try {
    const auto h = nlohmann::json::parse(ckpt.header_json);
    const auto& n = h.at("network");
    Shape input{n.at("input").at("channels").get<std::size_t>(),
                n.at("input").at("length").get<std::size_t>()};
    std::vector<LayerSpec> layers;
    for (const auto& l : n.at("layers")) {
      LayerSpec s;
      s.kind = layer_kind_from_string(l.at("kind").get<std::string>());
      s.kernel = l.at("kernel").get<std::size_t>();
      s.padding = l.at("padding").get<std::size_t>();
      s.stride = l.at("stride").get<std::size_t>();
      s.out = l.at("out").get<std::size_t>();
      s.activation = activation_from_string(l.at("activation").get<std::string>());
      layers.push_back(s);
    }
    Network net(input, std::move(layers));
    net.set_parameters(ckpt.params);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed network checkpoint header: ") + e.what());
  }
}

}  // namespace xsei::nn
