#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "wavessm/network.hpp"

namespace wavessm {

namespace {

using json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'W', 'M', 'C', 'K'};
constexpr const char* kMetadataKey = "__metadata__";

template <class U>
void put_le(std::string& out, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.append(reinterpret_cast<const char*>(b), sizeof(U));
}

template <class U>
U get_le(const std::string& in, std::size_t pos) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

void put_f32(std::string& out, float f) { put_le(out, std::bit_cast<std::uint32_t>(f)); }
float get_f32(const std::string& in, std::size_t pos) { return std::bit_cast<float>(get_le<std::uint32_t>(in, pos)); }

json config_to_json(const ModelConfig& c) {
  return json{{"channels", c.channels}, {"lfss_counts", c.lfss_counts}, {"hfe_counts", c.hfe_counts},
              {"heads", c.heads},       {"lambda", c.lambda},           {"state_size", c.state_size},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.channels = j.at("channels").get<std::size_t>();
  c.lfss_counts = j.at("lfss_counts").get<std::vector<std::size_t>>();
  c.hfe_counts = j.at("hfe_counts").get<std::vector<std::size_t>>();
  c.heads = j.at("heads").get<std::size_t>();
  c.lambda = j.at("lambda").get<std::size_t>();
  c.state_size = j.at("state_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save(const Model& m, const std::string& path) {
  json manifest;
  manifest[kMetadataKey] = config_to_json(m.config);
  std::string payload;
  for (const auto& name : m.params.names()) {
    const auto& t = m.params.get(name);
    const std::size_t offset = payload.size();
    for (float v : t.data()) put_f32(payload, v);
    manifest[name] = json{{"dtype", "f32"}, {"shape", t.shape()}, {"offset", offset}, {"byte_len", payload.size() - offset}};
  }
  const std::string text = manifest.dump();

  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out += payload;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing '" + path + "'");
}

Model load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint '" + path + "'");
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string where = "checkpoint '" + path + "': ";

  constexpr std::size_t header = sizeof kMagic + 4 + 8;
  if (in.size() < header) throw FormatError(where + "truncated header (" + std::to_string(in.size()) + " bytes)");
  if (std::memcmp(in.data(), kMagic, sizeof kMagic) != 0) throw FormatError(where + "bad magic, expected WMCK");
  const auto version = get_le<std::uint32_t>(in, 4);
  if (version != kCheckpointVersion)
    throw FormatError(where + "unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  const auto manifest_len = get_le<std::uint64_t>(in, 8);
  if (manifest_len > in.size() - header)
    throw FormatError(where + "manifest length " + std::to_string(manifest_len) + " exceeds file size");

  json manifest;
  try {
    manifest = json::parse(in.begin() + header, in.begin() + static_cast<std::ptrdiff_t>(header + manifest_len));
  } catch (const json::exception& e) {
    throw FormatError(where + "malformed manifest: " + e.what());
  }
  if (!manifest.is_object()) throw FormatError(where + "manifest is not a JSON object");
  if (!manifest.contains(kMetadataKey)) throw FormatError(where + "manifest lacks " + kMetadataKey);

  Model m;
  try {
    m = build(config_from_json(manifest.at(kMetadataKey)));
  } catch (const json::exception& e) {
    throw FormatError(where + "bad model metadata: " + e.what());
  }

  std::vector<std::string> unknown;
  for (const auto& [name, entry] : manifest.items())
    if (name != kMetadataKey && !m.params.contains(name)) unknown.push_back(name);
  if (!unknown.empty()) {
    std::string list;
    for (const auto& n : unknown) list += (list.empty() ? "" : ", ") + n;
    throw FormatError(where + "unknown tensor name(s): " + list);
  }

  const std::size_t payload_start = header + manifest_len;
  const std::size_t payload_size = in.size() - payload_start;
  for (const auto& name : m.params.names()) {
    if (!manifest.contains(name)) throw FormatError(where + "missing tensor '" + name + "'");
    const json& e = manifest.at(name);
    Shape shape;
    std::size_t offset = 0, byte_len = 0;
    try {
      if (e.at("dtype").get<std::string>() != "f32") throw FormatError(where + "tensor '" + name + "' is not f32");
      shape = e.at("shape").get<Shape>();
      offset = e.at("offset").get<std::size_t>();
      byte_len = e.at("byte_len").get<std::size_t>();
    } catch (const json::exception& ex) {
      throw FormatError(where + "bad manifest entry for '" + name + "': " + ex.what());
    }
    if (shape != m.params.get(name).shape())
      throw FormatError(where + "tensor '" + name + "' has shape " + shape_str(shape) + ", model expects " +
                        shape_str(m.params.get(name).shape()));
    if (byte_len != shape_numel(shape) * 4)
      throw FormatError(where + "tensor '" + name + "' byte_len does not match its shape");
    if (offset > payload_size || byte_len > payload_size - offset)
      throw FormatError(where + "truncated payload for tensor '" + name + "'");
    Tensor<float> t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_f32(in, payload_start + offset + 4 * i);
    m.params.set(name, std::move(t));
  }
  return m;
}

}  // namespace wavessm
