#include "lankit/serialize.hpp"

#include <cstring>
#include <fstream>

namespace lankit {

namespace {

constexpr char kCheckpointMagic[9] = "LANCKPT1";
constexpr char kMaskMagic[9] = "LANMASK1";

void append_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void append_floats_le(std::string& out, const std::vector<float>& data) {
  for (float f : data) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    append_u32_le(out, bits);
  }
}

std::string pack_container(const char* magic, const nlohmann::json& header,
                           const std::vector<const Tensor*>& blobs) {
  std::string out;
  out.append(magic, 8);
  const std::string header_bytes = header.dump();
  append_u32_le(out, static_cast<std::uint32_t>(header_bytes.size()));
  out += header_bytes;
  for (const Tensor* t : blobs) append_floats_le(out, t->data);
  return out;
}

struct Container {
  nlohmann::json header;
  std::string payload;
};

Container unpack_container(const std::filesystem::path& path, const char* magic) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 12) {
    throw FormatError(path.string() + ": truncated container, " + std::to_string(bytes.size()) +
                      " bytes");
  }
  if (std::memcmp(bytes.data(), magic, 8) != 0) {
    throw FormatError(path.string() + ": bad magic at offset 0, expected \"" + std::string(magic) +
                      "\", got \"" + bytes.substr(0, 8) + "\"");
  }
  std::uint32_t header_len = 0;
  for (int i = 3; i >= 0; --i) {
    header_len = (header_len << 8) | static_cast<std::uint8_t>(bytes[8 + i]);
  }
  if (bytes.size() < 12 + static_cast<std::size_t>(header_len)) {
    throw FormatError(path.string() + ": truncated header at offset 12, need " +
                      std::to_string(header_len) + " bytes");
  }
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.substr(12, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": header is not valid JSON: " + e.what());
  }
  c.payload = bytes.substr(12 + header_len);
  return c;
}

std::vector<float> floats_from_payload(const std::string& payload, std::size_t offset,
                                       std::size_t count, const std::filesystem::path& path) {
  if (payload.size() < (offset + count) * 4) {
    throw FormatError(path.string() + ": truncated parameter data at offset " +
                      std::to_string(12 + offset * 4));
  }
  std::vector<float> out(count);
  std::memcpy(out.data(), payload.data() + offset * 4, count * 4);
  return out;
}

}  // namespace

nlohmann::json to_json(const nn::LayerSpec& layer) {
  switch (layer.kind) {
    case nn::LayerSpec::Kind::Conv:
      return {{"kind", "conv"},
              {"filters", layer.filters},
              {"stride", layer.stride},
              {"fh", layer.fh},
              {"fw", layer.fw},
              {"act", nn::activation_name(layer.act)}};
    case nn::LayerSpec::Kind::Fc:
      return {{"kind", "fc"}, {"units", layer.units}, {"act", nn::activation_name(layer.act)}};
    case nn::LayerSpec::Kind::Dropout:
      return {{"kind", "dropout"}, {"keep", layer.keep_prob}};
  }
  throw ConfigError("unknown layer kind");
}

nn::LayerSpec layer_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "conv") {
    return nn::LayerSpec::conv(j.at("filters").get<int>(), j.at("stride").get<int>(),
                               j.at("fh").get<int>(), j.at("fw").get<int>(),
                               nn::activation_from_name(j.at("act").get<std::string>()));
  }
  if (kind == "fc") {
    return nn::LayerSpec::fc(j.at("units").get<int>(),
                             nn::activation_from_name(j.at("act").get<std::string>()));
  }
  if (kind == "dropout") {
    return nn::LayerSpec::dropout(j.at("keep").get<float>());
  }
  throw FormatError("unknown layer kind '" + kind + "'");
}

nlohmann::json to_json(const nn::NetworkSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) layers.push_back(to_json(l));
  return {{"input_shape", spec.input_shape}, {"layers", layers}};
}

nn::NetworkSpec network_from_json(const nlohmann::json& j) {
  nn::NetworkSpec spec;
  spec.input_shape = j.at("input_shape").get<std::vector<int>>();
  for (const auto& l : j.at("layers")) spec.layers.push_back(layer_from_json(l));
  return spec;
}

void save_checkpoint(const std::filesystem::path& path, const nn::Checkpoint& ckpt) {
  nlohmann::json params = nlohmann::json::array();
  std::vector<const Tensor*> blobs;
  for (const auto& [name, tensor] : ckpt.params) {
    params.push_back({{"name", name}, {"shape", tensor.shape}});
    blobs.push_back(&tensor);
  }
  nlohmann::json header = {{"spec", to_json(ckpt.spec)},
                           {"params", params},
                           {"seed", ckpt.seed},
                           {"iterations", ckpt.iterations}};
  write_file_atomic(path, pack_container(kCheckpointMagic, header, blobs));
}

nn::Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Container c = unpack_container(path, kCheckpointMagic);
  nn::Checkpoint ckpt;
  try {
    ckpt.spec = network_from_json(c.header.at("spec"));
    ckpt.seed = c.header.at("seed").get<std::uint64_t>();
    ckpt.iterations = c.header.at("iterations").get<std::int64_t>();
    std::size_t offset = 0;
    for (const auto& p : c.header.at("params")) {
      const std::string name = p.at("name").get<std::string>();
      const std::vector<int> shape = p.at("shape").get<std::vector<int>>();
      const std::size_t count = static_cast<std::size_t>(numel_of(shape));
      ckpt.params.emplace_back(name,
                               Tensor(shape, floats_from_payload(c.payload, offset, count, path)));
      offset += count;
    }
    if (c.payload.size() != offset * 4) {
      throw FormatError(path.string() + ": parameter data length " +
                        std::to_string(c.payload.size()) + " does not match header (" +
                        std::to_string(offset * 4) + " bytes expected)");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed checkpoint header: " + e.what());
  }
  return ckpt;
}

void save_mask(const std::filesystem::path& path, const lan::AttentionMask& mask) {
  nlohmann::json header = {{"shape", mask.values.shape}};
  write_file_atomic(path, pack_container(kMaskMagic, header, {&mask.values}));
}

lan::AttentionMask load_mask(const std::filesystem::path& path) {
  Container c = unpack_container(path, kMaskMagic);
  try {
    const std::vector<int> shape = c.header.at("shape").get<std::vector<int>>();
    const std::size_t count = static_cast<std::size_t>(numel_of(shape));
    if (c.payload.size() != count * 4) {
      throw FormatError(path.string() + ": mask data length " + std::to_string(c.payload.size()) +
                        " does not match shape " + shape_str(shape));
    }
    return lan::AttentionMask::from_tensor(
        Tensor(shape, floats_from_payload(c.payload, 0, count, path)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed mask header: " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace lankit
