#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "lankit/lan.hpp"
#include "lankit/nn.hpp"
#include "lankit/tensor.hpp"

namespace lankit {

nlohmann::json to_json(const nn::LayerSpec& layer);
nn::LayerSpec layer_from_json(const nlohmann::json& j);
nlohmann::json to_json(const nn::NetworkSpec& spec);
nn::NetworkSpec network_from_json(const nlohmann::json& j);

// Checkpoint container: magic "LANCKPT1", 4-byte little-endian header length,
// UTF-8 JSON header (spec, parameter names/shapes/order, seed, iteration),
// then the parameters' raw little-endian float32 data in header order.
void save_checkpoint(const std::filesystem::path& path, const nn::Checkpoint& ckpt);
nn::Checkpoint load_checkpoint(const std::filesystem::path& path);

// Mask container: same layout with magic "LANMASK1"; header carries the shape.
void save_mask(const std::filesystem::path& path, const lan::AttentionMask& mask);
lan::AttentionMask load_mask(const std::filesystem::path& path);

// Writes to a temporary name in the same directory, then renames into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace lankit
