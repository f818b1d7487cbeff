#pragma once

#include <filesystem>
#include <string>

#include "lankit/tensor.hpp"

namespace lankit {

// Binary PGM ("P5", maxval 255) of a (h,w) or (1,h,w) tensor with values in
// [0,1]. Each byte is round(255*v), half away from zero.
std::string pgm_bytes(const Tensor& image);
void write_pgm(const std::filesystem::path& path, const Tensor& image);

}  // namespace lankit
