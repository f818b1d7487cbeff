#include "lankit/pgm.hpp"

#include <cmath>

#include "lankit/serialize.hpp"

namespace lankit {

std::string pgm_bytes(const Tensor& image) {
  Tensor img = image;
  if (img.rank() == 3 && img.shape[0] == 1) img.shape = {img.shape[1], img.shape[2]};
  if (img.rank() != 2) {
    throw ShapeError("pgm export needs a (h,w) or (1,h,w) tensor, got " + shape_str(image.shape));
  }
  const int h = img.shape[0], w = img.shape[1];
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + img.data.size());
  for (float v : img.data) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw NumericError("pgm export: value " + std::to_string(v) + " outside [0,1]");
    }
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::floor(255.0f * v + 0.5f))));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  write_file_atomic(path, pgm_bytes(image));
}

}  // namespace lankit
