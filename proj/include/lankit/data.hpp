#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "lankit/rng.hpp"
#include "lankit/tensor.hpp"

namespace lankit::data {

// Half-open pixel box [x0,x1) x [y0,y1), x = column, y = row.
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool intersects(const Box& o) const {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }
  bool operator==(const Box& o) const = default;
};

struct ImageSample {
  Tensor pixels;  // (c,h,w), values in [0,1]
  int label = 0;
  std::map<std::string, Box> boxes;  // digit / tank / cloud regions
};

struct BowSample {
  Tensor counts;  // (vocab_size), nonnegative integer counts stored as floats
  int label = 0;
  std::vector<std::string> words;
};

// Ordered token list with a reserved UNK slot at index 0.
struct Vocabulary {
  static constexpr int kUnkIndex = 0;

  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;

  static Vocabulary from_tokens(std::vector<std::string> tokens);  // tokens[0] must be UNK
  int size() const { return static_cast<int>(tokens.size()); }
  int lookup(const std::string& token) const;  // UNK for out-of-vocabulary
};

// --- IDX ingestion -----------------------------------------------------

// Reads the classic big-endian IDX pair (images magic 0x00000803, labels
// 0x00000801). Pixels are normalized to [0,1] by dividing by 255.
std::vector<ImageSample> load_idx(const std::filesystem::path& images_path,
                                  const std::filesystem::path& labels_path);

// --- synthetic digit source --------------------------------------------

// Stroke-rendered 28x28 grayscale digits with per-sample jitter in geometry,
// thickness and intensity. Stands in for handwritten digit data so the
// pipelines are self-contained.
std::vector<ImageSample> gen_digits(int n, std::uint64_t seed);
Tensor render_digit(int digit, Rng& rng);  // (1,28,28)

// Box-average downscale of a 28x28 digit: size 12 uses the centered 24x24
// crop with 2x2 averaging, size 7 the full image with 4x4 averaging.
Tensor downscale_digit(const Tensor& src, int digit_size);

// Blank canvas with the downscaled digit copied at (x0,y0).
Tensor place_digit(const Tensor& small, int x0, int y0, int canvas = 28);

// --- translated digits --------------------------------------------------

struct TranslatedConfig {
  int digit_size = 12;  // 12 or 7
  std::optional<Box> excluded;
  std::uint64_t seed = 0;
};

// One output per source digit: downscaled and placed at an integer offset
// drawn uniformly over positions whose box avoids the excluded region.
std::vector<ImageSample> make_translated(const std::vector<ImageSample>& sources,
                                         const TranslatedConfig& cfg);

// All (x0,y0) placements valid under the config, in row-major order.
std::vector<std::pair<int, int>> valid_offsets(const TranslatedConfig& cfg);

// --- tank / forest scenes ------------------------------------------------

struct TankConfig {
  int trees_min = 5;
  int trees_max = 9;
  float cloud_prob = 0.5f;  // decorrelated mode only
  std::uint64_t seed = 0;
};

// 32x32 grayscale scenes of trees, optionally a camouflaged tank (label 1)
// and a cloud. correlated: cloud present iff tank present; decorrelated:
// cloud independent with cloud_prob. Labels are exactly balanced.
std::vector<ImageSample> gen_tank_forest(int n, const TankConfig& cfg, bool correlated);

// --- keyword corpus -------------------------------------------------------

struct CorpusConfig {
  int classes = 10;
  int keywords_per_class = 5;
  int vocab_size = 500;
  int documents = 1000;
  int len_min = 20;
  int len_max = 60;
  std::uint64_t seed = 0;
};

struct Corpus {
  Vocabulary vocab;
  std::vector<BowSample> samples;
  std::vector<std::vector<std::string>> class_keywords;
};

// Synthetic topic corpus: each document mixes >=2 of its class's keywords
// with filler tokens from a shared pool.
Corpus gen_corpus(const CorpusConfig& cfg);

// Ingestion hook for a pre-tokenized corpus: one document per line,
// "<label>\t<token> <token> ...". The vocabulary keeps the vocab_size-1 most
// frequent tokens (ties by token text) plus UNK.
Corpus load_corpus_tsv(const std::filesystem::path& path, int vocab_size);

// --- dataset persistence ---------------------------------------------------

// A generated dataset as stored on disk: JSON manifest plus raw blobs.
struct Dataset {
  std::string domain;  // translated | tanks | corpus | idx
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<int> input_shape;
  int num_classes = 0;

  std::vector<ImageSample> images;
  Corpus corpus;  // populated when domain == "corpus"

  bool is_text() const { return domain == "corpus"; }
  std::size_t size() const { return is_text() ? corpus.samples.size() : images.size(); }
  std::vector<Tensor> inputs() const;
  std::vector<int> labels() const;
};

void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace lankit::data
