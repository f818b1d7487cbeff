#include "lankit/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lankit/serialize.hpp"

namespace lankit::data {

// ---------------------------------------------------------------------------
// vocabulary

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.empty() || tokens[0] != "UNK") {
    throw ConfigError("vocabulary must reserve index 0 for UNK");
  }
  Vocabulary v;
  v.tokens = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens.size(); ++i) {
    if (!v.index.emplace(v.tokens[i], static_cast<int>(i)).second) {
      throw ConfigError("duplicate vocabulary token '" + v.tokens[i] + "'");
    }
  }
  return v;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? kUnkIndex : it->second;
}

// ---------------------------------------------------------------------------
// IDX ingestion

namespace {

std::uint32_t read_u32_be(const std::string& bytes, std::size_t offset,
                          const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) {
    throw FormatError(path.string() + ": truncated at offset " + std::to_string(offset));
  }
  return (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[offset])) << 24) |
         (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[offset + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[offset + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[offset + 3]));
}

}  // namespace

std::vector<ImageSample> load_idx(const std::filesystem::path& images_path,
                                  const std::filesystem::path& labels_path) {
  const std::string img_bytes = read_file(images_path);
  const std::string lbl_bytes = read_file(labels_path);

  const std::uint32_t img_magic = read_u32_be(img_bytes, 0, images_path);
  if (img_magic != 0x00000803u) {
    std::ostringstream os;
    os << images_path.string() << ": bad magic number 0x" << std::hex << img_magic
       << " at offset 0, expected 0x803";
    throw FormatError(os.str());
  }
  const std::uint32_t n = read_u32_be(img_bytes, 4, images_path);
  const std::uint32_t rows = read_u32_be(img_bytes, 8, images_path);
  const std::uint32_t cols = read_u32_be(img_bytes, 12, images_path);
  const std::size_t expected = 16 + static_cast<std::size_t>(n) * rows * cols;
  if (img_bytes.size() < expected) {
    throw FormatError(images_path.string() + ": truncated image data, " +
                      std::to_string(img_bytes.size()) + " bytes but " + std::to_string(expected) +
                      " expected from header");
  }

  const std::uint32_t lbl_magic = read_u32_be(lbl_bytes, 0, labels_path);
  if (lbl_magic != 0x00000801u) {
    std::ostringstream os;
    os << labels_path.string() << ": bad magic number 0x" << std::hex << lbl_magic
       << " at offset 0, expected 0x801";
    throw FormatError(os.str());
  }
  const std::uint32_t n_labels = read_u32_be(lbl_bytes, 4, labels_path);
  if (n_labels != n) {
    throw FormatError(labels_path.string() + ": label count " + std::to_string(n_labels) +
                      " does not match image count " + std::to_string(n));
  }
  if (lbl_bytes.size() < 8 + static_cast<std::size_t>(n)) {
    throw FormatError(labels_path.string() + ": truncated label data at offset " +
                      std::to_string(lbl_bytes.size()));
  }

  std::vector<ImageSample> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    ImageSample s;
    s.label = static_cast<std::uint8_t>(lbl_bytes[8 + i]);
    if (s.label > 9) {
      throw FormatError(labels_path.string() + ": label " + std::to_string(s.label) +
                        " outside 0..9 at index " + std::to_string(i));
    }
    s.pixels = Tensor::zeros({1, static_cast<int>(rows), static_cast<int>(cols)});
    const std::size_t base = 16 + static_cast<std::size_t>(i) * rows * cols;
    for (std::size_t p = 0; p < static_cast<std::size_t>(rows) * cols; ++p) {
      s.pixels.data[p] = static_cast<float>(static_cast<std::uint8_t>(img_bytes[base + p])) / 255.0f;
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// translated digits

std::vector<std::pair<int, int>> valid_offsets(const TranslatedConfig& cfg) {
  if (cfg.digit_size != 12 && cfg.digit_size != 7) {
    throw ConfigError("digit size must be 12 or 7, got " + std::to_string(cfg.digit_size));
  }
  if (cfg.excluded) {
    const Box& e = *cfg.excluded;
    if (e.x0 < 0 || e.y0 < 0 || e.x1 > 28 || e.y1 > 28 || e.width() <= 0 || e.height() <= 0) {
      throw ConfigError("excluded region must be a non-empty box inside the 28x28 canvas");
    }
  }
  const int s = cfg.digit_size;
  std::vector<std::pair<int, int>> offsets;
  for (int y0 = 0; y0 + s <= 28; ++y0) {
    for (int x0 = 0; x0 + s <= 28; ++x0) {
      const Box b{x0, y0, x0 + s, y0 + s};
      if (cfg.excluded && b.intersects(*cfg.excluded)) continue;
      offsets.emplace_back(x0, y0);
    }
  }
  if (offsets.empty()) {
    throw ConfigError("excluded region leaves no valid digit placement");
  }
  return offsets;
}

std::vector<ImageSample> make_translated(const std::vector<ImageSample>& sources,
                                         const TranslatedConfig& cfg) {
  const auto offsets = valid_offsets(cfg);
  Rng rng(cfg.seed);
  std::vector<ImageSample> out;
  out.reserve(sources.size());
  for (const ImageSample& src : sources) {
    Tensor small = downscale_digit(src.pixels, cfg.digit_size);
    const auto [x0, y0] = offsets[rng.index(offsets.size())];
    ImageSample s;
    s.label = src.label;
    s.pixels = place_digit(small, x0, y0);
    s.boxes["digit"] = Box{x0, y0, x0 + cfg.digit_size, y0 + cfg.digit_size};
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// tank / forest scenes

namespace {

constexpr int kTankCanvas = 32;

float& px(Tensor& img, int x, int y) {
  return img.data[static_cast<std::size_t>(y) * kTankCanvas + x];
}

void fill_rect(Tensor& img, int x0, int y0, int x1, int y1, float value) {
  for (int y = std::max(0, y0); y < std::min(kTankCanvas, y1); ++y) {
    for (int x = std::max(0, x0); x < std::min(kTankCanvas, x1); ++x) {
      px(img, x, y) = std::clamp(value, 0.0f, 1.0f);
    }
  }
}

// Isoceles triangle with apex at (ax, ay), opening downward, plus a stem.
Box draw_tree(Tensor& img, int ax, int ay, int height, float value) {
  for (int r = 0; r < height; ++r) {
    const int half = static_cast<int>(std::round(0.45f * (r + 1)));
    fill_rect(img, ax - half, ay + r, ax + half + 1, ay + r + 1, value);
  }
  fill_rect(img, ax, ay + height, ax + 1, ay + height + 2, value * 0.8f);
  return Box{ax - height / 2, ay, ax + height / 2 + 1, ay + height + 2};
}

Box draw_tank(Tensor& img, Rng& rng, float bg_base) {
  const int w = rng.range_int(7, 9);
  const int h = rng.range_int(4, 5);
  const int x0 = rng.range_int(2, kTankCanvas - w - 2);
  const int y0 = rng.range_int(18, 26);
  const float body = std::clamp(bg_base + rng.uniform(0.05f, 0.09f), 0.0f, 1.0f);
  fill_rect(img, x0, y0, x0 + w, y0 + h, body);
  // turret with a barrel poking out one side
  const int tw = 3, th = 2;
  const int tx = x0 + (w - tw) / 2;
  const int ty = y0 - th;
  fill_rect(img, tx, ty, tx + tw, ty + th, body);
  const bool barrel_right = rng.bernoulli(0.5f);
  const int by = ty + th / 2;
  if (barrel_right) {
    fill_rect(img, tx + tw, by, std::min(kTankCanvas, tx + tw + 4), by + 1, body);
  } else {
    fill_rect(img, std::max(0, tx - 4), by, tx, by + 1, body);
  }
  const int bx0 = barrel_right ? x0 : std::max(0, tx - 4);
  const int bx1 = barrel_right ? std::min(kTankCanvas, tx + tw + 4) : x0 + w;
  return Box{std::min(x0, bx0), ty, std::max(x0 + w, bx1), y0 + h};
}

Box draw_cloud(Tensor& img, Rng& rng) {
  const int cx = rng.range_int(7, 24);
  const int cy = rng.range_int(3, 6);
  const int rx = rng.range_int(5, 8);
  const int ry = rng.range_int(2, 3);
  const float value = rng.uniform(0.82f, 0.95f);
  for (int y = std::max(0, cy - ry); y <= std::min(kTankCanvas - 1, cy + ry); ++y) {
    for (int x = std::max(0, cx - rx); x <= std::min(kTankCanvas - 1, cx + rx); ++x) {
      const float nx = static_cast<float>(x - cx) / rx;
      const float ny = static_cast<float>(y - cy) / ry;
      const float rho = nx * nx + ny * ny;
      if (rho <= 1.0f) {
        px(img, x, y) = std::clamp(value * (1.0f - 0.25f * rho), 0.0f, 1.0f);
      }
    }
  }
  return Box{std::max(0, cx - rx), std::max(0, cy - ry), std::min(kTankCanvas, cx + rx + 1),
             std::min(kTankCanvas, cy + ry + 1)};
}

}  // namespace

std::vector<ImageSample> gen_tank_forest(int n, const TankConfig& cfg, bool correlated) {
  if (n < 1) throw ConfigError("gen_tank_forest: n must be >= 1");
  if (cfg.trees_min < 0 || cfg.trees_max < cfg.trees_min) {
    throw ConfigError("gen_tank_forest: invalid tree count range");
  }

  // Exactly balanced labels in shuffled order.
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
  Rng label_rng(split_seed(cfg.seed, 0x7A17));
  label_rng.shuffle(labels);

  std::vector<ImageSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(split_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    ImageSample s;
    s.label = labels[static_cast<std::size_t>(i)];
    s.pixels = Tensor::zeros({1, kTankCanvas, kTankCanvas});

    const float bg_base = rng.uniform(0.16f, 0.20f);
    for (float& v : s.pixels.data) v = bg_base + rng.uniform(0.0f, 0.04f);

    // Tank goes in before the trees so canopies can occlude it.
    if (s.label == 1) {
      s.boxes["tank"] = draw_tank(s.pixels, rng, bg_base);
    }
    const int trees = rng.range_int(cfg.trees_min, cfg.trees_max);
    for (int t = 0; t < trees; ++t) {
      const int ax = rng.range_int(1, kTankCanvas - 2);
      const int ay = rng.range_int(6, 24);
      const int height = rng.range_int(4, 7);
      draw_tree(s.pixels, ax, ay, height, rng.uniform(0.04f, 0.12f));
    }
    const bool cloud = correlated ? (s.label == 1) : rng.bernoulli(cfg.cloud_prob);
    if (cloud) {
      s.boxes["cloud"] = draw_cloud(s.pixels, rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// keyword corpus

namespace {

// Deterministic pronounceable token for an index: two syllables from a fixed
// onset x vowel table, with a numeric suffix once the table is exhausted.
std::string make_token(int i) {
  static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                 "p", "r", "s", "t", "v", "z", "ch", "st"};
  static const char* vowels[] = {"a", "e", "i", "o", "u"};
  constexpr int kSyllables = 16 * 5;
  auto syllable = [](int s) {
    return std::string(onsets[s / 5]) + vowels[s % 5];
  };
  const int combo = i % (kSyllables * kSyllables);
  std::string tok = syllable(combo / kSyllables) + syllable(combo % kSyllables);
  if (i >= kSyllables * kSyllables) tok += std::to_string(i / (kSyllables * kSyllables));
  return tok;
}

BowSample make_bow(const Vocabulary& vocab, std::vector<std::string> words, int label) {
  BowSample s;
  s.label = label;
  s.counts = Tensor::zeros({vocab.size()});
  for (const std::string& w : words) {
    s.counts.data[static_cast<std::size_t>(vocab.lookup(w))] += 1.0f;
  }
  s.words = std::move(words);
  return s;
}

}  // namespace

Corpus gen_corpus(const CorpusConfig& cfg) {
  if (cfg.classes < 2) throw ConfigError("gen_corpus: need at least 2 classes");
  if (cfg.keywords_per_class < 1) throw ConfigError("gen_corpus: need at least 1 keyword per class");
  if (cfg.documents < 1) throw ConfigError("gen_corpus: need at least 1 document");
  if (cfg.len_min < 2 || cfg.len_max < cfg.len_min) {
    throw ConfigError("gen_corpus: invalid document length range");
  }
  const int keyword_count = cfg.classes * cfg.keywords_per_class;
  if (cfg.vocab_size < keyword_count + 2) {
    throw ConfigError("vocabulary size " + std::to_string(cfg.vocab_size) +
                      " smaller than keyword union " + std::to_string(keyword_count) +
                      " plus UNK and filler");
  }

  std::vector<std::string> tokens;
  tokens.reserve(static_cast<std::size_t>(cfg.vocab_size));
  tokens.emplace_back("UNK");
  for (int i = 1; i < cfg.vocab_size; ++i) tokens.push_back(make_token(i - 1));

  Corpus corpus;
  corpus.vocab = Vocabulary::from_tokens(std::move(tokens));
  for (int c = 0; c < cfg.classes; ++c) {
    std::vector<std::string> kws;
    for (int k = 0; k < cfg.keywords_per_class; ++k) {
      kws.push_back(corpus.vocab.tokens[static_cast<std::size_t>(1 + c * cfg.keywords_per_class + k)]);
    }
    corpus.class_keywords.push_back(std::move(kws));
  }
  const int filler_lo = 1 + keyword_count;
  const int filler_count = cfg.vocab_size - filler_lo;

  corpus.samples.reserve(static_cast<std::size_t>(cfg.documents));
  for (int i = 0; i < cfg.documents; ++i) {
    Rng rng(split_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    const int label = i % cfg.classes;
    const int length = rng.range_int(cfg.len_min, cfg.len_max);
    const int n_keywords = std::min(length, rng.range_int(2, 5));
    std::vector<std::string> words;
    words.reserve(static_cast<std::size_t>(length));
    for (int k = 0; k < n_keywords; ++k) {
      const auto& kws = corpus.class_keywords[static_cast<std::size_t>(label)];
      words.push_back(kws[rng.index(kws.size())]);
    }
    for (int k = n_keywords; k < length; ++k) {
      const int idx = filler_lo + static_cast<int>(rng.index(static_cast<std::size_t>(filler_count)));
      words.push_back(corpus.vocab.tokens[static_cast<std::size_t>(idx)]);
    }
    rng.shuffle(words);
    corpus.samples.push_back(make_bow(corpus.vocab, std::move(words), label));
  }
  return corpus;
}

Corpus load_corpus_tsv(const std::filesystem::path& path, int vocab_size) {
  if (vocab_size < 2) throw ConfigError("vocab size must be >= 2");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  struct RawDoc {
    std::string label;
    std::vector<std::string> tokens;
  };
  std::vector<RawDoc> docs;
  std::map<std::string, std::int64_t> freq;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected \"<label>\\t<token> ...\"");
    }
    RawDoc doc;
    doc.label = line.substr(0, tab);
    std::istringstream toks(line.substr(tab + 1));
    std::string tok;
    while (toks >> tok) {
      ++freq[tok];
      doc.tokens.push_back(tok);
    }
    if (doc.tokens.empty()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": document has no tokens");
    }
    docs.push_back(std::move(doc));
  }
  if (docs.empty()) throw FormatError(path.string() + ": no documents");

  // Most frequent first; ties resolved by token text for stability.
  std::vector<std::pair<std::string, std::int64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens;
  tokens.emplace_back("UNK");
  for (const auto& [tok, count] : ranked) {
    if (static_cast<int>(tokens.size()) >= vocab_size) break;
    if (tok != "UNK") tokens.push_back(tok);
  }

  std::map<std::string, int> label_ids;
  for (const RawDoc& d : docs) label_ids.emplace(d.label, 0);
  int next_label = 0;
  for (auto& [name, id] : label_ids) id = next_label++;

  Corpus corpus;
  corpus.vocab = Vocabulary::from_tokens(std::move(tokens));
  for (const RawDoc& d : docs) {
    corpus.samples.push_back(make_bow(corpus.vocab, d.tokens, label_ids.at(d.label)));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// dataset persistence

std::vector<Tensor> Dataset::inputs() const {
  std::vector<Tensor> out;
  out.reserve(size());
  if (is_text()) {
    for (const BowSample& s : corpus.samples) out.push_back(s.counts);
  } else {
    for (const ImageSample& s : images) out.push_back(s.pixels);
  }
  return out;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(size());
  if (is_text()) {
    for (const BowSample& s : corpus.samples) out.push_back(s.label);
  } else {
    for (const ImageSample& s : images) out.push_back(s.label);
  }
  return out;
}

namespace {

nlohmann::json box_to_json(const Box& b) { return nlohmann::json::array({b.x0, b.y0, b.x1, b.y1}); }

Box box_from_json(const nlohmann::json& j) {
  return Box{j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

std::string float_blob(const std::vector<Tensor>& inputs) {
  std::string out;
  for (const Tensor& t : inputs) {
    const std::size_t bytes = t.data.size() * 4;
    const std::size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, t.data.data(), bytes);
  }
  return out;
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);

  nlohmann::json manifest = {
      {"format", "lankit-dataset-v1"},
      {"domain", ds.domain},
      {"seed", ds.seed},
      {"count", ds.size()},
      {"input_shape", ds.input_shape},
      {"num_classes", ds.num_classes},
      {"config", ds.config},
      {"files", {{"inputs", "inputs.f32"}, {"labels", "labels.u8"}}},
  };

  if (ds.is_text()) {
    manifest["vocab"] = ds.corpus.vocab.tokens;
    manifest["class_keywords"] = ds.corpus.class_keywords;
  } else {
    nlohmann::json samples = nlohmann::json::array();
    for (const ImageSample& s : ds.images) {
      nlohmann::json boxes = nlohmann::json::object();
      for (const auto& [name, box] : s.boxes) boxes[name] = box_to_json(box);
      samples.push_back({{"boxes", boxes}});
    }
    manifest["samples"] = samples;
  }

  std::string label_bytes;
  label_bytes.reserve(ds.size());
  for (int l : ds.labels()) {
    if (l < 0 || l > 255) throw ConfigError("label " + std::to_string(l) + " does not fit a byte");
    label_bytes.push_back(static_cast<char>(static_cast<unsigned char>(l)));
  }

  write_file_atomic(dir / "inputs.f32", float_blob(ds.inputs()));
  write_file_atomic(dir / "labels.u8", label_bytes);
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": invalid JSON: " + e.what());
  }

  Dataset ds;
  try {
    if (manifest.at("format").get<std::string>() != "lankit-dataset-v1") {
      throw FormatError(dir.string() + ": unknown dataset format");
    }
    ds.domain = manifest.at("domain").get<std::string>();
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.input_shape = manifest.at("input_shape").get<std::vector<int>>();
    ds.num_classes = manifest.at("num_classes").get<int>();
    ds.config = manifest.at("config");

    const std::size_t count = manifest.at("count").get<std::size_t>();
    const std::size_t per_sample = static_cast<std::size_t>(numel_of(ds.input_shape));
    const std::string input_bytes =
        read_file(dir / manifest.at("files").at("inputs").get<std::string>());
    const std::string label_bytes =
        read_file(dir / manifest.at("files").at("labels").get<std::string>());
    if (input_bytes.size() != count * per_sample * 4) {
      throw FormatError(dir.string() + ": input blob is " + std::to_string(input_bytes.size()) +
                        " bytes, expected " + std::to_string(count * per_sample * 4));
    }
    if (label_bytes.size() != count) {
      throw FormatError(dir.string() + ": label blob is " + std::to_string(label_bytes.size()) +
                        " bytes, expected " + std::to_string(count));
    }

    auto nth_input = [&](std::size_t i) {
      std::vector<float> data(per_sample);
      std::memcpy(data.data(), input_bytes.data() + i * per_sample * 4, per_sample * 4);
      return Tensor(ds.input_shape, std::move(data));
    };

    if (ds.is_text()) {
      ds.corpus.vocab =
          Vocabulary::from_tokens(manifest.at("vocab").get<std::vector<std::string>>());
      if (manifest.contains("class_keywords")) {
        ds.corpus.class_keywords =
            manifest.at("class_keywords").get<std::vector<std::vector<std::string>>>();
      }
      for (std::size_t i = 0; i < count; ++i) {
        BowSample s;
        s.counts = nth_input(i);
        s.label = static_cast<unsigned char>(label_bytes[i]);
        // Word order is not persisted; rebuild the multiset in vocab order.
        for (int v = 0; v < ds.corpus.vocab.size(); ++v) {
          const int reps = static_cast<int>(std::lround(s.counts.data[static_cast<std::size_t>(v)]));
          for (int r = 0; r < reps; ++r) {
            s.words.push_back(ds.corpus.vocab.tokens[static_cast<std::size_t>(v)]);
          }
        }
        ds.corpus.samples.push_back(std::move(s));
      }
    } else {
      const auto& samples = manifest.at("samples");
      if (samples.size() != count) {
        throw FormatError(dir.string() + ": sample metadata count mismatch");
      }
      for (std::size_t i = 0; i < count; ++i) {
        ImageSample s;
        s.pixels = nth_input(i);
        s.label = static_cast<unsigned char>(label_bytes[i]);
        for (const auto& [name, jbox] : samples.at(i).at("boxes").items()) {
          s.boxes[name] = box_from_json(jbox);
        }
        ds.images.push_back(std::move(s));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + ": malformed dataset manifest: " + e.what());
  }
  return ds;
}

}  // namespace lankit::data
