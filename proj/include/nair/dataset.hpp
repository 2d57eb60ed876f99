#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nair/tensor.hpp"
#include "nair/types.hpp"

namespace nair {

// ---------------------------------------------------------------------------
// Labels

enum class LabelDecision { kLow, kHigh, kDiscard };

// Scores below pivot - delta are Low, scores at or above pivot + delta are
// High, the band in between is discarded.
struct LabelRule {
  double delta = 0.5;
  double pivot = 5.0;

  void validate() const;
};

LabelDecision label_from_score(double score, const LabelRule& rule = {});

// ---------------------------------------------------------------------------
// Text

// Lowercases, splits on whitespace and emits each of . , ! ? ; : ' " ( ) as a
// separate token.
std::vector<std::string> tokenize(std::string_view text);

inline constexpr std::size_t kMaxCaptionLength = 30;
inline constexpr std::size_t kDefaultMinCount = 4;

// Token <-> id bijection. Ids 0..3 are PAD, START, END, UNK; their spellings
// are uppercase so tokenize() can never produce them.
class Vocabulary {
 public:
  static constexpr std::string_view kPadToken = "<PAD>";
  static constexpr std::string_view kStartToken = "<START>";
  static constexpr std::string_view kEndToken = "<END>";
  static constexpr std::string_view kUnkToken = "<UNK>";

  Vocabulary();

  // Keeps tokens seen at least `min_count` times; ids by descending count,
  // ties in lexicographic order.
  static Vocabulary build(std::span<const std::vector<std::string>> corpus,
                          std::size_t min_count = kDefaultMinCount);
  // One token per line, line index = id.
  static Vocabulary parse(std::string_view text);
  std::string to_text() const;

  std::size_t size() const { return tokens_.size(); }
  std::optional<std::size_t> find(std::string_view token) const;
  // Id for `token`, UNK when absent.
  std::size_t id(std::string_view token) const;
  const std::string& token(std::size_t id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// w_1..w_L with out-of-vocabulary tokens mapped to UNK. No START/END.
std::vector<std::size_t> encode_caption(std::span<const std::string> tokens, const Vocabulary& vocab);
std::vector<std::string> decode_caption(std::span<const std::size_t> ids, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Examples and on-disk layout

enum class Split { kTrain, kValid, kTest };
enum class Modality { kFeatures, kImages };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);
std::string_view modality_name(Modality modality);

struct ReviewExample {
  std::string id;
  double score = 0.0;
  Label label = Label::kLow;
  Split split = Split::kTrain;
  Tensor input;                       // [feature_dim] or [3, 32, 32]
  std::vector<std::string> comments;  // raw text
};

// Tokenized comments, each truncated to `max_length` tokens.
std::vector<std::vector<std::string>> comment_tokens(const ReviewExample& example,
                                                     std::size_t max_length = kMaxCaptionLength);

struct Dataset {
  Modality modality = Modality::kFeatures;
  std::vector<ReviewExample> examples;

  std::vector<const ReviewExample*> split(Split which) const;
  // Token lists of every comment in a split, for vocabulary building.
  std::vector<std::vector<std::string>> corpus(Split which) const;
};

// Directory layout: manifest.jsonl, features.bin | images.bin, vocab.txt.
//   manifest.jsonl: {"id","score","label","split","modality","comments"}
//   features.bin:   "NAIRF1" u32 count u32 dim f64[count*dim]
//   images.bin:     "NAIRI1" u32 count u32 3 u32 32 u32 32 f64[count*3072]
inline constexpr std::string_view kManifestFile = "manifest.jsonl";
inline constexpr std::string_view kFeaturesFile = "features.bin";
inline constexpr std::string_view kImagesFile = "images.bin";
inline constexpr std::string_view kVocabFile = "vocab.txt";

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
// Rejects examples whose stored label disagrees with `rule` or falls in the
// discard band.
Dataset read_dataset(const std::filesystem::path& dir, const LabelRule& rule = {});

std::string serialize_inputs(Modality modality, std::span<const Tensor> inputs);
// Parses either binary layout; the magic decides the modality.
std::vector<Tensor> parse_inputs(std::string_view bytes, Modality* modality = nullptr);

void write_vocab(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary read_vocab(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t n_images = 100;
  // Number of distinct content nouns comments draw from.
  std::size_t vocab_size = 16;
  std::size_t feature_dim = 2048;
  std::size_t comments_per_image = 6;
  Modality modality = Modality::kFeatures;
  // Distance of each class mean from the origin along a random direction.
  double class_separation = 3.0;
  // Slots: {adj} is a class keyword, {noun} a content word. Empty = built-in.
  std::vector<std::string> caption_templates;
};

// Balanced Low/High examples with class-conditional Gaussian features (or
// class-conditional images) and template comments that use class-specific
// adjectives. Split 80/10/10 after a seeded shuffle.
Dataset synth_dataset(const SynthConfig& config);

const std::vector<std::string>& default_caption_templates();

}  // namespace nair
