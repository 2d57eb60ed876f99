#include "nair/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nair/error.hpp"
#include "nair/io.hpp"

namespace nair {

void LabelRule::validate() const {
  if (!(delta >= 0.0 && delta < 4.0)) throw ConfigError("label rule delta must lie in [0, 4)");
}

LabelDecision label_from_score(double score, const LabelRule& rule) {
  rule.validate();
  if (!(score >= 1.0 && score <= 10.0)) {
    throw RangeError("aesthetic score " + std::to_string(score) + " outside [1, 10]");
  }
  if (score < rule.pivot - rule.delta) return LabelDecision::kLow;
  if (score >= rule.pivot + rule.delta) return LabelDecision::kHigh;
  return LabelDecision::kDiscard;
}

std::vector<std::string> tokenize(std::string_view text) {
  static constexpr std::string_view kPunctuation = ".,!?;:'\"()";
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto ch = static_cast<unsigned char>(raw);
    if (std::isspace(ch)) {
      flush();
    } else if (kPunctuation.find(raw) != std::string_view::npos) {
      flush();
      tokens.emplace_back(1, raw);
    } else {
      current.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  flush();
  return tokens;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kStartToken));
  add(std::string(kEndToken));
  add(std::string(kUnkToken));
}

void Vocabulary::add(std::string token) {
  if (ids_.count(token)) throw DataError("duplicate vocabulary token '" + token + "'");
  ids_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> corpus, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  for (auto& [tok, n] : kept) {
    if (vocab.ids_.count(tok)) continue;  // a literal reserved spelling in the corpus
    vocab.add(tok);
  }
  return vocab;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  const std::string_view reserved[] = {kPadToken, kStartToken, kEndToken, kUnkToken};
  if (lines.size() < token::kNumReserved) throw DataError("vocabulary lacks the reserved tokens");
  for (std::size_t i = 0; i < token::kNumReserved; ++i) {
    if (lines[i] != reserved[i]) {
      throw DataError("vocabulary line " + std::to_string(i) + " must be " + std::string(reserved[i]));
    }
  }
  Vocabulary vocab;
  for (std::size_t i = token::kNumReserved; i < lines.size(); ++i) {
    if (lines[i].empty()) throw DataError("empty vocabulary entry at line " + std::to_string(i));
    vocab.add(lines[i]);
  }
  return vocab;
}

std::string Vocabulary::to_text() const {
  std::string out;
  for (const auto& tok : tokens_) {
    out += tok;
    out.push_back('\n');
  }
  return out;
}

std::optional<std::size_t> Vocabulary::find(std::string_view tok) const {
  auto it = ids_.find(std::string(tok));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::id(std::string_view tok) const { return find(tok).value_or(token::kUnk); }

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) throw IndexError("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::vector<std::size_t> encode_caption(std::span<const std::string> tokens, const Vocabulary& vocab) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) ids.push_back(vocab.id(tok));
  return ids;
}

std::vector<std::string> decode_caption(std::span<const std::size_t> ids, const Vocabulary& vocab) {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (std::size_t id : ids) tokens.push_back(vocab.token(id));
  return tokens;
}

// ---------------------------------------------------------------------------
// Examples

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    if (split_name(s) == name) return s;
  }
  throw DataError("unknown split '" + std::string(name) + "'");
}

std::string_view modality_name(Modality modality) {
  return modality == Modality::kFeatures ? "features" : "images";
}

std::vector<std::vector<std::string>> comment_tokens(const ReviewExample& example, std::size_t max_length) {
  std::vector<std::vector<std::string>> out;
  out.reserve(example.comments.size());
  for (const auto& text : example.comments) {
    auto tokens = tokenize(text);
    if (tokens.size() > max_length) tokens.resize(max_length);
    out.push_back(std::move(tokens));
  }
  return out;
}

std::vector<const ReviewExample*> Dataset::split(Split which) const {
  std::vector<const ReviewExample*> out;
  for (const auto& ex : examples) {
    if (ex.split == which) out.push_back(&ex);
  }
  return out;
}

std::vector<std::vector<std::string>> Dataset::corpus(Split which) const {
  std::vector<std::vector<std::string>> out;
  for (const ReviewExample* ex : split(which)) {
    for (auto& tokens : comment_tokens(*ex)) out.push_back(std::move(tokens));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

namespace {

constexpr std::string_view kFeaturesMagic = "NAIRF1";
constexpr std::string_view kImagesMagic = "NAIRI1";

}  // namespace

std::string serialize_inputs(Modality modality, std::span<const Tensor> inputs) {
  std::string out;
  if (modality == Modality::kFeatures) {
    const std::size_t dim = inputs.empty() ? 0 : inputs[0].size();
    out += kFeaturesMagic;
    io::put_u32(out, static_cast<std::uint32_t>(inputs.size()));
    io::put_u32(out, static_cast<std::uint32_t>(dim));
    for (const Tensor& t : inputs) {
      if (t.rank() != 1 || t.size() != dim) throw DimensionError("feature rows must share one width");
      for (double v : t.data()) io::put_f64(out, v);
    }
  } else {
    out += kImagesMagic;
    io::put_u32(out, static_cast<std::uint32_t>(inputs.size()));
    for (std::uint32_t d : {3u, 32u, 32u}) io::put_u32(out, d);
    for (const Tensor& t : inputs) {
      if (t.shape() != Shape{3, 32, 32}) throw DimensionError("images must be [3x32x32]");
      for (double v : t.data()) io::put_f64(out, v);
    }
  }
  return out;
}

std::vector<Tensor> parse_inputs(std::string_view bytes, Modality* modality) {
  io::Reader in(bytes, "input file");
  const std::string_view magic = in.take(6);
  std::vector<Tensor> out;
  if (magic == kFeaturesMagic) {
    const std::uint32_t count = in.u32();
    const std::uint32_t dim = in.u32();
    if (count > 0 && dim == 0) throw DataError("features.bin: zero feature width");
    for (std::uint32_t i = 0; i < count; ++i) {
      std::vector<double> row(dim);
      for (double& v : row) v = in.f64();
      out.push_back(Tensor::vector(std::move(row)));
    }
    if (modality) *modality = Modality::kFeatures;
  } else if (magic == kImagesMagic) {
    const std::uint32_t count = in.u32();
    Shape shape{in.u32(), in.u32(), in.u32()};
    if (shape != Shape{3, 32, 32}) throw DataError("images.bin: images must be 3x32x32");
    for (std::uint32_t i = 0; i < count; ++i) {
      std::vector<double> pixels(3 * 32 * 32);
      for (double& v : pixels) {
        v = in.f64();
        if (!(v >= 0.0 && v <= 1.0)) throw DataError("images.bin: pixel outside [0, 1]");
      }
      out.push_back(Tensor(shape, std::move(pixels)));
    }
    if (modality) *modality = Modality::kImages;
  } else {
    throw DataError("unrecognized input file magic");
  }
  if (!in.done()) throw DataError("input file has trailing bytes");
  return out;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  std::string manifest;
  std::vector<Tensor> inputs;
  for (const auto& ex : dataset.examples) {
    nlohmann::ordered_json row;
    row["id"] = ex.id;
    row["score"] = ex.score;
    row["label"] = label_name(ex.label);
    row["split"] = split_name(ex.split);
    row["modality"] = modality_name(dataset.modality);
    row["comments"] = ex.comments;
    manifest += row.dump();
    manifest.push_back('\n');
    inputs.push_back(ex.input);
  }
  io::write_file(dir / kManifestFile, manifest);
  const auto binary = dataset.modality == Modality::kFeatures ? kFeaturesFile : kImagesFile;
  const auto other = dataset.modality == Modality::kFeatures ? kImagesFile : kFeaturesFile;
  io::write_file(dir / binary, serialize_inputs(dataset.modality, inputs));
  std::filesystem::remove(dir / other);
}

Dataset read_dataset(const std::filesystem::path& dir, const LabelRule& rule) {
  const std::string manifest = io::read_file(dir / kManifestFile);
  Dataset dataset;
  std::optional<Modality> declared;
  std::istringstream lines(manifest);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "manifest line " + std::to_string(line_no);
    ReviewExample ex;
    try {
      const auto row = nlohmann::json::parse(line);
      ex.id = row.at("id").get<std::string>();
      ex.score = row.at("score").get<double>();
      const auto label = row.at("label").get<std::string>();
      if (label != "low" && label != "high") throw DataError(where + ": bad label '" + label + "'");
      ex.label = label == "high" ? Label::kHigh : Label::kLow;
      ex.split = parse_split(row.at("split").get<std::string>());
      ex.comments = row.at("comments").get<std::vector<std::string>>();
      const auto modality = row.at("modality").get<std::string>();
      Modality m;
      if (modality == "features") {
        m = Modality::kFeatures;
      } else if (modality == "images") {
        m = Modality::kImages;
      } else {
        throw DataError(where + ": bad modality '" + modality + "'");
      }
      if (declared && *declared != m) throw DataError(where + ": mixed modalities in one dataset");
      declared = m;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    LabelDecision decision;
    try {
      decision = label_from_score(ex.score, rule);
    } catch (const RangeError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (decision == LabelDecision::kDiscard) {
      throw DataError(where + ": score " + std::to_string(ex.score) + " falls in the discard band");
    }
    if ((decision == LabelDecision::kHigh) != (ex.label == Label::kHigh)) {
      throw DataError(where + ": label disagrees with score " + std::to_string(ex.score));
    }
    dataset.examples.push_back(std::move(ex));
  }
  if (dataset.examples.empty()) throw DataError("manifest is empty");
  dataset.modality = *declared;
  const auto binary = dataset.modality == Modality::kFeatures ? kFeaturesFile : kImagesFile;
  Modality found;
  auto inputs = parse_inputs(io::read_file(dir / binary), &found);
  if (found != dataset.modality) throw DataError("binary input file does not match the manifest modality");
  if (inputs.size() != dataset.examples.size()) {
    throw DataError("manifest lists " + std::to_string(dataset.examples.size()) +
                    " examples but the input file holds " + std::to_string(inputs.size()));
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) dataset.examples[i].input = inputs[i];
  return dataset;
}

void write_vocab(const std::filesystem::path& path, const Vocabulary& vocab) {
  io::write_file(path, vocab.to_text());
}

Vocabulary read_vocab(const std::filesystem::path& path) { return Vocabulary::parse(io::read_file(path)); }

}  // namespace nair
