#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "helpers.hpp"
#include "nair/dataset.hpp"
#include "nair/error.hpp"
#include "nair/io.hpp"
#include "nair/oracles/lda.hpp"

#include <nlohmann/json.hpp>

using namespace nair;
using nair::test::TempDir;
using nair::test::to_vec;

namespace {

using Tokens = std::vector<std::string>;

Dataset small_dataset(std::uint64_t seed, std::size_t n = 20, Modality modality = Modality::kFeatures) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_images = n;
  cfg.feature_dim = 6;
  cfg.modality = modality;
  return synth_dataset(cfg);
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("label rule examples") {
  CHECK(label_from_score(3.4) == LabelDecision::kLow);
  CHECK(label_from_score(5.5) == LabelDecision::kHigh);
  CHECK(label_from_score(5.0) == LabelDecision::kDiscard);
  CHECK(label_from_score(4.5) == LabelDecision::kDiscard);
  CHECK(label_from_score(4.4999) == LabelDecision::kLow);
  CHECK(label_from_score(1.0) == LabelDecision::kLow);
  CHECK(label_from_score(10.0) == LabelDecision::kHigh);
  CHECK_THROWS_AS(label_from_score(0.99), RangeError);
  CHECK_THROWS_AS(label_from_score(10.01), RangeError);
  CHECK(label_from_score(5.0, LabelRule{0.0}) == LabelDecision::kHigh);
  CHECK_THROWS_AS(label_from_score(5.0, LabelRule{4.0}), ConfigError);
  CHECK_THROWS_AS(label_from_score(5.0, LabelRule{-0.1}), ConfigError);
}

TEST_CASE("label rule is monotone") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    const LabelRule rule{uniform01(rng) * 3.9};
    double a = 1.0 + 9.0 * uniform01(rng), b = 1.0 + 9.0 * uniform01(rng);
    if (a > b) std::swap(a, b);
    const auto la = label_from_score(a, rule), lb = label_from_score(b, rule);
    if (la == LabelDecision::kDiscard || lb == LabelDecision::kDiscard) continue;
    CHECK(!(la == LabelDecision::kHigh && lb == LabelDecision::kLow));
  }
}

TEST_CASE("tokenize examples") {
  CHECK(tokenize("Great shot!") == Tokens{"great", "shot", "!"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("Too   noisy.") == Tokens{"too", "noisy", "."});
  CHECK(tokenize("(Nice), \"really\"; isn't it?") ==
        Tokens{"(", "nice", ")", ",", "\"", "really", "\"", ";", "isn", "'", "t", "it", "?"});
  CHECK(tokenize(" \t\n ").empty());
  CHECK(tokenize("a:b").size() == 3);
  for (auto s : {Vocabulary::kPadToken, Vocabulary::kStartToken, Vocabulary::kEndToken, Vocabulary::kUnkToken}) {
    for (const auto& t : tokenize(std::string(s))) CHECK(t != s);
  }
}

TEST_CASE("vocabulary building") {
  std::vector<Tokens> corpus{{"a", "a", "b"}, {"a", "b", "c"}, {"a", "b"}};
  Vocabulary v = Vocabulary::build(corpus);
  REQUIRE(v.size() == 5);
  CHECK(v.token(4) == "a");
  CHECK(!v.find("b"));

  Vocabulary empty = Vocabulary::build(std::vector<Tokens>{});
  CHECK(empty.size() == 4);
  CHECK(empty.token(0) == "<PAD>");
  CHECK(empty.token(1) == "<START>");
  CHECK(empty.token(2) == "<END>");
  CHECK(empty.token(3) == "<UNK>");

  // Descending count, lexicographic tiebreak.
  std::vector<Tokens> c2{{"z", "z", "y", "y", "x", "w", "w", "w"}};
  Vocabulary v2 = Vocabulary::build(c2, 1);
  CHECK(v2.tokens() == Tokens{"<PAD>", "<START>", "<END>", "<UNK>", "w", "y", "z", "x"});

  // Threshold property on random corpora.
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tokens> c;
    std::map<std::string, std::size_t> counts;
    for (int s = 0; s < 10; ++s) {
      Tokens line;
      for (int k = 0; k < 6; ++k) {
        std::string w(1, static_cast<char>('a' + rng() % 12));
        line.push_back(w);
        ++counts[w];
      }
      c.push_back(line);
    }
    const std::size_t min_count = 1 + trial % 6;
    Vocabulary vv = Vocabulary::build(c, min_count);
    std::size_t expected = 0;
    for (const auto& [w, n] : counts) {
      CHECK(vv.find(w).has_value() == (n >= min_count));
      expected += n >= min_count;
    }
    CHECK(vv.size() == 4 + expected);
    for (std::size_t i = 5; i < vv.size(); ++i) CHECK(counts[vv.token(i - 1)] >= counts[vv.token(i)]);
  }
}

TEST_CASE("vocabulary text round trip and validation") {
  std::vector<Tokens> corpus{{"b", "b", "a", "a", "c"}};
  Vocabulary v = Vocabulary::build(corpus, 1);
  const std::string text = v.to_text();
  CHECK(text.rfind("<PAD>\n<START>\n<END>\n<UNK>\n", 0) == 0);
  CHECK(Vocabulary::parse(text).tokens() == v.tokens());

  TempDir dir;
  write_vocab(dir / "vocab.txt", v);
  CHECK(read_vocab(dir / "vocab.txt").tokens() == v.tokens());

  CHECK_THROWS_AS(Vocabulary::parse("<PAD>\n<START>\n"), DataError);
  CHECK_THROWS_AS(Vocabulary::parse("<PAD>\n<END>\n<START>\n<UNK>\n"), DataError);
  CHECK_THROWS_AS(Vocabulary::parse("<PAD>\n<START>\n<END>\n<UNK>\na\na\n"), DataError);
  CHECK_THROWS_AS(v.token(99), IndexError);
}

TEST_CASE("encode and decode captions") {
  std::vector<Tokens> corpus{{"great", "shot", "great", "shot", "nice"}};
  Vocabulary v = Vocabulary::build(corpus, 2);
  const Tokens in{"great", "shot"};
  CHECK(encode_caption(in, v) == std::vector<std::size_t>{*v.find("great"), *v.find("shot")});
  CHECK(encode_caption(Tokens{"unseen"}, v) == std::vector<std::size_t>{token::kUnk});

  std::mt19937_64 rng(3);
  const Tokens pool{"great", "shot", "nice", "blurry", "zzz"};
  std::map<std::string, std::size_t> lookup;
  for (std::size_t i = 0; i < v.size(); ++i) lookup[v.token(i)] = i;
  for (int trial = 0; trial < 100; ++trial) {
    Tokens t;
    for (std::size_t k = 0; k < 1 + rng() % 8; ++k) t.push_back(pool[rng() % pool.size()]);
    const auto ids = encode_caption(t, v);
    REQUIRE(ids.size() == t.size());
    const auto back = decode_caption(ids, v);
    for (std::size_t k = 0; k < t.size(); ++k) {
      const auto it = lookup.find(t[k]);
      CHECK(ids[k] == (it == lookup.end() ? token::kUnk : it->second));
      CHECK(back[k] == (it == lookup.end() ? "<UNK>" : t[k]));
    }
  }
}

TEST_CASE("comment tokens are truncated") {
  ReviewExample ex;
  std::string longc;
  for (int i = 0; i < 40; ++i) longc += "word ";
  ex.comments = {longc, "Short one."};
  const auto toks = comment_tokens(ex);
  CHECK(toks[0].size() == kMaxCaptionLength);
  CHECK(toks[1] == Tokens{"short", "one", "."});
  CHECK(comment_tokens(ex, 5)[0].size() == 5);
}

TEST_CASE("synthetic data is deterministic and balanced") {
  TempDir a, b;
  write_dataset(a.path(), small_dataset(7));
  write_dataset(b.path(), small_dataset(7));
  for (auto name : {kManifestFile, kFeaturesFile}) {
    CHECK(io::read_file(a / std::string(name)) == io::read_file(b / std::string(name)));
  }
  TempDir c;
  write_dataset(c.path(), small_dataset(8));
  CHECK(io::read_file(a / std::string(kFeaturesFile)) != io::read_file(c / std::string(kFeaturesFile)));

  const Dataset ten = small_dataset(1, 10);
  std::size_t high = 0;
  for (const auto& ex : ten.examples) high += ex.label == Label::kHigh;
  CHECK(ten.examples.size() == 10);
  CHECK(high == 5);
  CHECK(ten.split(Split::kTrain).size() == 8);
  CHECK(ten.split(Split::kValid).size() == 1);
  CHECK(ten.split(Split::kTest).size() == 1);

  CHECK_THROWS_AS(small_dataset(1, 9), ConfigError);
  CHECK_THROWS_AS(small_dataset(1, 0), ConfigError);
}

TEST_CASE("synthetic examples satisfy the example invariants") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset d = small_dataset(seed, 40);
    std::set<std::string> ids[3];
    for (const auto& ex : d.examples) {
      const auto dec = label_from_score(ex.score);
      REQUIRE(dec != LabelDecision::kDiscard);
      CHECK((dec == LabelDecision::kHigh) == (ex.label == Label::kHigh));
      CHECK(ex.comments.size() == 6);
      CHECK(ex.input.shape() == Shape{6});
      CHECK(ids[static_cast<int>(ex.split)].insert(ex.id).second);
    }
    CHECK(ids[0].size() == 32);
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        for (const auto& id : ids[i]) CHECK(!ids[j].count(id));
  }
}

TEST_CASE("synthetic classes are linearly separable") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.n_images = 100;
    cfg.feature_dim = 64;
    const Dataset d = synth_dataset(cfg);
    std::vector<std::vector<double>> feats;
    std::vector<Label> labels;
    for (const auto* ex : d.split(Split::kTrain)) {
      feats.push_back(to_vec(ex->input));
      labels.push_back(ex->label);
    }
    const auto probe = oracles::lda_probe(feats, labels);
    CHECK(probe.train_accuracy == 1.0);
  }
}

TEST_CASE("comment wording correlates with the class") {
  const Dataset d = small_dataset(3, 40);
  std::map<std::string, std::set<Label>> seen;
  for (const auto& ex : d.examples)
    for (const auto& toks : comment_tokens(ex))
      for (const auto& t : toks) seen[t].insert(ex.label);
  std::size_t exclusive_high = 0, exclusive_low = 0;
  for (const auto& [tok, labels] : seen) {
    if (labels.size() != 1) continue;
    (*labels.begin() == Label::kHigh ? exclusive_high : exclusive_low)++;
  }
  CHECK(exclusive_high > 0);
  CHECK(exclusive_low > 0);
}

TEST_CASE("raw image synthetic data") {
  const Dataset d = small_dataset(4, 10, Modality::kImages);
  CHECK(d.modality == Modality::kImages);
  for (const auto& ex : d.examples) {
    CHECK(ex.input.shape() == Shape{3, 32, 32});
    for (double v : ex.input.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  TempDir dir;
  write_dataset(dir.path(), d);
  CHECK(std::filesystem::exists(dir / std::string(kImagesFile)));
  CHECK(!std::filesystem::exists(dir / std::string(kFeaturesFile)));
  const Dataset back = read_dataset(dir.path());
  CHECK(back.modality == Modality::kImages);
  for (std::size_t i = 0; i < d.examples.size(); ++i) CHECK(to_vec(back.examples[i].input) == to_vec(d.examples[i].input));
}

TEST_CASE("dataset round trip on disk") {
  const Dataset d = small_dataset(5, 20);
  TempDir dir;
  write_dataset(dir.path(), d);
  const Dataset back = read_dataset(dir.path());
  REQUIRE(back.examples.size() == d.examples.size());
  for (std::size_t i = 0; i < d.examples.size(); ++i) {
    const auto &x = d.examples[i], &y = back.examples[i];
    CHECK(x.id == y.id);
    CHECK(x.score == y.score);
    CHECK(x.label == y.label);
    CHECK(x.split == y.split);
    CHECK(x.comments == y.comments);
    CHECK(to_vec(x.input) == to_vec(y.input));
  }

  const std::string feats = io::read_file(dir / std::string(kFeaturesFile));
  CHECK(feats.substr(0, 6) == "NAIRF1");
  CHECK(feats.size() == 6 + 4 + 4 + 20 * 6 * 8);

  std::ifstream manifest(dir / std::string(kManifestFile));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(manifest, line)) {
    const auto j = nlohmann::json::parse(line);
    for (auto key : {"id", "score", "label", "split", "comments"}) CHECK(j.contains(key));
    ++lines;
  }
  CHECK(lines == 20);
}

TEST_CASE("reading rejects inconsistent data") {
  Dataset d = small_dataset(6, 10);
  {
    Dataset band = d;
    band.examples[0].score = 5.0;
    TempDir dir;
    write_dataset(dir.path(), band);
    CHECK_THROWS_AS(read_dataset(dir.path()), DataError);
  }
  {
    Dataset flip = d;
    flip.examples[0].label = flip.examples[0].label == Label::kHigh ? Label::kLow : Label::kHigh;
    TempDir dir;
    write_dataset(dir.path(), flip);
    CHECK_THROWS_AS(read_dataset(dir.path()), DataError);
  }
  {
    TempDir dir;
    write_dataset(dir.path(), d);
    const std::string feats = io::read_file(dir / std::string(kFeaturesFile));
    io::write_file(dir / std::string(kFeaturesFile), feats.substr(0, feats.size() - 8));
    CHECK_THROWS_AS(read_dataset(dir.path()), DataError);
  }
  {
    TempDir dir;
    write_dataset(dir.path(), d);
    std::filesystem::remove(dir / std::string(kFeaturesFile));
    CHECK_THROWS_AS(read_dataset(dir.path()), DataError);
  }
  CHECK_THROWS_AS(read_dataset("/nonexistent/nair"), DataError);
  CHECK_THROWS_AS(parse_inputs("NAIRX1"), DataError);
}

TEST_CASE("input files round trip") {
  std::mt19937_64 rng(9);
  std::vector<Tensor> rows;
  for (int i = 0; i < 3; ++i) rows.push_back(test::random_tensor({5}, rng));
  Modality m = Modality::kImages;
  const auto back = parse_inputs(serialize_inputs(Modality::kFeatures, rows), &m);
  CHECK(m == Modality::kFeatures);
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(to_vec(back[i]) == to_vec(rows[i]));
  std::vector<Tensor> ragged{test::random_tensor({5}, rng), test::random_tensor({4}, rng)};
  CHECK_THROWS_AS(serialize_inputs(Modality::kFeatures, ragged), DimensionError);
}

}  // TEST_SUITE
