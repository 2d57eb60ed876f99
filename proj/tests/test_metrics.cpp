#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "nair/error.hpp"
#include "nair/metrics.hpp"
#include "nair/oracles/metric_oracles.hpp"

using namespace nair;
using nair::test::random_corpus;
using nair::test::random_sentence;

namespace {

Sentence words(const std::string& text) {
  Sentence out;
  std::string cur;
  for (char c : text) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

EvalPair pair(const std::string& cand, std::initializer_list<std::string> refs) {
  EvalPair p{words(cand), {}};
  for (const auto& r : refs) p.references.push_back(words(r));
  return p;
}

double brevity_penalty(const EvalPair& p) {
  const double c = static_cast<double>(p.candidate.size());
  double best = -1.0;
  for (const auto& r : p.references) {
    const double len = static_cast<double>(r.size());
    if (best < 0 || std::abs(len - c) < std::abs(best - c) || (std::abs(len - c) == std::abs(best - c) && len < best))
      best = len;
  }
  return c > best ? 1.0 : std::exp(1.0 - best / c);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("overall accuracy") {
  using L = Label;
  // TP = 3, TN = 2 over P = 5, N = 5.
  const std::vector<L> labels{L::kHigh, L::kHigh, L::kHigh, L::kHigh, L::kHigh,
                              L::kLow,  L::kLow,  L::kLow,  L::kLow,  L::kLow};
  const std::vector<L> preds{L::kHigh, L::kHigh, L::kHigh, L::kLow, L::kLow,
                             L::kLow,  L::kLow,  L::kHigh, L::kHigh, L::kHigh};
  CHECK(overall_accuracy(preds, labels) == 0.5);
  CHECK(overall_accuracy(labels, labels) == 1.0);
  CHECK_THROWS_AS(overall_accuracy(std::vector<L>{}, std::vector<L>{}), ContractError);
  CHECK_THROWS_AS(overall_accuracy(preds, std::vector<L>{L::kLow}), ContractError);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<L> p(100), l(100);
    for (std::size_t i = 0; i < 100; ++i) {
      p[i] = (rng() & 1u) ? L::kHigh : L::kLow;
      l[i] = (rng() & 1u) ? L::kHigh : L::kLow;
    }
    CHECK(overall_accuracy(p, l) == oracles::oracle_accuracy(p, l));
  }
}

TEST_CASE("bleu examples") {
  const std::vector<EvalPair> same{pair("a cat sat on the mat", {"a cat sat on the mat"})};
  for (std::size_t n = 1; n <= 4; ++n) CHECK(bleu(same, n) == doctest::Approx(1.0).epsilon(1e-15));

  // Clipped unigram precision 1/3; the candidate is longer than the
  // reference, so no brevity penalty.
  const std::vector<EvalPair> the{pair("the the the", {"the cat"})};
  CHECK(bleu(the, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(bleu(the, 1) == oracles::oracle_bleu(the, 1));

  const std::vector<EvalPair> longer{pair("a b c d e", {"a b", "a b c"})};
  CHECK(bleu(longer, 1) == doctest::Approx(3.0 / 5.0).epsilon(1e-15));

  // c = 2 is equally close to lengths 1 and 3; the shorter one wins, so no
  // penalty.
  const std::vector<EvalPair> tie{pair("a b", {"a", "a b c"})};
  CHECK(bleu(tie, 1) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<EvalPair> short_cand{pair("a b", {"a b c"})};
  CHECK(bleu(short_cand, 1) == doctest::Approx(std::exp(1.0 - 1.5)).epsilon(1e-15));

  const std::vector<EvalPair> empty{pair("", {"a b"}), pair("a b", {"a b"})};
  CHECK(std::abs(bleu(empty, 1) - oracles::oracle_bleu(empty, 1)) <= 1e-12);
  CHECK_THROWS_AS(bleu(same, 0), ConfigError);
  CHECK_THROWS_AS(bleu(same, 5), ConfigError);
}

TEST_CASE("duplicating a clipped candidate token never raises clipped precision") {
  // Only tokens already at their clip limit: below it, a duplicate is a new
  // match and precision rises, which clipping is not meant to prevent.
  std::mt19937_64 rng(2);
  std::size_t tried = 0;
  for (int trial = 0; trial < 400; ++trial) {
    EvalPair p;
    p.candidate = random_sentence(rng, 5, 2, 6);
    for (int r = 0; r < 3; ++r) p.references.push_back(random_sentence(rng, 5, 2, 6));
    const std::size_t at = rng() % p.candidate.size();
    const std::string& tok = p.candidate[at];
    std::size_t clip = 0;
    for (const auto& r : p.references)
      clip = std::max<std::size_t>(clip, static_cast<std::size_t>(std::count(r.begin(), r.end(), tok)));
    if (static_cast<std::size_t>(std::count(p.candidate.begin(), p.candidate.end(), tok)) < clip) continue;
    ++tried;
    EvalPair q = p;
    q.candidate.insert(q.candidate.begin() + static_cast<std::ptrdiff_t>(at), tok);
    const std::vector<EvalPair> a{p}, b{q};
    const double pa = bleu(a, 1) / brevity_penalty(p);
    const double pb = bleu(b, 1) / brevity_penalty(q);
    CHECK(pb <= pa + 1e-12);
    // Matched count is unchanged.
    CHECK(std::abs(pb * static_cast<double>(q.candidate.size()) - pa * static_cast<double>(p.candidate.size())) <= 1e-9);
  }
  CHECK(tried > 100);
}

TEST_CASE("rouge-l examples") {
  const std::vector<EvalPair> same{pair("a b c", {"a b c"})};
  CHECK(rouge_l(same) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<EvalPair> abcd{pair("a b c d", {"a c d"})};
  CHECK(lcs_length(words("a b c d"), words("a c d")) == 3);
  const double p = 0.75, r = 1.0, b2 = 1.44;
  CHECK(rouge_l(abcd) == doctest::Approx((1 + b2) * p * r / (r + b2 * p)).epsilon(1e-14));
  CHECK(std::abs(rouge_l(abcd) - oracles::oracle_rouge_l(abcd)) <= 1e-12);
  const std::vector<EvalPair> disjoint{pair("x y", {"a b"})};
  CHECK(rouge_l(disjoint) == 0.0);
  // Best reference wins.
  const std::vector<EvalPair> best{pair("a b", {"x y", "a b"})};
  CHECK(rouge_l(best) == doctest::Approx(1.0));
}

TEST_CASE("cider examples") {
  const std::vector<EvalPair> disjoint{pair("x y z w", {"a b c d"}), pair("e f g h", {"a b c d"})};
  CHECK(cider(disjoint) == 0.0);

  // Distinct vocabularies, candidate equal to its reference: every cosine is 1.
  const std::vector<EvalPair> two{pair("a b c d", {"a b c d"}), pair("e f g h", {"e f g h"})};
  CHECK(std::abs(cider(two) - 10.0) <= 1e-10);
  CHECK(std::abs(cider(two) - oracles::oracle_cider(two)) <= 1e-10);

  // Partial overlap against the hand-rolled oracle.
  const std::vector<EvalPair> mixed{pair("a b c e", {"a b c d", "a b"}), pair("e f g h", {"e f a h"}),
                                    pair("q r", {"q s", "r r"})};
  CHECK(std::abs(cider(mixed) - oracles::oracle_cider(mixed)) <= 1e-10);

  const std::vector<EvalPair> one{pair("a b", {"a b"})};
  CHECK_THROWS_AS(cider(one), ConfigError);
}

TEST_CASE("cider is invariant to uniformly scaled reference multiplicities") {
  // Duplicating the whole reference list of every image leaves every tf
  // vector, document frequency and per-image mean unchanged.
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto corpus = random_corpus(rng);
    auto scaled = corpus;
    for (auto& p : scaled) {
      const auto refs = p.references;
      p.references.insert(p.references.end(), refs.begin(), refs.end());
    }
    CHECK(std::abs(cider(corpus) - cider(scaled)) <= 1e-10);
  }
}

TEST_CASE("meteor-lite examples") {
  const std::vector<EvalPair> same{pair("a b c", {"a b c"})};
  CHECK(meteor_align(words("a b c"), words("a b c")).chunks == 1);
  CHECK(meteor_lite(same) == doctest::Approx(1.0 - 0.5 / 27.0).epsilon(1e-15));

  const MeteorAlignment rev = meteor_align(words("b a"), words("a b"));
  CHECK(rev.matches == 2);
  CHECK(rev.chunks == 2);
  const std::vector<EvalPair> reversed{pair("b a", {"a b"})};
  CHECK(meteor_lite(reversed) == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<EvalPair> none{pair("x y", {"a b"})};
  CHECK(meteor_lite(none) == 0.0);

  // Repeated tokens: the aligner must pick the alignment with fewest chunks.
  const MeteorAlignment rep = meteor_align(words("a b a b"), words("a b"));
  CHECK(rep.matches == 2);
  CHECK(rep.chunks == 1);
}

TEST_CASE("metrics equal their oracles on random corpora") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto corpus = random_corpus(rng);
    for (std::size_t n = 1; n <= 4; ++n) CHECK(std::abs(bleu(corpus, n) - oracles::oracle_bleu(corpus, n)) <= 1e-10);
    CHECK(std::abs(rouge_l(corpus) - oracles::oracle_rouge_l(corpus)) <= 1e-10);
    CHECK(std::abs(cider(corpus) - oracles::oracle_cider(corpus)) <= 1e-10);
    CHECK(std::abs(meteor_lite(corpus) - oracles::oracle_meteor_lite(corpus)) <= 1e-10);
    for (const auto& p : corpus) {
      for (const auto& r : p.references) {
        const auto a = meteor_align(p.candidate, r), b = oracles::oracle_meteor_align(p.candidate, r);
        CHECK(a.matches == b.matches);
        CHECK(a.chunks == b.chunks);
      }
    }
  }
}

TEST_CASE("metrics are permutation invariant and in range") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto corpus = random_corpus(rng);
    auto shuffled = corpus;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (std::size_t n = 1; n <= 4; ++n) {
      CHECK(std::abs(bleu(corpus, n) - bleu(shuffled, n)) <= 1e-12);
      CHECK(bleu(corpus, n) >= 0.0);
      CHECK(bleu(corpus, n) <= 1.0);
    }
    CHECK(std::abs(rouge_l(corpus) - rouge_l(shuffled)) <= 1e-12);
    CHECK(std::abs(cider(corpus) - cider(shuffled)) <= 1e-12);
    CHECK(std::abs(meteor_lite(corpus) - meteor_lite(shuffled)) <= 1e-12);
    CHECK(rouge_l(corpus) >= 0.0);
    CHECK(rouge_l(corpus) <= 1.0);
    CHECK(meteor_lite(corpus) >= 0.0);
    CHECK(meteor_lite(corpus) <= 1.0);
    CHECK(cider(corpus) >= 0.0);
    CHECK(cider(corpus) <= 10.0 + 1e-12);
  }
}

TEST_CASE("report serialization") {
  MetricReport r;
  r.model = "model2";
  r.overall_accuracy = 0.75;
  const std::vector<EvalPair> corpus{pair("a b c d", {"a b c d"}), pair("e f g h", {"e f g x"})};
  fill_caption_metrics(r, corpus);
  REQUIRE(r.bleu);
  CHECK((*r.bleu)[0] == bleu(corpus, 1));
  CHECK(*r.cider == cider(corpus));
  const auto j = report_to_json(r);
  CHECK(j["schema"] == 1);
  CHECK(j["model"] == "model2");
  CHECK(j["overall_accuracy"] == 0.75);
  CHECK(j["bleu"].size() == 4);
  for (auto key : {"rouge_l", "cider", "meteor_lite"}) CHECK(j[key].is_number());
  const std::string table = report_to_table(r);
  CHECK(table.find("model2") != std::string::npos);
  CHECK(table.find("75.00") != std::string::npos);

  MetricReport iac;
  iac.model = "iac";
  iac.overall_accuracy = 1.0;
  const auto ji = report_to_json(iac);
  CHECK(ji["bleu"].is_null());
  CHECK(ji["cider"].is_null());
}

}  // TEST_SUITE
