#include "nair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>

#include "nair/error.hpp"

namespace nair {

namespace {

using Ngram = std::vector<std::string>;
using NgramCounts = std::map<Ngram, std::size_t>;

NgramCounts count_ngrams(const Sentence& s, std::size_t n) {
  NgramCounts counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++counts[Ngram(s.begin() + static_cast<std::ptrdiff_t>(i),
                   s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double overall_accuracy(std::span<const Label> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size()) throw ContractError("overall_accuracy: length mismatch");
  if (predictions.empty()) throw ContractError("overall_accuracy: empty input");
  std::size_t true_pos = 0, true_neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] != labels[i]) continue;
    if (labels[i] == Label::kHigh) {
      ++true_pos;
    } else {
      ++true_neg;
    }
  }
  return static_cast<double>(true_pos + true_neg) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// BLEU

double bleu(std::span<const EvalPair> corpus, std::size_t n) {
  if (n < 1 || n > 4) throw ConfigError("BLEU order must lie in [1, 4]");
  std::vector<std::size_t> matched(n, 0), total(n, 0);
  std::size_t cand_len = 0, ref_len = 0;
  for (const EvalPair& pair : corpus) {
    if (pair.references.empty()) throw ContractError("BLEU: pair without references");
    const Sentence& cand = pair.candidate;
    cand_len += cand.size();
    std::size_t closest = pair.references.front().size();
    for (const Sentence& ref : pair.references) {
      const auto diff = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (diff(ref.size()) < diff(closest) || (diff(ref.size()) == diff(closest) && ref.size() < closest)) {
        closest = ref.size();
      }
    }
    ref_len += closest;
    for (std::size_t k = 1; k <= n; ++k) {
      NgramCounts max_ref;
      for (const Sentence& ref : pair.references) {
        for (const auto& [gram, c] : count_ngrams(ref, k)) max_ref[gram] = std::max(max_ref[gram], c);
      }
      for (const auto& [gram, c] : count_ngrams(cand, k)) {
        auto it = max_ref.find(gram);
        if (it != max_ref.end()) matched[k - 1] += std::min(c, it->second);
        total[k - 1] += c;
      }
    }
  }
  if (cand_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (total[k] == 0 || matched[k] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched[k]) / static_cast<double>(total[k]));
  }
  const double brevity =
      cand_len > ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return brevity * std::exp(log_sum / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// ROUGE-L

std::size_t lcs_length(const Sentence& a, const Sentence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const EvalPair> corpus) {
  if (corpus.empty()) return 0.0;
  constexpr double kBeta = 1.2;
  double total = 0.0;
  for (const EvalPair& pair : corpus) {
    double best = 0.0;
    for (const Sentence& ref : pair.references) {
      const std::size_t lcs = lcs_length(pair.candidate, ref);
      if (lcs == 0) continue;
      const double p = static_cast<double>(lcs) / static_cast<double>(pair.candidate.size());
      const double r = static_cast<double>(lcs) / static_cast<double>(ref.size());
      const double f = (1.0 + kBeta * kBeta) * p * r / (r + kBeta * kBeta * p);
      best = std::max(best, f);
    }
    total += best;
  }
  return total / static_cast<double>(corpus.size());
}

// ---------------------------------------------------------------------------
// CIDEr

double cider(std::span<const EvalPair> corpus) {
  if (corpus.size() < 2) throw ConfigError("CIDEr needs at least two images to define idf");
  constexpr std::size_t kMaxOrder = 4;
  const double log_images = std::log(static_cast<double>(corpus.size()));

  std::array<std::map<Ngram, std::size_t>, kMaxOrder> doc_freq;
  for (const EvalPair& pair : corpus) {
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      std::set<Ngram> seen;
      for (const Sentence& ref : pair.references) {
        for (const auto& [gram, c] : count_ngrams(ref, n)) seen.insert(gram);
      }
      for (const Ngram& g : seen) ++doc_freq[n - 1][g];
    }
  }

  auto tfidf = [&](const Sentence& s, std::size_t n) {
    std::map<Ngram, double> vec;
    for (const auto& [gram, c] : count_ngrams(s, n)) {
      auto it = doc_freq[n - 1].find(gram);
      const double df = it == doc_freq[n - 1].end() ? 1.0 : static_cast<double>(it->second);
      vec[gram] = static_cast<double>(c) * (log_images - std::log(std::max(1.0, df)));
    }
    return vec;
  };
  auto cosine = [](const std::map<Ngram, double>& a, const std::map<Ngram, double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [g, v] : a) {
      na += v * v;
      auto it = b.find(g);
      if (it != b.end()) dot += v * it->second;
    }
    for (const auto& [g, v] : b) nb += v * v;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };

  double total = 0.0;
  for (const EvalPair& pair : corpus) {
    if (pair.references.empty()) throw ContractError("CIDEr: pair without references");
    double score = 0.0;
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      const auto cand = tfidf(pair.candidate, n);
      double per_order = 0.0;
      for (const Sentence& ref : pair.references) per_order += cosine(cand, tfidf(ref, n));
      score += per_order / static_cast<double>(pair.references.size());
    }
    total += 10.0 * score / static_cast<double>(kMaxOrder);
  }
  return total / static_cast<double>(corpus.size());
}

// ---------------------------------------------------------------------------
// METEOR-lite

namespace {

struct AlignScore {
  std::size_t matches = 0;
  std::size_t chunks = 0;

  // More matches first, then fewer chunks.
  bool better_than(const AlignScore& other) const {
    if (matches != other.matches) return matches > other.matches;
    return chunks < other.chunks;
  }
};

// Exhaustive depth-first search over candidate positions, memoized on
// (position, reference slot matched by the previous position, used slots).
// The state space stays small unless both sentences repeat a token many times.
class Aligner {
 public:
  Aligner(const Sentence& cand, const Sentence& ref) : cand_(cand), used_(ref.size(), false) {
    for (std::size_t j = 0; j < ref.size(); ++j) positions_[ref[j]].push_back(j);
  }

  AlignScore solve() { return search(0, kNone); }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Key {
    std::size_t pos;
    std::size_t prev;
    std::vector<bool> used;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return std::hash<std::vector<bool>>()(k.used) ^ (k.pos * 0x9E3779B97F4A7C15ull) ^ (k.prev * 31u);
    }
  };

  AlignScore search(std::size_t pos, std::size_t prev) {
    if (pos == cand_.size()) return AlignScore{};
    Key key{pos, prev, used_};
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    AlignScore best = search(pos + 1, kNone);  // leave pos unmatched
    auto it = positions_.find(cand_[pos]);
    if (it != positions_.end()) {
      for (std::size_t j : it->second) {
        if (used_[j]) continue;
        used_[j] = true;
        const AlignScore sub = search(pos + 1, j);
        used_[j] = false;
        const bool continues = prev != kNone && j == prev + 1;
        const AlignScore s{sub.matches + 1, sub.chunks + (continues ? 0 : 1)};
        if (s.better_than(best)) best = s;
      }
    }
    memo_.emplace(std::move(key), best);
    return best;
  }

  const Sentence& cand_;
  std::vector<bool> used_;
  std::unordered_map<std::string, std::vector<std::size_t>> positions_;
  std::unordered_map<Key, AlignScore, KeyHash> memo_;
};

}  // namespace

MeteorAlignment meteor_align(const Sentence& candidate, const Sentence& reference) {
  Aligner aligner(candidate, reference);
  AlignScore s = aligner.solve();
  return MeteorAlignment{s.matches, s.chunks};
}

double meteor_lite(std::span<const EvalPair> corpus) {
  if (corpus.empty()) return 0.0;
  double total = 0.0;
  for (const EvalPair& pair : corpus) {
    double best = 0.0;
    for (const Sentence& ref : pair.references) {
      const MeteorAlignment a = meteor_align(pair.candidate, ref);
      if (a.matches == 0) continue;
      const double p = static_cast<double>(a.matches) / static_cast<double>(pair.candidate.size());
      const double r = static_cast<double>(a.matches) / static_cast<double>(ref.size());
      const double f_mean = 10.0 * p * r / (r + 9.0 * p);
      const double frag = static_cast<double>(a.chunks) / static_cast<double>(a.matches);
      const double penalty = 0.5 * frag * frag * frag;
      best = std::max(best, f_mean * (1.0 - penalty));
    }
    total += best;
  }
  return total / static_cast<double>(corpus.size());
}

// ---------------------------------------------------------------------------
// Reports

void fill_caption_metrics(MetricReport& report, std::span<const EvalPair> corpus) {
  std::array<double, 4> b{};
  for (std::size_t n = 1; n <= 4; ++n) b[n - 1] = bleu(corpus, n);
  report.bleu = b;
  report.rouge_l = rouge_l(corpus);
  report.cider = cider(corpus);
  report.meteor_lite = meteor_lite(corpus);
}

nlohmann::ordered_json report_to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["model"] = report.model;
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  j["overall_accuracy"] = opt(report.overall_accuracy);
  if (report.bleu) {
    j["bleu"] = *report.bleu;
  } else {
    j["bleu"] = nullptr;
  }
  j["rouge_l"] = opt(report.rouge_l);
  j["cider"] = opt(report.cider);
  j["meteor_lite"] = opt(report.meteor_lite);
  return j;
}

std::string report_to_table(const MetricReport& report) {
  const char* headers[] = {"Model", "Over accuracy", "BLEU-1", "BLEU-2", "BLEU-3",
                           "BLEU-4", "METEOR-lite", "ROUGE-L", "CIDEr"};
  std::vector<std::string> cells{report.model.empty() ? "-" : report.model};
  auto pct = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * *v);
    return std::string(buf);
  };
  cells.push_back(pct(report.overall_accuracy));
  for (std::size_t n = 0; n < 4; ++n) {
    cells.push_back(pct(report.bleu ? std::optional<double>((*report.bleu)[n]) : std::nullopt));
  }
  cells.push_back(pct(report.meteor_lite));
  cells.push_back(pct(report.rouge_l));
  cells.push_back(pct(report.cider));

  std::string header_line, value_line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::size_t width = std::max(std::string(headers[i]).size(), cells[i].size());
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(width), headers[i]);
    header_line += buf;
    std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(width), cells[i].c_str());
    value_line += buf;
    if (i + 1 < cells.size()) {
      header_line += " | ";
      value_line += " | ";
    }
  }
  return header_line + "\n" + value_line + "\n";
}

}  // namespace nair
