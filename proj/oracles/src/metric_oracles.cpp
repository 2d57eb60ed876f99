#include "nair/oracles/metric_oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace nair::oracles {

namespace {

// n-grams keyed by their tokens joined with an unprintable separator.
std::map<std::string, double> grams(const Sentence& s, std::size_t n) {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) key += s[i + k] + '\x1f';
    out[key] += 1.0;
  }
  return out;
}

}  // namespace

double oracle_accuracy(std::span<const Label> predictions, std::span<const Label> labels) {
  double right = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) right += predictions[i] == labels[i] ? 1 : 0;
  return right / static_cast<double>(labels.size());
}

double oracle_bleu(std::span<const EvalPair> corpus, std::size_t n) {
  double c = 0, r = 0;
  std::vector<double> num(n + 1, 0), den(n + 1, 0);
  for (const auto& pair : corpus) {
    const double len = static_cast<double>(pair.candidate.size());
    c += len;
    double best = -1;
    for (const auto& ref : pair.references) {
      const double rl = static_cast<double>(ref.size());
      if (best < 0 || std::abs(rl - len) < std::abs(best - len) ||
          (std::abs(rl - len) == std::abs(best - len) && rl < best))
        best = rl;
    }
    r += best;
    for (std::size_t k = 1; k <= n; ++k) {
      for (const auto& [g, count] : grams(pair.candidate, k)) {
        double cap = 0;
        for (const auto& ref : pair.references) {
          const auto rg = grams(ref, k);
          const auto it = rg.find(g);
          if (it != rg.end()) cap = std::max(cap, it->second);
        }
        num[k] += std::min(count, cap);
        den[k] += count;
      }
    }
  }
  if (c == 0) return 0.0;
  double product = 1.0;
  for (std::size_t k = 1; k <= n; ++k) {
    if (num[k] == 0) return 0.0;
    product *= num[k] / den[k];
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::pow(product, 1.0 / static_cast<double>(n));
}

double oracle_rouge_l(std::span<const EvalPair> corpus) {
  if (corpus.empty()) return 0.0;
  // Top-down memoized recursion instead of a bottom-up table.
  auto lcs = [](const Sentence& a, const Sentence& b) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
      if (i == a.size() || j == b.size()) return 0;
      auto key = std::make_pair(i, j);
      if (auto it = memo.find(key); it != memo.end()) return it->second;
      std::size_t v = a[i] == b[j] ? 1 + go(i + 1, j + 1) : std::max(go(i + 1, j), go(i, j + 1));
      memo[key] = v;
      return v;
    };
    return go(0, 0);
  };
  const double b2 = 1.2 * 1.2;
  double sum = 0;
  for (const auto& pair : corpus) {
    double best = 0;
    for (const auto& ref : pair.references) {
      const double l = static_cast<double>(lcs(pair.candidate, ref));
      if (l == 0) continue;
      const double p = l / static_cast<double>(pair.candidate.size());
      const double rr = l / static_cast<double>(ref.size());
      best = std::max(best, (1 + b2) * p * rr / (rr + b2 * p));
    }
    sum += best;
  }
  return sum / static_cast<double>(corpus.size());
}

double oracle_cider(std::span<const EvalPair> corpus) {
  const double images = static_cast<double>(corpus.size());
  double sum = 0;
  for (const auto& pair : corpus) {
    double per_image = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
      auto weight = [&](const Sentence& s) {
        auto tf = grams(s, n);
        for (auto& [g, v] : tf) {
          double df = 0;
          for (const auto& other : corpus) {
            bool any = false;
            for (const auto& ref : other.references) any = any || grams(ref, n).count(g) != 0;
            df += any ? 1 : 0;
          }
          v *= std::log(images / std::max(1.0, df));
        }
        return tf;
      };
      const auto cv = weight(pair.candidate);
      double acc = 0;
      for (const auto& ref : pair.references) {
        const auto rv = weight(ref);
        double dot = 0, a = 0, b = 0;
        for (const auto& [g, v] : cv) {
          a += v * v;
          if (rv.count(g)) dot += v * rv.at(g);
        }
        for (const auto& [g, v] : rv) b += v * v;
        acc += (a > 0 && b > 0) ? dot / std::sqrt(a * b) : 0.0;
      }
      per_image += acc / static_cast<double>(pair.references.size());
    }
    sum += 10.0 * per_image / 4.0;
  }
  return sum / images;
}

MeteorAlignment oracle_meteor_align(const Sentence& candidate, const Sentence& reference) {
  if (candidate.size() > 10 || reference.size() > 10)
    throw std::invalid_argument("oracle_meteor_align: sentences longer than 10 tokens");
  std::vector<long> map(candidate.size(), -1);
  std::vector<bool> used(reference.size(), false);
  MeteorAlignment best;
  bool have = false;
  std::function<void(std::size_t)> go = [&](std::size_t i) {
    if (i == candidate.size()) {
      std::size_t m = 0, chunks = 0;
      for (std::size_t k = 0; k < map.size(); ++k) {
        if (map[k] < 0) continue;
        ++m;
        if (k == 0 || map[k - 1] < 0 || map[k - 1] + 1 != map[k]) ++chunks;
      }
      if (!have || m > best.matches || (m == best.matches && chunks < best.chunks)) best = {m, chunks};
      have = true;
      return;
    }
    go(i + 1);
    for (std::size_t j = 0; j < reference.size(); ++j) {
      if (used[j] || reference[j] != candidate[i]) continue;
      used[j] = true;
      map[i] = static_cast<long>(j);
      go(i + 1);
      map[i] = -1;
      used[j] = false;
    }
  };
  go(0);
  return best;
}

double oracle_meteor_lite(std::span<const EvalPair> corpus) {
  if (corpus.empty()) return 0.0;
  double sum = 0;
  for (const auto& pair : corpus) {
    double best = 0;
    for (const auto& ref : pair.references) {
      const auto a = oracle_meteor_align(pair.candidate, ref);
      if (a.matches == 0) continue;
      const double m = static_cast<double>(a.matches);
      const double p = m / static_cast<double>(pair.candidate.size());
      const double r = m / static_cast<double>(ref.size());
      const double f = 10 * p * r / (r + 9 * p);
      const double pen = 0.5 * std::pow(static_cast<double>(a.chunks) / m, 3);
      best = std::max(best, f * (1 - pen));
    }
    sum += best;
  }
  return sum / static_cast<double>(corpus.size());
}

}  // namespace nair::oracles
