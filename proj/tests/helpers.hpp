#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "nair/metrics.hpp"
#include "nair/model.hpp"
#include "nair/oracles/gradcheck.hpp"
#include "nair/tensor.hpp"

namespace nair::test {

inline std::vector<double> to_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
  return Tensor::uniform(std::move(shape), lo, hi, rng, requires_grad);
}

// Max relative error between backward and central differences for
// loss = sum(op(inputs) * W) with a fixed random W.
inline double primitive_grad_error(const std::function<Tensor(std::span<const Tensor>)>& op,
                                   const std::vector<Shape>& shapes, std::uint64_t seed, double lo = -1.0,
                                   double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::vector<Tensor> inputs;
  for (const Shape& s : shapes) inputs.push_back(random_tensor(s, rng, lo, hi, true));
  Tensor probe;
  {
    NoTapeGuard guard;
    probe = random_tensor(op(inputs).shape(), rng);
  }
  auto loss = [&] { return sum(mul(op(inputs), probe)); };
  {
    Tape tape;
    tape.backward(loss());
  }
  const auto numeric = oracles::finite_diff_grad([&] { return loss().item(); }, inputs);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto g = inputs[k].grad();
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, oracles::relative_error(g[i], numeric[k][i]));
  }
  return worst;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("nair-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Small widths so that tests run in milliseconds.
inline ModelConfig tiny_config(Variant variant, std::size_t vocab_size, std::size_t feature_width = 8,
                               std::uint64_t seed = 1) {
  ModelConfig cfg = ModelConfig::defaults(variant, vocab_size);
  cfg.feature_width = feature_width;
  cfg.embed_width = 8;
  cfg.hidden_width = 8;
  cfg.shared_width = 8;
  cfg.specific_width = 4;
  if (variant == Variant::kModelII) cfg.shared_width = 4;
  cfg.seed = seed;
  return cfg;
}

// Short sentences over w0..w9, 2-6 images with 1-6 references each.
inline Sentence random_sentence(std::mt19937_64& rng, std::size_t vocab, std::size_t min_len, std::size_t max_len) {
  const std::size_t len = min_len + rng() % (max_len - min_len + 1);
  Sentence s;
  for (std::size_t i = 0; i < len; ++i) s.push_back("w" + std::to_string(rng() % vocab));
  return s;
}

inline std::vector<EvalPair> random_corpus(std::mt19937_64& rng) {
  const std::size_t vocab = 2 + rng() % 9;  // <= 10
  const std::size_t images = 2 + rng() % 5;
  std::vector<EvalPair> corpus;
  for (std::size_t i = 0; i < images; ++i) {
    EvalPair p;
    p.candidate = random_sentence(rng, vocab, 1, 8);
    const std::size_t refs = 1 + rng() % 6;
    for (std::size_t r = 0; r < refs; ++r) p.references.push_back(random_sentence(rng, vocab, 1, 8));
    corpus.push_back(std::move(p));
  }
  return corpus;
}

}  // namespace nair::test
