#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "nair/dataset.hpp"
#include "nair/error.hpp"

namespace nair {

namespace {

const std::vector<std::string> kHighAdjectives = {"great", "beautiful", "sharp",
                                                  "lovely", "stunning", "vivid"};
const std::vector<std::string> kLowAdjectives = {"blurry", "dull", "noisy",
                                                 "boring", "flat", "dark"};
const std::vector<std::string> kNouns = {
    "shot",     "composition", "colors",      "lighting", "focus",   "detail",
    "subject",  "image",       "contrast",    "background", "framing", "exposure",
    "tones",    "texture",     "perspective", "mood",     "edit",    "crop",
    "sky",      "light",       "shadows",     "depth",    "angle",   "balance"};

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

std::string fill_template(const std::string& tmpl, const std::vector<std::string>& adjectives,
                          std::size_t noun_pool, std::mt19937_64& rng) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    if (tmpl.compare(pos, 5, "{adj}") == 0) {
      out += adjectives[pick(rng, adjectives.size())];
      pos += 5;
    } else if (tmpl.compare(pos, 6, "{noun}") == 0) {
      out += kNouns[pick(rng, noun_pool)];
      pos += 6;
    } else {
      out.push_back(tmpl[pos++]);
    }
  }
  return out;
}

// Standard normal by Box-Muller over uniform01, so datasets do not depend on
// the standard library's distribution implementation.
double normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

const std::vector<std::string>& default_caption_templates() {
  static const std::vector<std::string> templates = {
      "{adj} {noun} .",
      "the {noun} is {adj} .",
      "{adj} {noun} and {adj} {noun} !",
      "really {adj} {noun} .",
      "the {noun} looks {adj} , {adj} {noun} .",
      "{adj} {noun} overall ."};
  return templates;
}

Dataset synth_dataset(const SynthConfig& config) {
  if (config.n_images < 2 || config.n_images % 2 != 0) {
    throw ConfigError("synthetic datasets need an even image count of at least 2");
  }
  if (config.vocab_size == 0 || config.vocab_size > kNouns.size()) {
    throw ConfigError("synthetic vocab_size must lie in [1, " + std::to_string(kNouns.size()) + "]");
  }
  if (config.modality == Modality::kFeatures && config.feature_dim == 0) {
    throw ConfigError("feature_dim must be positive");
  }
  const auto& templates =
      config.caption_templates.empty() ? default_caption_templates() : config.caption_templates;

  std::mt19937_64 rng(config.seed);

  // Class means +/- separation * u for a random unit direction u.
  std::vector<double> direction(config.modality == Modality::kFeatures ? config.feature_dim : 0);
  double norm = 0.0;
  for (double& d : direction) {
    d = normal(rng);
    norm += d * d;
  }
  norm = std::sqrt(norm);
  for (double& d : direction) d /= norm;

  Dataset dataset;
  dataset.modality = config.modality;
  for (std::size_t i = 0; i < config.n_images; ++i) {
    ReviewExample ex;
    const bool high = i % 2 == 1;
    ex.label = high ? Label::kHigh : Label::kLow;
    // Integer hundredths keep scores exactly representable in text form and
    // clear of the discard band.
    const std::size_t hundredths = high ? 550 + pick(rng, 301) : 150 + pick(rng, 300);
    ex.score = static_cast<double>(hundredths) / 100.0;
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%05zu", i);
    ex.id = id;

    if (config.modality == Modality::kFeatures) {
      const double sign = high ? 1.0 : -1.0;
      std::vector<double> v(config.feature_dim);
      for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] = sign * config.class_separation * direction[k] + normal(rng);
      }
      ex.input = Tensor::vector(std::move(v));
    } else {
      // High images are brighter with a horizontal band pattern; Low ones are
      // darker with a vertical pattern.
      std::vector<double> pixels(3 * 32 * 32);
      const double base = high ? 0.6 : 0.35;
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < 32; ++y) {
          for (std::size_t x = 0; x < 32; ++x) {
            const double wave = std::sin(0.4 * static_cast<double>(high ? y : x) + static_cast<double>(c));
            const double value = base + 0.15 * wave + 0.1 * normal(rng);
            pixels[(c * 32 + y) * 32 + x] = std::clamp(value, 0.0, 1.0);
          }
        }
      }
      ex.input = Tensor(Shape{3, 32, 32}, std::move(pixels));
    }

    const auto& adjectives = high ? kHighAdjectives : kLowAdjectives;
    for (std::size_t c = 0; c < config.comments_per_image; ++c) {
      const auto& tmpl = templates[pick(rng, templates.size())];
      ex.comments.push_back(fill_template(tmpl, adjectives, config.vocab_size, rng));
    }
    dataset.examples.push_back(std::move(ex));
  }

  // Seeded Fisher-Yates over example order, then 80/10/10 by position.
  std::vector<std::size_t> order(config.n_images);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[pick(rng, i + 1)]);
  const std::size_t n_valid = config.n_images / 10;
  const std::size_t n_test = config.n_images / 10;
  const std::size_t n_train = config.n_images - n_valid - n_test;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    Split s = rank < n_train ? Split::kTrain : rank < n_train + n_valid ? Split::kValid : Split::kTest;
    dataset.examples[order[rank]].split = s;
  }
  return dataset;
}

}  // namespace nair
