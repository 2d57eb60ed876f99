#include "nair/inference.hpp"

#include <algorithm>
#include <cmath>

#include "nair/error.hpp"

namespace nair {

ClassPrediction prediction_from_logits(std::span<const double> logits) {
  if (logits.size() != 2) throw DimensionError("class prediction expects two logits");
  const Label label = logits[1] > logits[0] ? Label::kHigh : Label::kLow;
  const double peak = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - peak);
  const double e1 = std::exp(logits[1] - peak);
  const double p_high = e1 / (e0 + e1);
  return ClassPrediction{label, label == Label::kHigh ? p_high : 1.0 - p_high};
}

ClassPrediction predict_class(const NairModel& model, const Tensor& input) {
  if (!model.classifier) {
    throw ConfigError(std::string(variant_name(model.variant())) + " does not classify images");
  }
  if (input.shape() != model.input_shape()) {
    throw ConfigError("input " + shape_to_string(input.shape()) + " does not match the model's modality " +
                      shape_to_string(model.input_shape()));
  }
  NoTapeGuard no_tape;
  Representation rep = representation(model, encode_image(model, input));
  Tensor logits = class_logits(model, rep.cls);
  return prediction_from_logits(logits.data());
}

std::vector<ClassPrediction> predict_class(const NairModel& model, std::span<const Tensor> inputs) {
  std::vector<ClassPrediction> out;
  out.reserve(inputs.size());
  for (const Tensor& input : inputs) out.push_back(predict_class(model, input));
  return out;
}

namespace {

struct Candidate {
  std::size_t parent;
  std::size_t token;
  double log_prob;
};

bool lexicographically_less(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::vector<bool> allowed_mask(std::size_t vocab_size, const DecodeOptions& options) {
  std::vector<bool> allowed(vocab_size, true);
  for (std::size_t t : options.banned_tokens) {
    if (t < vocab_size) allowed[t] = false;
  }
  if (std::none_of(allowed.begin(), allowed.end(), [](bool b) { return b; })) {
    throw ConfigError("decoding bans every token");
  }
  return allowed;
}

Tensor generator_input(const NairModel& model, const Tensor& input) {
  if (!model.output) {
    throw ConfigError(std::string(variant_name(model.variant())) + " does not generate captions");
  }
  if (input.shape() != model.input_shape()) {
    throw ConfigError("input " + shape_to_string(input.shape()) + " does not match the model's modality " +
                      shape_to_string(model.input_shape()));
  }
  return representation(model, encode_image(model, input)).gen;
}

}  // namespace

std::vector<Caption> beam_search_from_representation(const NairModel& model, const Tensor& rep_gen,
                                                     const DecodeOptions& options) {
  if (options.beam_size == 0) throw ConfigError("beam size must be at least 1");
  if (options.max_len == 0) throw ConfigError("max_len must be at least 1");
  NoTapeGuard no_tape;
  const std::size_t vocab = model.config().vocab_size;
  const std::vector<bool> allowed = allowed_mask(vocab, options);

  struct Live {
    Hypothesis hyp;
    Tensor next_log_probs;
  };
  std::vector<Live> live;
  {
    Hypothesis start;
    start.state = decoder_start(model, rep_gen);
    Tensor logp = log_softmax(decoder_step(model, start.state, token::kStart));
    live.push_back(Live{std::move(start), logp});
  }

  std::vector<Caption> pool;
  for (std::size_t length = 1; length <= options.max_len && !live.empty(); ++length) {
    std::vector<Candidate> candidates;
    candidates.reserve(live.size() * vocab);
    for (std::size_t h = 0; h < live.size(); ++h) {
      auto logp = live[h].next_log_probs.data();
      for (std::size_t t = 0; t < vocab; ++t) {
        if (allowed[t]) candidates.push_back(Candidate{h, t, live[h].hyp.log_prob + logp[t]});
      }
    }
    // Every candidate has the same length here, so ties compare token ids.
    auto better = [&](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      const auto& ta = live[a.parent].hyp.tokens;
      const auto& tb = live[b.parent].hyp.tokens;
      if (ta != tb) return lexicographically_less(ta, tb);
      return a.token < b.token;
    };
    const std::size_t keep = std::min(options.beam_size, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), better);

    std::vector<Live> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const Candidate& c = candidates[k];
      const Live& parent = live[c.parent];
      std::vector<std::size_t> tokens = parent.hyp.tokens;
      tokens.push_back(c.token);
      if (c.token == options.end_token || length == options.max_len) {
        pool.push_back(Caption{std::move(tokens), c.log_prob});
        continue;
      }
      Hypothesis hyp{std::move(tokens), c.log_prob, parent.hyp.state, false};
      Tensor logp = log_softmax(decoder_step(model, hyp.state, c.token));
      next.push_back(Live{std::move(hyp), logp});
    }
    live = std::move(next);
  }

  auto score = [&](const Caption& c) {
    return options.length_normalize ? c.log_prob / static_cast<double>(c.tokens.size()) : c.log_prob;
  };
  std::stable_sort(pool.begin(), pool.end(), [&](const Caption& a, const Caption& b) {
    const double sa = score(a), sb = score(b);
    if (sa != sb) return sa > sb;
    if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
    return lexicographically_less(a.tokens, b.tokens);
  });
  return pool;
}

std::vector<Caption> beam_search(const NairModel& model, const Tensor& input, const DecodeOptions& options) {
  NoTapeGuard no_tape;
  return beam_search_from_representation(model, generator_input(model, input), options);
}

Caption greedy_decode(const NairModel& model, const Tensor& input, const DecodeOptions& options) {
  if (options.max_len == 0) throw ConfigError("max_len must be at least 1");
  NoTapeGuard no_tape;
  const std::vector<bool> allowed = allowed_mask(model.config().vocab_size, options);
  DecoderState state = decoder_start(model, generator_input(model, input));
  Caption caption;
  std::size_t previous = token::kStart;
  while (caption.tokens.size() < options.max_len) {
    Tensor logp = log_softmax(decoder_step(model, state, previous));
    std::size_t best = logp.size();
    for (std::size_t t = 0; t < logp.size(); ++t) {
      if (allowed[t] && (best == logp.size() || logp[t] > logp[best])) best = t;
    }
    caption.tokens.push_back(best);
    caption.log_prob += logp[best];
    if (best == options.end_token) break;
    previous = best;
  }
  return caption;
}

std::vector<Caption> decode_batch(const NairModel& model, std::span<const Tensor> inputs,
                                  const DecodeOptions& options) {
  std::vector<Caption> out;
  out.reserve(inputs.size());
  for (const Tensor& input : inputs) {
    if (options.beam_size == 1) {
      out.push_back(greedy_decode(model, input, options));
    } else {
      out.push_back(beam_search(model, input, options).front());
    }
  }
  return out;
}

std::vector<std::size_t> strip_end(const Caption& caption, std::size_t end_token) {
  std::vector<std::size_t> tokens = caption.tokens;
  if (!tokens.empty() && tokens.back() == end_token) tokens.pop_back();
  return tokens;
}

}  // namespace nair
