#include "nair/oracles/enumerate.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "nair/error.hpp"
#include "nair/oracles/reference_model.hpp"
#include "nair/types.hpp"

namespace nair::oracles {

namespace {

void expand(const NextLogProbs& next, std::size_t vocab, std::size_t max_len, std::size_t end_token,
            const std::vector<std::size_t>& banned, std::vector<std::size_t>& prefix, double log_prob,
            std::vector<EnumeratedSequence>& out) {
  const std::vector<double> lp = next(prefix);
  if (lp.size() != vocab) throw ContractError("enumerate_sequences: distribution has the wrong size");
  for (std::size_t t = 0; t < vocab; ++t) {
    if (std::find(banned.begin(), banned.end(), t) != banned.end()) continue;
    prefix.push_back(t);
    const double score = log_prob + lp[t];
    if (t == end_token || prefix.size() == max_len) {
      out.push_back(EnumeratedSequence{prefix, score, t == end_token});
    } else {
      expand(next, vocab, max_len, end_token, banned, prefix, score, out);
    }
    prefix.pop_back();
  }
}

}  // namespace

std::vector<EnumeratedSequence> enumerate_sequences(const NextLogProbs& next, std::size_t vocab_size,
                                                    std::size_t max_len, std::size_t end_token,
                                                    const std::vector<std::size_t>& banned) {
  if (vocab_size == 0 || vocab_size > kMaxEnumVocab)
    throw ContractError("enumeration needs 1 <= V <= " + std::to_string(kMaxEnumVocab));
  if (max_len == 0 || max_len > kMaxEnumLength)
    throw ContractError("enumeration needs 1 <= max_len <= " + std::to_string(kMaxEnumLength));
  std::vector<EnumeratedSequence> out;
  std::vector<std::size_t> prefix;
  expand(next, vocab_size, max_len, end_token, banned, prefix, 0.0, out);
  return out;
}

std::vector<EnumeratedSequence> enumerate_sequences(const NairModel& model, const Tensor& input,
                                                    std::size_t max_len, const std::vector<std::size_t>& banned) {
  const std::vector<double> in(input.data().begin(), input.data().end());
  const auto rep = reference_representation(model, reference_features(model, in));
  // Replays the prefix from scratch each time; fine at these sizes.
  NextLogProbs next = [&](const std::vector<std::size_t>& prefix) {
    ReferenceDecoder dec(model, rep.gen);
    std::vector<double> lp = dec.next_log_probs(token::kStart);
    for (std::size_t t : prefix) lp = dec.next_log_probs(t);
    return lp;
  };
  return enumerate_sequences(next, model.config().vocab_size, max_len, token::kEnd, banned);
}

const EnumeratedSequence& best_sequence(const std::vector<EnumeratedSequence>& all) {
  if (all.empty()) throw ContractError("best_sequence: nothing enumerated");
  const EnumeratedSequence* best = &all.front();
  for (const auto& s : all) {
    if (s.log_prob > best->log_prob ||
        (s.log_prob == best->log_prob &&
         (s.tokens.size() < best->tokens.size() ||
          (s.tokens.size() == best->tokens.size() && s.tokens < best->tokens))))
      best = &s;
  }
  return *best;
}

}  // namespace nair::oracles
