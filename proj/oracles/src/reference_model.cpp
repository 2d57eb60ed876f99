#include "nair/oracles/reference_model.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "nair/oracles/naive.hpp"

namespace nair::oracles {

namespace {

std::vector<double> raw(const NairModel& model, const std::string& name) {
  const auto span = model.parameters().at(name).data();
  return std::vector<double>(span.begin(), span.end());
}

std::vector<double> dense(const NairModel& model, const std::string& prefix, const std::vector<double>& x,
                          bool relu) {
  const auto& w = model.parameters().at(prefix + ".weight");
  auto y = naive_matvec(raw(model, prefix + ".weight"), w.dim(0), w.dim(1), x);
  const auto b = raw(model, prefix + ".bias");
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] += b[i];
    if (relu && y[i] < 0.0) y[i] = 0.0;
  }
  return y;
}

bool has(const NairModel& model, const std::string& name) { return model.parameters().count(name) != 0; }

std::vector<double> conv_block(const std::vector<double>& x, std::size_t c, std::size_t side,
                               const std::vector<double>& kernels, std::size_t out_c, const std::vector<double>& bias,
                               std::size_t& out_side) {
  auto y = naive_conv2d(x, c, side, side, kernels, out_c, 3, 3);
  const std::size_t s = side - 2;
  for (std::size_t f = 0; f < out_c; ++f)
    for (std::size_t i = 0; i < s * s; ++i) y[f * s * s + i] = std::max(0.0, y[f * s * s + i] + bias[f]);
  out_side = s / 2;
  return naive_max_pool(y, out_c, s, s);
}

}  // namespace

std::vector<double> reference_features(const NairModel& model, const std::vector<double>& input) {
  if (!model.encoder) return input;
  std::size_t side = 0;
  auto x = conv_block(input, 3, 32, raw(model, "encoder.conv1.weight"), 8, raw(model, "encoder.conv1.bias"), side);
  x = conv_block(x, 8, side, raw(model, "encoder.conv2.weight"), 16, raw(model, "encoder.conv2.bias"), side);
  return dense(model, "encoder.fc", x, false);
}

ReferenceRepresentation reference_representation(const NairModel& model, const std::vector<double>& v) {
  switch (model.variant()) {
    case Variant::kModelI: {
      auto s = dense(model, "shared", v, true);
      return {s, s};
    }
    case Variant::kModelII: {
      const auto s = dense(model, "shared", v, true);
      auto cls = dense(model, "cls_specific", v, true);
      auto gen = dense(model, "gen_specific", v, true);
      cls.insert(cls.end(), s.begin(), s.end());
      gen.insert(gen.end(), s.begin(), s.end());
      return {cls, gen};
    }
    default:
      return {v, v};
  }
}

std::vector<double> reference_class_logits(const NairModel& model, const std::vector<double>& rep_cls) {
  return dense(model, "classifier", rep_cls, false);
}

ReferenceDecoder::ReferenceDecoder(const NairModel& model, const std::vector<double>& rep_gen) : model_(model) {
  const std::size_t hw = model.config().hidden_width;
  for (std::size_t l = 0; has(model, "lstm.l" + std::to_string(l) + ".bias"); ++l) {
    h_.emplace_back(hw, 0.0);
    c_.emplace_back(hw, 0.0);
  }
  feed(has(model, "image_proj.weight") ? dense(model, "image_proj", rep_gen, false) : rep_gen);
}

std::vector<double> ReferenceDecoder::feed(std::vector<double> x) {
  for (std::size_t l = 0; l < h_.size(); ++l) {
    const std::string p = "lstm.l" + std::to_string(l);
    NaiveLstmState next = naive_lstm_step({h_[l], c_[l]}, x, raw(model_, p + ".w_input"),
                                          raw(model_, p + ".w_hidden"), raw(model_, p + ".bias"));
    h_[l] = next.h;
    c_[l] = next.c;
    x = next.h;
  }
  return x;
}

std::vector<double> ReferenceDecoder::next_log_probs(std::size_t token) {
  const auto& table = model_.parameters().at("embedding.table");
  const std::size_t width = table.dim(1);
  if (token >= table.dim(0)) throw std::out_of_range("reference decoder: token out of range");
  std::vector<double> e(table.data().begin() + static_cast<std::ptrdiff_t>(token * width),
                        table.data().begin() + static_cast<std::ptrdiff_t>((token + 1) * width));
  return naive_log_softmax(dense(model_, "output", feed(e), false));
}

double reference_caption_log_prob(const NairModel& model, const std::vector<double>& input,
                                  std::span<const std::size_t> tokens) {
  const auto rep = reference_representation(model, reference_features(model, input));
  ReferenceDecoder dec(model, rep.gen);
  double total = 0.0;
  std::size_t prev = token::kStart;
  for (std::size_t t : tokens) {
    total += dec.next_log_probs(prev).at(t);
    prev = t;
  }
  return total;
}

double reference_task_loss(const NairModel& model, const std::vector<double>& input, Label label,
                           std::span<const std::size_t> caption, double alpha, double beta) {
  const auto rep = reference_representation(model, reference_features(model, input));
  double cls_loss = 0.0, lang_loss = 0.0;
  const bool cls = has(model, "classifier.weight");
  const bool gen = has(model, "output.weight");
  if (cls) cls_loss = -naive_log_softmax(reference_class_logits(model, rep.cls)).at(static_cast<std::size_t>(label));
  if (gen) {
    ReferenceDecoder dec(model, rep.gen);
    std::size_t prev = token::kStart;
    for (std::size_t t = 0; t <= caption.size(); ++t) {
      const std::size_t target = t < caption.size() ? caption[t] : token::kEnd;
      lang_loss -= dec.next_log_probs(prev).at(target);
      prev = target;
    }
  }
  if (cls && gen) return alpha * cls_loss + beta * lang_loss;
  return cls ? cls_loss : lang_loss;
}

}  // namespace nair::oracles
