#include "nair/evaluation.hpp"

#include "nair/error.hpp"

namespace nair {

std::string caption_text(const Caption& caption, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t id : strip_end(caption)) {
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

std::vector<EvalPair> caption_corpus(const NairModel& model, std::span<const ReviewExample* const> examples,
                                     const Vocabulary& vocab, const DecodeOptions& options,
                                     std::vector<Caption>* decoded) {
  std::vector<Tensor> inputs;
  inputs.reserve(examples.size());
  for (const ReviewExample* ex : examples) inputs.push_back(ex->input);
  std::vector<Caption> captions = decode_batch(model, inputs, options);
  std::vector<EvalPair> corpus;
  corpus.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    EvalPair pair;
    pair.candidate = decode_caption(strip_end(captions[i]), vocab);
    pair.references = comment_tokens(*examples[i]);
    if (pair.references.empty()) throw DataError("example '" + examples[i]->id + "' has no comments");
    corpus.push_back(std::move(pair));
  }
  if (decoded) *decoded = std::move(captions);
  return corpus;
}

MetricReport evaluate_model(const NairModel& model, std::span<const ReviewExample* const> examples,
                            const Vocabulary& vocab, const DecodeOptions& options,
                            std::vector<Caption>* decoded) {
  if (examples.empty()) throw ConfigError("nothing to evaluate: the split is empty");
  MetricReport report;
  report.model = std::string(variant_name(model.variant()));
  if (model.classifier) {
    std::vector<Label> predicted, actual;
    for (const ReviewExample* ex : examples) {
      predicted.push_back(predict_class(model, ex->input).label);
      actual.push_back(ex->label);
    }
    report.overall_accuracy = overall_accuracy(predicted, actual);
  }
  if (model.output) {
    const auto corpus = caption_corpus(model, examples, vocab, options, decoded);
    fill_caption_metrics(report, corpus);
  }
  return report;
}

}  // namespace nair
