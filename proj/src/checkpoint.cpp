#include "nair/checkpoint.hpp"


#include "nair/error.hpp"
#include "nair/io.hpp"

namespace nair {

namespace {

constexpr std::string_view kMagic = "NAIRCKPT1";

struct RawParam {
  Shape shape;
  std::vector<double> values;
};

const RawParam& require(const std::map<std::string, RawParam>& raw, const std::string& name) {
  auto it = raw.find(name);
  if (it == raw.end()) throw DataError("checkpoint lacks parameter '" + name + "'");
  return it->second;
}

ModelConfig infer_config(Variant variant, const std::map<std::string, RawParam>& raw) {
  ModelConfig config;
  config.variant = variant;
  config.forget_bias.reset();
  config.encoder_mode = raw.count("encoder.fc.weight") ? EncoderMode::kTrainableTiny
                                                       : EncoderMode::kFrozenFeatures;
  if (config.encoder_mode == EncoderMode::kTrainableTiny) {
    config.feature_width = require(raw, "encoder.fc.weight").shape.at(0);
  }
  if (variant == Variant::kModelI || variant == Variant::kModelII) {
    const Shape& s = require(raw, "shared.weight").shape;
    config.shared_width = s.at(0);
    config.feature_width = s.at(1);
  }
  if (variant == Variant::kModelII) {
    config.specific_width = require(raw, "cls_specific.weight").shape.at(0);
  }
  if (has_classifier(variant) && config.encoder_mode == EncoderMode::kFrozenFeatures &&
      variant != Variant::kModelI && variant != Variant::kModelII) {
    config.feature_width = require(raw, "classifier.weight").shape.at(1);
  }
  if (has_generator(variant)) {
    const Shape& table = require(raw, "embedding.table").shape;
    config.vocab_size = table.at(0);
    config.embed_width = table.at(1);
    config.hidden_width = require(raw, "lstm.l0.w_hidden").shape.at(1);
    config.lstm_layers = 0;
    while (raw.count("lstm.l" + std::to_string(config.lstm_layers) + ".w_input")) ++config.lstm_layers;
    if (variant == Variant::kV2L && config.encoder_mode == EncoderMode::kFrozenFeatures) {
      auto it = raw.find("image_proj.weight");
      config.feature_width = it != raw.end() ? it->second.shape.at(1) : config.embed_width;
    }
  }
  return config;
}

}  // namespace

std::string serialize_checkpoint(const NairModel& model) {
  std::string out(kMagic);
  out.push_back(static_cast<char>(model.variant()));
  for (const auto& [name, tensor] : model.parameters()) {
    io::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(tensor.rank()));
    for (std::size_t d : tensor.shape()) io::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : tensor.data()) io::put_f64(out, v);
  }
  return out;
}

NairModel deserialize_checkpoint(const std::string& bytes) {
  io::Reader in(bytes, "checkpoint");
  if (in.take(kMagic.size()) != kMagic) throw DataError("checkpoint: bad magic");
  const std::uint8_t tag = in.u8();
  if (tag > static_cast<std::uint8_t>(Variant::kModelII)) {
    throw DataError("checkpoint: unknown variant tag " + std::to_string(tag));
  }
  const auto variant = static_cast<Variant>(tag);
  std::map<std::string, RawParam> raw;
  std::string previous;
  while (!in.done()) {
    std::string name(in.take(in.u32()));
    if (!raw.empty() && name <= previous) throw DataError("checkpoint: parameters out of order at '" + name + "'");
    RawParam p;
    const std::uint8_t rank = in.u8();
    if (rank == 0) throw DataError("checkpoint: zero-rank parameter '" + name + "'");
    for (std::uint8_t r = 0; r < rank; ++r) p.shape.push_back(in.u32());
    p.values.resize(shape_size(p.shape));
    for (double& v : p.values) v = in.f64();
    previous = name;
    raw.emplace(std::move(name), std::move(p));
  }
  NairModel model(infer_config(variant, raw));
  ParameterMap params;
  for (auto& [name, p] : raw) params.emplace(name, Tensor(p.shape, std::move(p.values)));
  try {
    model.copy_parameters_from(params);
  } catch (const Error& e) {
    throw DataError(std::string("checkpoint does not describe a consistent model: ") + e.what());
  }
  return model;
}

void save_checkpoint(const NairModel& model, const std::filesystem::path& path) {
  io::write_file(path, serialize_checkpoint(model));
}

NairModel load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(io::read_file(path));
}

}  // namespace nair
