#include "gldm/model.hpp"

#include <sstream>

#include "gldm/errors.hpp"

namespace gldm {
inline namespace GLDM_ABI {

ParamGroup param_group(const std::string& name) {
  if (name.rfind("rgb_encoder.", 0) == 0 || name.rfind("depth_encoder.", 0) == 0) {
    return ParamGroup::Cnn;
  }
  if (name.rfind("decoder.trans", 0) == 0) return ParamGroup::Transformer;
  return ParamGroup::Other;
}

GLDMNet::GLDMNet(const ModelConfig& config) : config_(config) {
  if (config.fusion.widths != config.decoder.widths) {
    throw ConfigError("fusion widths must equal decoder stage widths");
  }
  EncoderConfig enc = config.encoder;
  enc.seed = config.seed;
  auto [rgb, depth] = make_dual_encoder(enc);
  rgb_ = add_module("rgb_encoder", rgb);
  depth_ = add_module("depth_encoder", depth);

  Rng rng(config.seed * 0x9E3779B97F4A7C15ULL + 17);
  const auto& profile = rgb_->profile();
  for (int i = 0; i < 4; ++i) {
    fusion_[i] = add_module("fusion" + std::to_string(i + 1),
                            std::make_shared<FusionStage>(profile.channels[i], config.fusion.widths[i],
                                                          config.fusion, rng));
  }
  decoder_ = add_module("decoder", std::make_shared<Decoder>(config.decoder, rng));
}

SaliencyOutput GLDMNet::forward(const Var& rgb, const Var& depth,
                                std::array<FusionTrace, 4>* fusion_trace,
                                DecoderTrace* decoder_trace) {
  if (rgb.shape() != depth.shape()) {
    throw ShapeError("rgb " + shape_str(rgb.shape()) + " and depth " + shape_str(depth.shape()) +
                     " differ");
  }
  StageFeatures f_rgb = extract_stages(*rgb_, rgb);
  StageFeatures f_d = extract_stages(*depth_, depth);
  std::array<Var, 4> fused;
  for (int i = 0; i < 4; ++i) {
    fused[i] = fusion_[i]->forward(f_rgb.stages[i], f_d.stages[i],
                                   fusion_trace ? &(*fusion_trace)[i] : nullptr);
  }
  return decoder_->forward(fused, rgb.dim(2), rgb.dim(3), decoder_trace);
}

std::string GLDMNet::parameter_summary() const {
  std::ostringstream out;
  index_t cnn = 0, fusion = 0, transformer = 0, decoder = 0;
  for (const auto& p : named_parameters()) {
    const index_t n = p.var.value().numel();
    if (param_group(p.name) == ParamGroup::Cnn) {
      cnn += n;
    } else if (p.name.rfind("fusion", 0) == 0) {
      fusion += n;
    } else if (param_group(p.name) == ParamGroup::Transformer) {
      transformer += n;
    } else {
      decoder += n;
    }
  }
  out << "fusion.mode = " << fusion_mode_name(config_.fusion.mode) << "\n"
      << "decoder.transformer = " << transformer_kind_name(config_.decoder.transformer) << "\n"
      << "decoder.reconstruction = " << (config_.decoder.reconstruction ? "on" : "off") << "\n"
      << "params.encoders = " << cnn << "\n"
      << "params.fusion = " << fusion << "\n"
      << "params.transformer = " << transformer << "\n"
      << "params.decoder_other = " << decoder << "\n"
      << "params.total = " << parameter_count() << "\n";
  return out.str();
}

}  // namespace GLDM_ABI
}  // namespace gldm
