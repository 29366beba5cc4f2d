#pragma once
#include <string>
#include <vector>

#include "json.hpp"
#include "mofa/ir.h"

namespace mofa {

// fixed architecture constants for the built family
inline constexpr int kBodyKernel = 5;
inline constexpr int kIoKernel = 5;
inline constexpr int kUpKernel = 1;
inline constexpr int kBottleneckDen = 4;  // residual blocks pinch to c/4

struct StageCfg {
  std::int64_t channels = 1;
  int blocks = 1;
  bool operator==(const StageCfg&) const = default;
};

// defaults describe the reference denoiser-style network used throughout
struct ModelConfig {
  std::int64_t input_ch = 3;
  std::int64_t stem_ch = 24;
  std::vector<StageCfg> enc_stages = {{48, 2}, {96, 2}, {256, 4}, {512, 2}};
  std::int64_t middle_channels = 160;  // narrow transition after enc4
  int middle_blocks = 1;
  std::vector<StageCfg> dec_stages = {{256, 1}, {96, 1}, {48, 1}, {24, 1}};
  std::string downsample = "stride2-separable";  // | "avgpool+conv"
  std::string upsample = "deconv";  // | "conv-then-interp" | "interp-then-conv"
  std::string skip_merge = "add";   // | "concat"
  bool operator==(const ModelConfig&) const = default;
};

// strict: unknown fields are errors, missing fields take the defaults above
ModelConfig parse_config(const nlohmann::json& j);
nlohmann::ordered_json serialize_config(const ModelConfig& c);

// encoder/decoder U-shape with residual bottleneck blocks, skip connections
// tapping each encoder stage's pre-downsample input, and a narrow middle
NetGraph build_pmrid_like(const ModelConfig& c = {});

// a file may hold either a full graph ("nodes") or a model config; this picks
NetGraph model_from_json(const nlohmann::json& j);

}  // namespace mofa
