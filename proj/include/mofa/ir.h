#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mofa/tensor.h"

namespace mofa {

// 2d conv hyperparameters; padding is always (kernel-1)/2 so stride-1 layers
// preserve resolution
struct ConvSpec {
  std::int64_t in_ch = 1;
  std::int64_t out_ch = 1;
  int kernel = 3;
  int stride = 1;
  bool bias = true;
  bool operator==(const ConvSpec&) const = default;
};

// channel fraction for partial convolutions, restricted to 1/4 and 1/2
struct Portion {
  int num = 1;
  int den = 4;
  std::int64_t cp(std::int64_t channels) const {
    return channels * num / den;  // floor(d*p)
  }
  bool operator==(const Portion&) const = default;
};

struct VanillaConv {
  ConvSpec spec;
  bool operator==(const VanillaConv&) const = default;
};
struct DepthwiseConv {  // in_ch == out_ch, one k*k filter per channel
  ConvSpec spec;
  bool operator==(const DepthwiseConv&) const = default;
};
struct PointwiseConv {  // kernel == 1
  ConvSpec spec;
  bool operator==(const PointwiseConv&) const = default;
};
struct SeparableConv {  // depthwise then pointwise; stride lives in depthwise
  ConvSpec depthwise;
  ConvSpec pointwise;
  bool operator==(const SeparableConv&) const = default;
};
struct PConv {  // vanilla conv on the first cp channels, rest pass through
  ConvSpec spec;  // in_ch == out_ch == d, stride 1
  Portion portion;
  bool operator==(const PConv&) const = default;
};
struct PDWConv {  // depthwise conv on the first cp channels, rest pass through
  ConvSpec spec;
  Portion portion;
  bool operator==(const PDWConv&) const = default;
};
struct Deconv {  // transposed conv, stride 2, doubles resolution exactly
  ConvSpec spec;
  bool operator==(const Deconv&) const = default;
};
struct AvgPool2x2 {
  bool operator==(const AvgPool2x2&) const = default;
};
enum class InterpMode { nearest, bilinear };
struct Interp2x {
  InterpMode mode = InterpMode::nearest;
  bool operator==(const Interp2x&) const = default;
};
enum class ActKind { relu };
struct Activation {
  ActKind kind = ActKind::relu;
  bool operator==(const Activation&) const = default;
};
struct Add {
  bool operator==(const Add&) const = default;
};
struct ConcatSkip {
  bool operator==(const ConcatSkip&) const = default;
};

using LayerKind =
    std::variant<VanillaConv, DepthwiseConv, PointwiseConv, SeparableConv,
                 PConv, PDWConv, Deconv, AvgPool2x2, Interp2x, Activation, Add,
                 ConcatSkip>;

std::string kind_name(const LayerKind& k);

enum class RoleTag { io, body, downsample, upsample };

std::string role_to_string(RoleTag r);
RoleTag role_from_string(const std::string& s);

// stage tags: "input", "enc1".."enc4", "middle", "dec1".."dec4", "output",
// "updown"
bool is_valid_stage(const std::string& s);
bool is_body_stage(const std::string& s);  // enc*/middle/dec*

struct LayerNode {
  std::string id;
  LayerKind kind;
  std::string stage;
  RoleTag role = RoleTag::body;
};

bool node_equal(const LayerNode& a, const LayerNode& b);

struct SkipSpec {
  std::string enc_stage;
  std::string dec_stage;
  std::string merge = "add";  // "add" | "concat"
  bool operator==(const SkipSpec&) const = default;
};

struct NetGraph {
  std::vector<LayerNode> nodes;  // kept in topological order by construction
  std::vector<std::pair<std::string, std::string>> edges;  // producer, consumer
  std::vector<SkipSpec> skips;

  LayerNode* find(const std::string& id);
  const LayerNode* find(const std::string& id) const;
  std::vector<std::string> inputs_of(const std::string& id) const;
  std::vector<std::string> outputs_of(const std::string& id) const;
};

bool graph_equal(const NetGraph& a, const NetGraph& b);

using ShapeMap = std::map<std::string, Dims4>;

// per-node *output* shapes; throws Error(shape_mismatch) naming the offending
// node on any inconsistency, and on cycles or dangling edges
ShapeMap infer_shapes(const NetGraph& g, Dims4 input);

// returns human-readable structural violations; never throws
std::vector<std::string> validate(const NetGraph& g);

// topological order of node ids (Kahn); throws Error(shape_mismatch) on cycle
std::vector<std::string> topo_order(const NetGraph& g);

nlohmann::ordered_json graph_to_json(const NetGraph& g);
NetGraph graph_from_json(const nlohmann::json& j);

}  // namespace mofa
