#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mofa/ir.h"
#include "mofa/tensor.h"

namespace mofa {

// flat buffers; w/b for the (first) conv, w2/b2 for a separable's pointwise.
// layouts: vanilla/deconv [out][in][kh][kw], depthwise/pdw [c][kh][kw],
// pointwise [out][in], pconv [cp][cp][kh][kw]
struct NodeWeights {
  std::vector<float> w;
  std::vector<float> b;
  std::vector<float> w2;
  std::vector<float> b2;
};

struct Weights {
  std::uint64_t seed = 0;
  std::map<std::string, NodeWeights> per_node;
};

// each node gets its own stream seeded from its id, so weights are stable
// under graph edits elsewhere
NodeWeights make_layer_weights(const LayerKind& k, const std::string& id,
                               std::uint64_t seed);
Weights make_weights(const NetGraph& g, std::uint64_t seed);

struct ExecStats {
  std::map<std::string, std::uint64_t> multiplies;
  std::map<std::string, std::uint64_t> checksums;
  std::uint64_t total_multiplies = 0;
};

// runs one single-input layer; counts every weight*activation multiply the
// naive loops execute, including padding taps multiplied as literal zero
Tensor run_layer(const LayerKind& k, const NodeWeights& nw, const Tensor& x,
                 std::uint64_t* mults);

// whole-graph execution in topological order, float32 throughout,
// single-threaded; throws Error(non_finite) naming the first offending node
std::pair<Tensor, ExecStats> forward(const NetGraph& g, const Weights& w,
                                     const Tensor& x);

std::map<std::string, std::uint64_t> count_macs(const NetGraph& g,
                                                const Weights& w,
                                                const Tensor& x);

}  // namespace mofa
