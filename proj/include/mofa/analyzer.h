#pragma once
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mofa/ir.h"

namespace mofa {

// every emitted artifact carries these so numbers are never quoted without
// their counting convention
inline constexpr const char* kConventionNote = "MACs, bias excluded";
inline constexpr const char* kGeneratorVersion = "1.0.0";

inline constexpr double kDefaultCheapShare = 0.07;

enum class Convention { actual, all_vanilla_estimate };

std::string convention_name(Convention c);

struct LayerCost {
  std::string id;
  std::string stage;
  std::string kind;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  double mac_share = 0.0;
};

struct CostReport {
  std::vector<LayerCost> per_layer;
  std::uint64_t total_params = 0;
  std::uint64_t total_macs = 0;
  Convention convention = Convention::actual;
  Dims4 input_shape;
};

// parameter count including bias terms; zero for weightless layers
std::uint64_t layer_params(const LayerKind& k);

// multiply count for one layer given its input shape; "MACs, bias excluded".
// padding taps count: a k*k window is charged in full at every output pixel
std::uint64_t layer_macs(const LayerKind& k, Dims4 in);

// all_vanilla_estimate recosts every conv-family layer with the vanilla
// formula at its own output resolution (params stay actual); add/concat and
// weightless layers stay zero
CostReport analyze(const NetGraph& g, Dims4 input,
                   Convention convention = Convention::actual);

// body stages (enc*/middle/dec*) whose share of total MACs is below the
// threshold; io and resampling nodes are never candidates
std::set<std::string> cheap_layers(const CostReport& r,
                                   double threshold_share = kDefaultCheapShare);

nlohmann::ordered_json report_to_json(const CostReport& r);
std::string report_to_csv(const CostReport& r);

}  // namespace mofa
