#pragma once
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mofa/analyzer.h"
#include "mofa/ir.h"

namespace mofa {

// ordered roadmap configuration; enabled passes run in the listed order
struct PassPlan {
  std::vector<std::string> enabled = {"P1_pconv", "P2_middle", "P3_cheap",
                                      "P4_updown", "P5_pdw"};
  std::pair<std::string, std::string> middle_pair = {"enc3", "dec2"};
  Portion widen_portion = {1, 2};
  std::int64_t pdw_threshold = 32;
  bool pdw_strict = false;  // true: convert only when c_p > T, not >=
  std::string updown_scope = "upsample_only";  // | "both" | "none"
  bool operator==(const PassPlan&) const = default;
};

struct PassRow {
  std::string name;
  int layers_rewritten = 0;
  std::uint64_t params_before = 0;
  std::uint64_t params_after = 0;
  std::uint64_t macs_before = 0;
  std::uint64_t macs_after = 0;
};

struct PassTrace {
  Dims4 input;
  std::vector<PassRow> rows;
};

// P1: body separable/vanilla convs become PConv(p=1/4); when channels change,
// the pointwise half survives to carry the channel change
NetGraph p1_to_pconv(const NetGraph& g, int* rewritten = nullptr);

// P2: widen every PConv in the named encoder/decoder pair of stages
NetGraph p2_widen_middle(const NetGraph& g,
                         std::pair<std::string, std::string> pair,
                         Portion widen = {1, 2}, int* rewritten = nullptr);

// P3: widen every PConv in the given (cheap) stages
NetGraph p3_widen_cheap(const NetGraph& g, const std::set<std::string>& cheap,
                        Portion widen = {1, 2}, int* rewritten = nullptr);

// P4: deconv -> stride-1 conv then 2x interpolation; with scope "both" also
// stride-2 downsample conv -> avgpool then the same conv at stride 1
NetGraph p4_decouple_updown(const NetGraph& g,
                            const std::string& scope = "upsample_only",
                            int* rewritten = nullptr);

// P5: PConv -> PDWConv wherever floor(d*p) clears the threshold
NetGraph p5_pconv_to_pdw(const NetGraph& g, std::int64_t threshold,
                         bool strict = false, int* rewritten = nullptr);

std::pair<NetGraph, PassTrace> run_roadmap(const NetGraph& g,
                                           const PassPlan& plan,
                                           Dims4 input = {1, 3, 256, 256});

PassPlan plan_from_json(const nlohmann::json& j);
nlohmann::ordered_json plan_to_json(const PassPlan& p);
nlohmann::ordered_json trace_to_json(const PassTrace& t);
PassTrace trace_from_json(const nlohmann::json& j);
std::string trace_to_csv(const PassTrace& t);

}  // namespace mofa
