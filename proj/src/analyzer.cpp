#include "mofa/analyzer.h"

#include <cstdio>
#include <map>

namespace mofa {

std::string convention_name(Convention c) {
  return c == Convention::actual ? "actual" : "all-vanilla-estimate";
}

namespace {

std::uint64_t u(std::int64_t v) { return static_cast<std::uint64_t>(v); }

std::uint64_t conv_params(const ConvSpec& s, std::uint64_t weights_per_out,
                          std::uint64_t outs) {
  return outs * weights_per_out + (s.bias ? outs : 0);
}

Dims4 out_dims_stride(Dims4 in, std::int64_t out_ch, int stride) {
  Dims4 o = in;
  o.c = out_ch;
  if (stride == 2) {
    o.h = (in.h + 1) / 2;
    o.w = (in.w + 1) / 2;
  }
  return o;
}

}  // namespace

std::uint64_t layer_params(const LayerKind& k) {
  if (const auto* v = std::get_if<VanillaConv>(&k)) {
    const ConvSpec& s = v->spec;
    return conv_params(s, u(s.in_ch) * u(s.kernel) * u(s.kernel), u(s.out_ch));
  }
  if (const auto* v = std::get_if<DepthwiseConv>(&k)) {
    const ConvSpec& s = v->spec;
    return conv_params(s, u(s.kernel) * u(s.kernel), u(s.out_ch));
  }
  if (const auto* v = std::get_if<PointwiseConv>(&k)) {
    const ConvSpec& s = v->spec;
    return conv_params(s, u(s.in_ch), u(s.out_ch));
  }
  if (const auto* v = std::get_if<SeparableConv>(&k)) {
    return layer_params(DepthwiseConv{v->depthwise}) +
           layer_params(PointwiseConv{v->pointwise});
  }
  if (const auto* v = std::get_if<PConv>(&k)) {
    const ConvSpec& s = v->spec;
    std::uint64_t cp = u(v->portion.cp(s.in_ch));
    return cp * cp * u(s.kernel) * u(s.kernel) + (s.bias ? cp : 0);
  }
  if (const auto* v = std::get_if<PDWConv>(&k)) {
    const ConvSpec& s = v->spec;
    std::uint64_t cp = u(v->portion.cp(s.in_ch));
    return cp * u(s.kernel) * u(s.kernel) + (s.bias ? cp : 0);
  }
  if (const auto* v = std::get_if<Deconv>(&k)) {
    const ConvSpec& s = v->spec;
    return conv_params(s, u(s.in_ch) * u(s.kernel) * u(s.kernel), u(s.out_ch));
  }
  return 0;
}

std::uint64_t layer_macs(const LayerKind& k, Dims4 in) {
  std::uint64_t n = u(in.n);
  if (const auto* v = std::get_if<VanillaConv>(&k)) {
    const ConvSpec& s = v->spec;
    Dims4 o = out_dims_stride(in, s.out_ch, s.stride);
    return n * u(o.h) * u(o.w) * u(s.out_ch) * u(s.in_ch) * u(s.kernel) *
           u(s.kernel);
  }
  if (const auto* v = std::get_if<DepthwiseConv>(&k)) {
    const ConvSpec& s = v->spec;
    Dims4 o = out_dims_stride(in, s.out_ch, s.stride);
    return n * u(o.h) * u(o.w) * u(s.out_ch) * u(s.kernel) * u(s.kernel);
  }
  if (const auto* v = std::get_if<PointwiseConv>(&k)) {
    const ConvSpec& s = v->spec;
    return n * u(in.h) * u(in.w) * u(s.in_ch) * u(s.out_ch);
  }
  if (const auto* v = std::get_if<SeparableConv>(&k)) {
    Dims4 mid = out_dims_stride(in, v->depthwise.out_ch, v->depthwise.stride);
    return layer_macs(DepthwiseConv{v->depthwise}, in) +
           layer_macs(PointwiseConv{v->pointwise}, mid);
  }
  if (const auto* v = std::get_if<PConv>(&k)) {
    std::uint64_t cp = u(v->portion.cp(v->spec.in_ch));
    return n * u(in.h) * u(in.w) * cp * cp * u(v->spec.kernel) *
           u(v->spec.kernel);
  }
  if (const auto* v = std::get_if<PDWConv>(&k)) {
    std::uint64_t cp = u(v->portion.cp(v->spec.in_ch));
    return n * u(in.h) * u(in.w) * cp * u(v->spec.kernel) * u(v->spec.kernel);
  }
  if (const auto* v = std::get_if<Deconv>(&k)) {
    const ConvSpec& s = v->spec;
    // stride-2 transposed conv touches every weight once per *input* pixel
    return n * u(in.h) * u(in.w) * u(s.in_ch) * u(s.out_ch) * u(s.kernel) *
           u(s.kernel);
  }
  return 0;
}

namespace {

// vanilla-formula recosting used by the all_vanilla_estimate convention
std::uint64_t vanilla_equivalent_macs(const LayerKind& k, Dims4 out) {
  std::int64_t in_ch = 0, out_ch = 0, kernel = 0;
  if (const auto* v = std::get_if<VanillaConv>(&k)) {
    in_ch = v->spec.in_ch, out_ch = v->spec.out_ch, kernel = v->spec.kernel;
  } else if (const auto* v = std::get_if<DepthwiseConv>(&k)) {
    in_ch = v->spec.in_ch, out_ch = v->spec.out_ch, kernel = v->spec.kernel;
  } else if (const auto* v = std::get_if<PointwiseConv>(&k)) {
    in_ch = v->spec.in_ch, out_ch = v->spec.out_ch, kernel = 1;
  } else if (const auto* v = std::get_if<SeparableConv>(&k)) {
    in_ch = v->depthwise.in_ch, out_ch = v->pointwise.out_ch,
    kernel = v->depthwise.kernel;
  } else if (const auto* v = std::get_if<PConv>(&k)) {
    in_ch = v->spec.in_ch, out_ch = v->spec.out_ch, kernel = v->spec.kernel;
  } else if (const auto* v = std::get_if<PDWConv>(&k)) {
    in_ch = v->spec.in_ch, out_ch = v->spec.out_ch, kernel = v->spec.kernel;
  } else if (const auto* v = std::get_if<Deconv>(&k)) {
    in_ch = v->spec.in_ch, out_ch = v->spec.out_ch, kernel = v->spec.kernel;
  } else {
    return 0;
  }
  return u(out.n) * u(out.h) * u(out.w) * u(out_ch) * u(in_ch) * u(kernel) *
         u(kernel);
}

}  // namespace

CostReport analyze(const NetGraph& g, Dims4 input, Convention convention) {
  ShapeMap shapes = infer_shapes(g, input);
  CostReport r;
  r.convention = convention;
  r.input_shape = input;
  for (const auto& node : g.nodes) {
    auto producers = g.inputs_of(node.id);
    Dims4 in = producers.empty() ? input : shapes.at(producers.front());
    LayerCost row;
    row.id = node.id;
    row.stage = node.stage;
    row.kind = kind_name(node.kind);
    row.params = layer_params(node.kind);
    row.macs = convention == Convention::actual
                   ? layer_macs(node.kind, in)
                   : vanilla_equivalent_macs(node.kind, shapes.at(node.id));
    r.total_params += row.params;
    r.total_macs += row.macs;
    r.per_layer.push_back(row);
  }
  if (r.total_macs > 0) {
    for (auto& row : r.per_layer) {
      row.mac_share =
          static_cast<double>(row.macs) / static_cast<double>(r.total_macs);
    }
  }
  return r;
}

std::set<std::string> cheap_layers(const CostReport& r,
                                   double threshold_share) {
  std::map<std::string, std::uint64_t> per_stage;
  for (const auto& row : r.per_layer) {
    if (is_body_stage(row.stage)) per_stage[row.stage] += row.macs;
  }
  std::set<std::string> out;
  if (r.total_macs == 0) return out;
  for (const auto& [stage, macs] : per_stage) {
    double share =
        static_cast<double>(macs) / static_cast<double>(r.total_macs);
    if (share < threshold_share) out.insert(stage);
  }
  return out;
}

nlohmann::ordered_json report_to_json(const CostReport& r) {
  nlohmann::ordered_json j;
  j["convention"] = convention_name(r.convention);
  j["convention_note"] = kConventionNote;
  j["generator_version"] = kGeneratorVersion;
  j["input_shape"] = {r.input_shape.n, r.input_shape.c, r.input_shape.h,
                      r.input_shape.w};
  j["totals"] = {{"params", r.total_params}, {"macs", r.total_macs}};
  j["per_layer"] = nlohmann::ordered_json::array();
  for (const auto& row : r.per_layer) {
    j["per_layer"].push_back({{"id", row.id},
                              {"stage", row.stage},
                              {"kind", row.kind},
                              {"params", row.params},
                              {"macs", row.macs},
                              {"mac_share", row.mac_share}});
  }
  return j;
}

std::string report_to_csv(const CostReport& r) {
  std::string out = "# convention: ";
  out += convention_name(r.convention);
  out += "; ";
  out += kConventionNote;
  out += "\r\nid,stage,kind,params,macs,mac_share\r\n";
  char buf[64];
  for (const auto& row : r.per_layer) {
    std::snprintf(buf, sizeof(buf), "%.9f", row.mac_share);
    out += row.id + "," + row.stage + "," + row.kind + "," +
           std::to_string(row.params) + "," + std::to_string(row.macs) + "," +
           buf + "\r\n";
  }
  out += "total,,," + std::to_string(r.total_params) + "," +
         std::to_string(r.total_macs) + ",1.000000000\r\n";
  return out;
}

}  // namespace mofa
