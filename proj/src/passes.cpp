#include "mofa/passes.h"

#include <algorithm>

namespace mofa {

namespace {

void bump(int* rewritten) {
  if (rewritten) ++*rewritten;
}

// when one node becomes a head/tail pair: incoming edges point at `head`,
// outgoing edges move to `tail`
void retarget(NetGraph& g, const std::string& old_id, const std::string& head,
              const std::string& tail) {
  for (auto& [a, b] : g.edges) {
    if (a == old_id) a = tail;
    if (b == old_id) b = head;
  }
}

}  // namespace

NetGraph p1_to_pconv(const NetGraph& g, int* rewritten) {
  NetGraph out = g;
  if (rewritten) *rewritten = 0;
  for (std::size_t i = 0; i < out.nodes.size(); ++i) {
    LayerNode& n = out.nodes[i];
    if (n.role != RoleTag::body) continue;
    std::int64_t in_ch = 0, out_ch = 0;
    int kernel = 0;
    bool keep_bias = true;
    ConvSpec tail_pw;
    if (const auto* s = std::get_if<SeparableConv>(&n.kind)) {
      if (s->depthwise.stride != 1) continue;
      in_ch = s->depthwise.in_ch;
      out_ch = s->pointwise.out_ch;
      kernel = s->depthwise.kernel;
      keep_bias = s->depthwise.bias;
      tail_pw = s->pointwise;
    } else if (const auto* v = std::get_if<VanillaConv>(&n.kind)) {
      if (v->spec.stride != 1) continue;
      in_ch = v->spec.in_ch;
      out_ch = v->spec.out_ch;
      kernel = v->spec.kernel;
      keep_bias = v->spec.bias;
      tail_pw = ConvSpec{in_ch, out_ch, 1, 1, v->spec.bias};
    } else {
      continue;
    }
    PConv pc{ConvSpec{in_ch, in_ch, kernel, 1, keep_bias}, Portion{1, 4}};
    if (in_ch == out_ch) {
      n.kind = pc;
    } else {
      // channel change: partial conv at the input width, pointwise keeps the
      // original in->out mapping
      const std::string id = n.id;
      const std::string pw_id = id + "_pw";
      n.kind = pc;
      LayerNode pw{pw_id, PointwiseConv{tail_pw}, n.stage, n.role};
      retarget(out, id, id, pw_id);
      out.edges.emplace_back(id, pw_id);
      out.nodes.insert(out.nodes.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                       std::move(pw));
      ++i;  // skip the node we just inserted
    }
    bump(rewritten);
  }
  return out;
}

namespace {

NetGraph widen_stages(const NetGraph& g, const std::set<std::string>& stages,
                      Portion widen, int* rewritten) {
  NetGraph out = g;
  if (rewritten) *rewritten = 0;
  for (auto& n : out.nodes) {
    if (!stages.count(n.stage)) continue;
    if (auto* p = std::get_if<PConv>(&n.kind)) {
      if (!(p->portion == widen)) {
        p->portion = widen;
        bump(rewritten);
      }
    }
  }
  return out;
}

}  // namespace

NetGraph p2_widen_middle(const NetGraph& g,
                         std::pair<std::string, std::string> pair,
                         Portion widen, int* rewritten) {
  for (const auto& stage : {pair.first, pair.second}) {
    bool found = false;
    for (const auto& n : g.nodes) {
      if (n.stage == stage) {
        found = true;
        break;
      }
    }
    if (!found) {
      throw Error(ErrorCode::stage_error,
                  "stage '" + stage + "' not found in graph");
    }
  }
  return widen_stages(g, {pair.first, pair.second}, widen, rewritten);
}

NetGraph p3_widen_cheap(const NetGraph& g, const std::set<std::string>& cheap,
                        Portion widen, int* rewritten) {
  return widen_stages(g, cheap, widen, rewritten);
}

NetGraph p4_decouple_updown(const NetGraph& g, const std::string& scope,
                            int* rewritten) {
  if (scope != "upsample_only" && scope != "both" && scope != "none") {
    throw Error(ErrorCode::config_error,
                "unknown updown scope '" + scope + "'");
  }
  NetGraph out = g;
  if (rewritten) *rewritten = 0;
  if (scope == "none") return out;
  for (std::size_t i = 0; i < out.nodes.size(); ++i) {
    LayerNode& n = out.nodes[i];
    if (const auto* d = std::get_if<Deconv>(&n.kind)) {
      // same conv arithmetic at the low resolution, then blow up 2x
      const std::string id = n.id;
      ConvSpec conv = d->spec;
      conv.stride = 1;
      const std::string conv_id = id + "_conv";
      const std::string interp_id = id + "_interp";
      retarget(out, id, conv_id, interp_id);
      n.id = conv_id;
      n.kind = VanillaConv{conv};
      LayerNode interp{interp_id, Interp2x{}, n.stage, n.role};
      out.edges.emplace_back(conv_id, interp_id);
      out.nodes.insert(out.nodes.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                       std::move(interp));
      ++i;
      bump(rewritten);
      continue;
    }
    if (scope != "both" || n.role != RoleTag::downsample) continue;
    LayerKind slow;  // the stride-1 version of a stride-2 downsampler
    if (auto* s = std::get_if<SeparableConv>(&n.kind)) {
      if (s->depthwise.stride != 2) continue;
      SeparableConv c = *s;
      c.depthwise.stride = 1;
      slow = c;
    } else if (auto* v = std::get_if<VanillaConv>(&n.kind)) {
      if (v->spec.stride != 2) continue;
      VanillaConv c = *v;
      c.spec.stride = 1;
      slow = c;
    } else if (auto* dw = std::get_if<DepthwiseConv>(&n.kind)) {
      if (dw->spec.stride != 2) continue;
      DepthwiseConv c = *dw;
      c.spec.stride = 1;
      slow = c;
    } else {
      continue;
    }
    const std::string id = n.id;
    const std::string pool_id = id + "_pool";
    const std::string conv_id = id + "_conv";
    retarget(out, id, pool_id, conv_id);
    n.id = pool_id;
    n.kind = AvgPool2x2{};
    LayerNode conv{conv_id, std::move(slow), n.stage, n.role};
    out.edges.emplace_back(pool_id, conv_id);
    out.nodes.insert(out.nodes.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                     std::move(conv));
    ++i;
    bump(rewritten);
  }
  return out;
}

NetGraph p5_pconv_to_pdw(const NetGraph& g, std::int64_t threshold,
                         bool strict, int* rewritten) {
  NetGraph out = g;
  if (rewritten) *rewritten = 0;
  for (auto& n : out.nodes) {
    if (const auto* p = std::get_if<PConv>(&n.kind)) {
      const std::int64_t cp = p->portion.cp(p->spec.in_ch);
      // floor(d*p) >= T is equivalent to d*p >= T for integer T
      const bool convert = strict ? cp > threshold : cp >= threshold;
      if (convert) {
        n.kind = PDWConv{p->spec, p->portion};
        bump(rewritten);
      }
    }
  }
  return out;
}

std::pair<NetGraph, PassTrace> run_roadmap(const NetGraph& g,
                                           const PassPlan& plan,
                                           Dims4 input) {
  auto violations = validate(g);
  if (!violations.empty()) {
    throw Error(ErrorCode::config_error,
                "baseline graph fails validation: " + violations.front());
  }
  static const std::set<std::string> kPasses = {
      "P1_pconv", "P2_middle", "P3_cheap", "P4_updown", "P5_pdw"};
  for (const auto& name : plan.enabled) {
    if (!kPasses.count(name)) {
      throw Error(ErrorCode::config_error, "unknown pass '" + name + "'");
    }
  }
  // "cheap" is decided by looking at the baseline's estimated distribution,
  // not at partially rewritten intermediates
  std::set<std::string> cheap;
  if (std::find(plan.enabled.begin(), plan.enabled.end(), "P3_cheap") !=
      plan.enabled.end()) {
    cheap = cheap_layers(analyze(g, input, Convention::all_vanilla_estimate));
  }
  NetGraph cur = g;
  PassTrace trace;
  trace.input = input;
  bool p1_ran = false;
  for (const auto& name : plan.enabled) {
    CostReport before = analyze(cur, input, Convention::actual);
    int rewritten = 0;
    if (name == "P1_pconv") {
      cur = p1_to_pconv(cur, &rewritten);
      p1_ran = true;
    } else if (name == "P2_middle") {
      cur = p2_widen_middle(cur, plan.middle_pair, plan.widen_portion,
                            &rewritten);
    } else if (name == "P3_cheap") {
      cur = p3_widen_cheap(cur, cheap, plan.widen_portion, &rewritten);
    } else if (name == "P4_updown") {
      cur = p4_decouple_updown(cur, plan.updown_scope, &rewritten);
    } else if (name == "P5_pdw") {
      bool has_pconv = false;
      for (const auto& n : cur.nodes) {
        if (std::holds_alternative<PConv>(n.kind)) has_pconv = true;
      }
      if (!p1_ran && !has_pconv) {
        throw Error(ErrorCode::config_error,
                    "P5_pdw requires P1_pconv to have run");
      }
      cur = p5_pconv_to_pdw(cur, plan.pdw_threshold, plan.pdw_strict,
                            &rewritten);
    }
    CostReport after = analyze(cur, input, Convention::actual);
    trace.rows.push_back({name, rewritten, before.total_params,
                          after.total_params, before.total_macs,
                          after.total_macs});
  }
  violations = validate(cur);
  if (!violations.empty()) {
    throw Error(ErrorCode::config_error,
                "roadmap produced an invalid graph: " + violations.front());
  }
  return {std::move(cur), std::move(trace)};
}

PassPlan plan_from_json(const nlohmann::json& j) {
  if (!j.is_object())
    throw Error(ErrorCode::config_error, "pass plan must be a json object");
  static const std::set<std::string> kKeys = {
      "enabled",    "middle_pair",  "widen_portion",
      "pdw_threshold", "pdw_strict", "updown_scope"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!kKeys.count(it.key()))
      throw Error(ErrorCode::config_error,
                  "unknown field '" + it.key() + "' in pass plan");
  }
  PassPlan p;
  try {
    if (j.contains("enabled")) {
      if (!j["enabled"].is_array())
        throw Error(ErrorCode::config_error, "'enabled' must be an array");
      p.enabled.clear();
      static const std::set<std::string> kPasses = {
          "P1_pconv", "P2_middle", "P3_cheap", "P4_updown", "P5_pdw"};
      for (const auto& e : j["enabled"]) {
        std::string name = e.get<std::string>();
        if (!kPasses.count(name))
          throw Error(ErrorCode::config_error, "unknown pass '" + name + "'");
        if (std::find(p.enabled.begin(), p.enabled.end(), name) !=
            p.enabled.end())
          throw Error(ErrorCode::config_error,
                      "pass '" + name + "' listed twice");
        p.enabled.push_back(name);
      }
    }
    if (j.contains("middle_pair")) {
      const auto& mp = j["middle_pair"];
      if (!mp.is_array() || mp.size() != 2)
        throw Error(ErrorCode::config_error,
                    "'middle_pair' must be a [enc, dec] pair");
      p.middle_pair = {mp[0].get<std::string>(), mp[1].get<std::string>()};
    }
    if (j.contains("widen_portion")) {
      const auto& wp = j["widen_portion"];
      if (!wp.is_array() || wp.size() != 2)
        throw Error(ErrorCode::config_error,
                    "'widen_portion' must be a [num, den] pair");
      p.widen_portion = {wp[0].get<int>(), wp[1].get<int>()};
      bool ok = p.widen_portion == Portion{1, 2} ||
                p.widen_portion == Portion{1, 4};
      if (!ok)
        throw Error(ErrorCode::config_error,
                    "widen_portion must be 1/2 or 1/4");
    }
    if (j.contains("pdw_threshold")) {
      p.pdw_threshold = j["pdw_threshold"].get<std::int64_t>();
      if (p.pdw_threshold < 0)
        throw Error(ErrorCode::config_error,
                    "pdw_threshold must be non-negative");
    }
    if (j.contains("pdw_strict")) p.pdw_strict = j["pdw_strict"].get<bool>();
    if (j.contains("updown_scope")) {
      p.updown_scope = j["updown_scope"].get<std::string>();
      if (p.updown_scope != "upsample_only" && p.updown_scope != "both" &&
          p.updown_scope != "none")
        throw Error(ErrorCode::config_error,
                    "unknown updown_scope '" + p.updown_scope + "'");
    }
  } catch (const Error&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error,
                std::string("bad pass plan: ") + e.what());
  }
  return p;
}

nlohmann::ordered_json plan_to_json(const PassPlan& p) {
  nlohmann::ordered_json j;
  j["enabled"] = p.enabled;
  j["middle_pair"] = {p.middle_pair.first, p.middle_pair.second};
  j["widen_portion"] = {p.widen_portion.num, p.widen_portion.den};
  j["pdw_threshold"] = p.pdw_threshold;
  j["pdw_strict"] = p.pdw_strict;
  j["updown_scope"] = p.updown_scope;
  return j;
}

nlohmann::ordered_json trace_to_json(const PassTrace& t) {
  nlohmann::ordered_json j;
  j["convention_note"] = kConventionNote;
  j["generator_version"] = kGeneratorVersion;
  j["input"] = {t.input.n, t.input.c, t.input.h, t.input.w};
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    j["rows"].push_back(
        {{"pass", r.name},
         {"layers_rewritten", r.layers_rewritten},
         {"params_before", r.params_before},
         {"params_after", r.params_after},
         {"params_delta", static_cast<std::int64_t>(r.params_after) -
                              static_cast<std::int64_t>(r.params_before)},
         {"macs_before", r.macs_before},
         {"macs_after", r.macs_after},
         {"macs_delta", static_cast<std::int64_t>(r.macs_after) -
                            static_cast<std::int64_t>(r.macs_before)}});
  }
  return j;
}

PassTrace trace_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("rows") || !j["rows"].is_array()) {
    throw Error(ErrorCode::parse_error,
                "pass trace json needs a 'rows' array");
  }
  PassTrace t;
  try {
    if (j.contains("input")) {
      const auto& in = j["input"];
      if (!in.is_array() || in.size() != 4)
        throw Error(ErrorCode::parse_error,
                    "trace 'input' must be [n,c,h,w]");
      t.input = {in[0].get<std::int64_t>(), in[1].get<std::int64_t>(),
                 in[2].get<std::int64_t>(), in[3].get<std::int64_t>()};
    }
    for (const auto& rj : j["rows"]) {
      PassRow r;
      r.name = rj.at("pass").get<std::string>();
      r.layers_rewritten = rj.value("layers_rewritten", 0);
      r.params_before = rj.at("params_before").get<std::uint64_t>();
      r.params_after = rj.at("params_after").get<std::uint64_t>();
      r.macs_before = rj.at("macs_before").get<std::uint64_t>();
      r.macs_after = rj.at("macs_after").get<std::uint64_t>();
      t.rows.push_back(std::move(r));
    }
  } catch (const Error&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error,
                std::string("bad pass trace: ") + e.what());
  }
  return t;
}

std::string trace_to_csv(const PassTrace& t) {
  std::string out = "# convention: ";
  out += kConventionNote;
  out += "\r\n";
  out +=
      "pass,layers_rewritten,params_before,params_after,params_delta,"
      "macs_before,macs_after,macs_delta\r\n";
  for (const auto& r : t.rows) {
    const std::int64_t dp = static_cast<std::int64_t>(r.params_after) -
                            static_cast<std::int64_t>(r.params_before);
    const std::int64_t dm = static_cast<std::int64_t>(r.macs_after) -
                            static_cast<std::int64_t>(r.macs_before);
    out += r.name + "," + std::to_string(r.layers_rewritten) + "," +
           std::to_string(r.params_before) + "," +
           std::to_string(r.params_after) + "," + std::to_string(dp) + "," +
           std::to_string(r.macs_before) + "," +
           std::to_string(r.macs_after) + "," + std::to_string(dm) + "\r\n";
  }
  return out;
}

}  // namespace mofa
