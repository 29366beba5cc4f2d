#include "mofa/ir.h"

#include <algorithm>
#include <deque>
#include <set>

namespace mofa {

namespace {

struct KindNameVisitor {
  std::string operator()(const VanillaConv&) const { return "vanilla_conv"; }
  std::string operator()(const DepthwiseConv&) const {
    return "depthwise_conv";
  }
  std::string operator()(const PointwiseConv&) const {
    return "pointwise_conv";
  }
  std::string operator()(const SeparableConv&) const {
    return "separable_conv";
  }
  std::string operator()(const PConv&) const { return "pconv"; }
  std::string operator()(const PDWConv&) const { return "pdwconv"; }
  std::string operator()(const Deconv&) const { return "deconv"; }
  std::string operator()(const AvgPool2x2&) const { return "avgpool2x2"; }
  std::string operator()(const Interp2x&) const { return "interp2x"; }
  std::string operator()(const Activation&) const { return "activation"; }
  std::string operator()(const Add&) const { return "add"; }
  std::string operator()(const ConcatSkip&) const { return "concat"; }
};

Dims4 conv_out_dims(Dims4 in, std::int64_t out_ch, int stride) {
  Dims4 out = in;
  out.c = out_ch;
  if (stride == 2) {
    out.h = (in.h + 1) / 2;  // pad (k-1)/2 keeps ceil(h/2)
    out.w = (in.w + 1) / 2;
  }
  return out;
}

}  // namespace

std::string kind_name(const LayerKind& k) {
  return std::visit(KindNameVisitor{}, k);
}

std::string role_to_string(RoleTag r) {
  switch (r) {
    case RoleTag::io: return "io";
    case RoleTag::body: return "body";
    case RoleTag::downsample: return "downsample";
    case RoleTag::upsample: return "upsample";
  }
  return "body";
}

RoleTag role_from_string(const std::string& s) {
  if (s == "io") return RoleTag::io;
  if (s == "body") return RoleTag::body;
  if (s == "downsample") return RoleTag::downsample;
  if (s == "upsample") return RoleTag::upsample;
  throw Error(ErrorCode::parse_error, "unknown role tag '" + s + "'");
}

bool is_valid_stage(const std::string& s) {
  static const std::set<std::string> kStages = {
      "input", "enc1", "enc2", "enc3", "enc4",   "middle", "dec1",
      "dec2",  "dec3", "dec4", "output", "updown"};
  return kStages.count(s) > 0;
}

bool is_body_stage(const std::string& s) {
  return is_valid_stage(s) && s != "input" && s != "output" && s != "updown";
}

bool node_equal(const LayerNode& a, const LayerNode& b) {
  return a.id == b.id && a.stage == b.stage && a.role == b.role &&
         a.kind == b.kind;
}

LayerNode* NetGraph::find(const std::string& id) {
  for (auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

const LayerNode* NetGraph::find(const std::string& id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

std::vector<std::string> NetGraph::inputs_of(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& [a, b] : edges)
    if (b == id) out.push_back(a);
  return out;
}

std::vector<std::string> NetGraph::outputs_of(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& [a, b] : edges)
    if (a == id) out.push_back(b);
  return out;
}

bool graph_equal(const NetGraph& a, const NetGraph& b) {
  if (a.nodes.size() != b.nodes.size()) return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i)
    if (!node_equal(a.nodes[i], b.nodes[i])) return false;
  return a.edges == b.edges && a.skips == b.skips;
}

std::vector<std::string> topo_order(const NetGraph& g) {
  std::map<std::string, int> indeg;
  for (const auto& n : g.nodes) indeg[n.id] = 0;
  for (const auto& [a, b] : g.edges) {
    if (indeg.count(b)) ++indeg[b];
  }
  std::deque<std::string> ready;
  for (const auto& n : g.nodes)
    if (indeg[n.id] == 0) ready.push_back(n.id);
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string id = ready.front();
    ready.pop_front();
    order.push_back(id);
    for (const auto& nxt : g.outputs_of(id)) {
      auto it = indeg.find(nxt);
      if (it != indeg.end() && --it->second == 0) ready.push_back(nxt);
    }
  }
  if (order.size() != g.nodes.size()) {
    throw Error(ErrorCode::shape_mismatch, "graph contains a cycle");
  }
  return order;
}

ShapeMap infer_shapes(const NetGraph& g, Dims4 input) {
  if (input.n < 1 || input.c < 1 || input.h < 1 || input.w < 1) {
    throw Error(ErrorCode::invalid_shape,
                "input shape must be positive, got " + dims_to_string(input));
  }
  for (const auto& [a, b] : g.edges) {
    if (!g.find(a) || !g.find(b)) {
      throw Error(ErrorCode::shape_mismatch,
                  "edge references unknown node '" + (g.find(a) ? b : a) + "'");
    }
  }
  ShapeMap shapes;
  auto order = topo_order(g);
  for (const auto& id : order) {
    const LayerNode* node = g.find(id);
    auto producers = g.inputs_of(id);
    std::vector<Dims4> in_shapes;
    if (producers.empty()) {
      in_shapes.push_back(input);  // graph input feeds the source node
    } else {
      for (const auto& p : producers) in_shapes.push_back(shapes.at(p));
    }
    auto expect_single = [&]() -> Dims4 {
      if (in_shapes.size() != 1) {
        throw Error(ErrorCode::shape_mismatch,
                    "node '" + id + "': expected exactly 1 input, got " +
                        std::to_string(in_shapes.size()));
      }
      return in_shapes[0];
    };
    auto check_in_ch = [&](std::int64_t want, std::int64_t got) {
      if (want != got) {
        throw Error(ErrorCode::shape_mismatch,
                    "node '" + id + "': expected " + std::to_string(want) +
                        " input channels, got " + std::to_string(got));
      }
    };
    Dims4 out;
    if (const auto* v = std::get_if<VanillaConv>(&node->kind)) {
      Dims4 in = expect_single();
      check_in_ch(v->spec.in_ch, in.c);
      out = conv_out_dims(in, v->spec.out_ch, v->spec.stride);
    } else if (const auto* d = std::get_if<DepthwiseConv>(&node->kind)) {
      Dims4 in = expect_single();
      check_in_ch(d->spec.in_ch, in.c);
      out = conv_out_dims(in, d->spec.out_ch, d->spec.stride);
    } else if (const auto* p = std::get_if<PointwiseConv>(&node->kind)) {
      Dims4 in = expect_single();
      check_in_ch(p->spec.in_ch, in.c);
      out = conv_out_dims(in, p->spec.out_ch, p->spec.stride);
    } else if (const auto* s = std::get_if<SeparableConv>(&node->kind)) {
      Dims4 in = expect_single();
      check_in_ch(s->depthwise.in_ch, in.c);
      Dims4 mid = conv_out_dims(in, s->depthwise.out_ch, s->depthwise.stride);
      out = conv_out_dims(mid, s->pointwise.out_ch, s->pointwise.stride);
    } else if (const auto* p = std::get_if<PConv>(&node->kind)) {
      Dims4 in = expect_single();
      check_in_ch(p->spec.in_ch, in.c);
      out = in;
    } else if (const auto* p = std::get_if<PDWConv>(&node->kind)) {
      Dims4 in = expect_single();
      check_in_ch(p->spec.in_ch, in.c);
      out = in;
    } else if (const auto* d = std::get_if<Deconv>(&node->kind)) {
      Dims4 in = expect_single();
      check_in_ch(d->spec.in_ch, in.c);
      out = {in.n, d->spec.out_ch, in.h * 2, in.w * 2};
    } else if (std::holds_alternative<AvgPool2x2>(node->kind)) {
      Dims4 in = expect_single();
      if (in.h < 2 || in.w < 2) {
        throw Error(ErrorCode::shape_mismatch,
                    "node '" + id + "': avgpool2x2 needs h,w >= 2, got " +
                        dims_to_string(in));
      }
      out = {in.n, in.c, in.h / 2, in.w / 2};
    } else if (std::holds_alternative<Interp2x>(node->kind)) {
      Dims4 in = expect_single();
      out = {in.n, in.c, in.h * 2, in.w * 2};
    } else if (std::holds_alternative<Activation>(node->kind)) {
      out = expect_single();
    } else if (std::holds_alternative<Add>(node->kind)) {
      if (in_shapes.size() < 2) {
        throw Error(ErrorCode::shape_mismatch,
                    "node '" + id + "': add needs at least 2 inputs");
      }
      for (const auto& s : in_shapes) {
        if (!(s == in_shapes[0])) {
          throw Error(ErrorCode::shape_mismatch,
                      "node '" + id + "': add inputs disagree, " +
                          dims_to_string(in_shapes[0]) + " vs " +
                          dims_to_string(s));
        }
      }
      out = in_shapes[0];
    } else if (std::holds_alternative<ConcatSkip>(node->kind)) {
      if (in_shapes.size() < 2) {
        throw Error(ErrorCode::shape_mismatch,
                    "node '" + id + "': concat needs at least 2 inputs");
      }
      out = in_shapes[0];
      for (std::size_t i = 1; i < in_shapes.size(); ++i) {
        const Dims4& s = in_shapes[i];
        if (s.n != out.n || s.h != out.h || s.w != out.w) {
          throw Error(ErrorCode::shape_mismatch,
                      "node '" + id + "': concat inputs disagree, " +
                          dims_to_string(in_shapes[0]) + " vs " +
                          dims_to_string(s));
        }
        out.c += s.c;
      }
    }
    shapes[id] = out;
  }
  return shapes;
}

std::vector<std::string> validate(const NetGraph& g) {
  std::vector<std::string> out;
  std::set<std::string> ids;
  std::set<std::string> stages_present;
  for (const auto& n : g.nodes) {
    if (n.id.empty()) out.push_back("node with empty id");
    if (!ids.insert(n.id).second)
      out.push_back("duplicate node id '" + n.id + "'");
    if (!is_valid_stage(n.stage))
      out.push_back("node '" + n.id + "': unknown stage tag '" + n.stage +
                    "'");
    stages_present.insert(n.stage);
  }

  auto check_spec = [&](const std::string& id, const ConvSpec& s) {
    if (s.kernel < 1 || s.kernel % 2 == 0)
      out.push_back("node '" + id + "': kernel must be odd and positive");
    if (s.stride != 1 && s.stride != 2)
      out.push_back("node '" + id + "': stride must be 1 or 2");
    if (s.in_ch < 1 || s.out_ch < 1)
      out.push_back("node '" + id + "': channel counts must be positive");
  };
  auto check_portion = [&](const std::string& id, const Portion& p,
                           std::int64_t d) {
    bool ok = (p.num == 1 && p.den == 4) || (p.num == 1 && p.den == 2);
    if (!ok) {
      out.push_back("node '" + id + "': portion must be 1/4 or 1/2");
    } else if (p.cp(d) < 1) {
      out.push_back("node '" + id + "': portion too small for " +
                    std::to_string(d) + " channels");
    }
  };

  for (const auto& n : g.nodes) {
    if (const auto* v = std::get_if<VanillaConv>(&n.kind)) {
      check_spec(n.id, v->spec);
    } else if (const auto* d = std::get_if<DepthwiseConv>(&n.kind)) {
      check_spec(n.id, d->spec);
      if (d->spec.in_ch != d->spec.out_ch)
        out.push_back("node '" + n.id +
                      "': depthwise conv requires in_ch == out_ch");
    } else if (const auto* p = std::get_if<PointwiseConv>(&n.kind)) {
      check_spec(n.id, p->spec);
      if (p->spec.kernel != 1)
        out.push_back("node '" + n.id + "': pointwise conv requires kernel 1");
      if (p->spec.stride != 1)
        out.push_back("node '" + n.id + "': pointwise conv requires stride 1");
    } else if (const auto* s = std::get_if<SeparableConv>(&n.kind)) {
      check_spec(n.id, s->depthwise);
      check_spec(n.id, s->pointwise);
      if (s->depthwise.in_ch != s->depthwise.out_ch)
        out.push_back("node '" + n.id +
                      "': separable depthwise requires in_ch == out_ch");
      if (s->pointwise.kernel != 1 || s->pointwise.stride != 1)
        out.push_back("node '" + n.id +
                      "': separable pointwise requires kernel 1, stride 1");
      if (s->pointwise.in_ch != s->depthwise.out_ch)
        out.push_back("node '" + n.id +
                      "': separable stages disagree on channels");
    } else if (const auto* p = std::get_if<PConv>(&n.kind)) {
      check_spec(n.id, p->spec);
      if (p->spec.in_ch != p->spec.out_ch)
        out.push_back("node '" + n.id + "': pconv requires in_ch == out_ch");
      if (p->spec.stride != 1)
        out.push_back("node '" + n.id + "': pconv requires stride 1");
      check_portion(n.id, p->portion, p->spec.in_ch);
    } else if (const auto* p = std::get_if<PDWConv>(&n.kind)) {
      check_spec(n.id, p->spec);
      if (p->spec.in_ch != p->spec.out_ch)
        out.push_back("node '" + n.id + "': pdwconv requires in_ch == out_ch");
      if (p->spec.stride != 1)
        out.push_back("node '" + n.id + "': pdwconv requires stride 1");
      check_portion(n.id, p->portion, p->spec.in_ch);
    } else if (const auto* d = std::get_if<Deconv>(&n.kind)) {
      check_spec(n.id, d->spec);
      if (d->spec.stride != 2)
        out.push_back("node '" + n.id + "': deconv requires stride 2");
    }
  }

  int n_in = 0, n_out = 0;
  for (const auto& n : g.nodes) {
    if (n.role == RoleTag::io && n.stage == "input") ++n_in;
    if (n.role == RoleTag::io && n.stage == "output") ++n_out;
  }
  if (n_in != 1)
    out.push_back("expected exactly one io node tagged input, found " +
                  std::to_string(n_in));
  if (n_out != 1)
    out.push_back("expected exactly one io node tagged output, found " +
                  std::to_string(n_out));

  std::map<std::string, int> indeg;
  for (const auto& n : g.nodes) indeg[n.id] = 0;
  bool edges_ok = true;
  for (const auto& [a, b] : g.edges) {
    if (!ids.count(a)) {
      out.push_back("edge references unknown node '" + a + "'");
      edges_ok = false;
    }
    if (!ids.count(b)) {
      out.push_back("edge references unknown node '" + b + "'");
      edges_ok = false;
    }
    if (indeg.count(b)) ++indeg[b];
  }

  for (const auto& n : g.nodes) {
    int d = indeg[n.id];
    bool source = (n.role == RoleTag::io && n.stage == "input");
    bool multi = std::holds_alternative<Add>(n.kind) ||
                 std::holds_alternative<ConcatSkip>(n.kind);
    if (source) {
      if (d != 0)
        out.push_back("node '" + n.id + "': input node must have no producers");
    } else if (multi) {
      if (d < 2)
        out.push_back("node '" + n.id + "': " + kind_name(n.kind) +
                      " needs at least 2 inputs, has " + std::to_string(d));
    } else if (d != 1) {
      out.push_back("node '" + n.id + "': expected exactly 1 input, has " +
                    std::to_string(d));
    }
  }

  if (edges_ok) {
    try {
      topo_order(g);
    } catch (const Error&) {
      out.push_back("graph is not acyclic");
    }
  }

  for (const auto& s : g.skips) {
    if (!stages_present.count(s.enc_stage))
      out.push_back("skip references unknown stage '" + s.enc_stage + "'");
    if (!stages_present.count(s.dec_stage))
      out.push_back("skip references unknown stage '" + s.dec_stage + "'");
    if (s.merge != "add" && s.merge != "concat")
      out.push_back("skip merge must be 'add' or 'concat', got '" + s.merge +
                    "'");
  }
  return out;
}

namespace {

nlohmann::ordered_json spec_to_json(const ConvSpec& s) {
  return {{"in_ch", s.in_ch},
          {"out_ch", s.out_ch},
          {"kernel", s.kernel},
          {"stride", s.stride},
          {"bias", s.bias}};
}

ConvSpec spec_from_json(const nlohmann::json& j, const std::string& ctx) {
  if (!j.is_object())
    throw Error(ErrorCode::parse_error, ctx + ": conv spec must be an object");
  static const std::set<std::string> kKeys = {"in_ch", "out_ch", "kernel",
                                              "stride", "bias"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!kKeys.count(it.key()))
      throw Error(ErrorCode::parse_error,
                  ctx + ": unknown key '" + it.key() + "' in conv spec");
  }
  ConvSpec s;
  try {
    s.in_ch = j.at("in_ch").get<std::int64_t>();
    s.out_ch = j.at("out_ch").get<std::int64_t>();
    s.kernel = j.value("kernel", 3);
    s.stride = j.value("stride", 1);
    s.bias = j.value("bias", true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, ctx + ": bad conv spec: " + e.what());
  }
  return s;
}

Portion portion_from_json(const nlohmann::json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() ||
      !j[1].is_number_integer())
    throw Error(ErrorCode::parse_error,
                ctx + ": portion must be a [num, den] integer pair");
  return Portion{j[0].get<int>(), j[1].get<int>()};
}

nlohmann::ordered_json kind_to_json(const LayerKind& k) {
  nlohmann::ordered_json j;
  j["type"] = kind_name(k);
  if (const auto* v = std::get_if<VanillaConv>(&k)) {
    j.update(spec_to_json(v->spec));
  } else if (const auto* v = std::get_if<DepthwiseConv>(&k)) {
    j.update(spec_to_json(v->spec));
  } else if (const auto* v = std::get_if<PointwiseConv>(&k)) {
    j.update(spec_to_json(v->spec));
  } else if (const auto* v = std::get_if<SeparableConv>(&k)) {
    j["depthwise"] = spec_to_json(v->depthwise);
    j["pointwise"] = spec_to_json(v->pointwise);
  } else if (const auto* v = std::get_if<PConv>(&k)) {
    j.update(spec_to_json(v->spec));
    j["portion"] = {v->portion.num, v->portion.den};
  } else if (const auto* v = std::get_if<PDWConv>(&k)) {
    j.update(spec_to_json(v->spec));
    j["portion"] = {v->portion.num, v->portion.den};
  } else if (const auto* v = std::get_if<Deconv>(&k)) {
    j.update(spec_to_json(v->spec));
  } else if (const auto* v = std::get_if<Interp2x>(&k)) {
    j["mode"] = v->mode == InterpMode::nearest ? "nearest" : "bilinear";
  } else if (std::get_if<Activation>(&k)) {
    j["act"] = "relu";
  }
  return j;
}

LayerKind kind_from_json(const nlohmann::json& j, const std::string& ctx) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw Error(ErrorCode::parse_error,
                ctx + ": kind must be an object with a 'type' string");
  std::string type = j["type"].get<std::string>();
  auto strip = [&](std::initializer_list<const char*> extra) {
    nlohmann::json copy = j;
    copy.erase("type");
    for (const char* k : extra) copy.erase(k);
    return copy;
  };
  auto no_extra_keys = [&](std::initializer_list<const char*> allowed) {
    std::set<std::string> ok = {"type"};
    for (const char* k : allowed) ok.insert(k);
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!ok.count(it.key()))
        throw Error(ErrorCode::parse_error,
                    ctx + ": unknown key '" + it.key() + "' for kind '" +
                        type + "'");
    }
  };
  if (type == "vanilla_conv")
    return VanillaConv{spec_from_json(strip({}), ctx)};
  if (type == "depthwise_conv")
    return DepthwiseConv{spec_from_json(strip({}), ctx)};
  if (type == "pointwise_conv")
    return PointwiseConv{spec_from_json(strip({}), ctx)};
  if (type == "separable_conv") {
    no_extra_keys({"depthwise", "pointwise"});
    if (!j.contains("depthwise") || !j.contains("pointwise"))
      throw Error(ErrorCode::parse_error,
                  ctx + ": separable_conv needs depthwise and pointwise");
    return SeparableConv{spec_from_json(j["depthwise"], ctx),
                         spec_from_json(j["pointwise"], ctx)};
  }
  if (type == "pconv") {
    if (!j.contains("portion"))
      throw Error(ErrorCode::parse_error, ctx + ": pconv needs a portion");
    return PConv{spec_from_json(strip({"portion"}), ctx),
                 portion_from_json(j["portion"], ctx)};
  }
  if (type == "pdwconv") {
    if (!j.contains("portion"))
      throw Error(ErrorCode::parse_error, ctx + ": pdwconv needs a portion");
    return PDWConv{spec_from_json(strip({"portion"}), ctx),
                   portion_from_json(j["portion"], ctx)};
  }
  if (type == "deconv") return Deconv{spec_from_json(strip({}), ctx)};
  if (type == "avgpool2x2") {
    no_extra_keys({});
    return AvgPool2x2{};
  }
  if (type == "interp2x") {
    no_extra_keys({"mode"});
    std::string mode = j.value("mode", "nearest");
    if (mode != "nearest" && mode != "bilinear")
      throw Error(ErrorCode::parse_error,
                  ctx + ": interp2x mode must be nearest or bilinear");
    return Interp2x{mode == "nearest" ? InterpMode::nearest
                                      : InterpMode::bilinear};
  }
  if (type == "activation") {
    no_extra_keys({"act"});
    std::string act = j.value("act", "relu");
    if (act != "relu")
      throw Error(ErrorCode::parse_error,
                  ctx + ": unsupported activation '" + act + "'");
    return Activation{ActKind::relu};
  }
  if (type == "add") {
    no_extra_keys({});
    return Add{};
  }
  if (type == "concat") {
    no_extra_keys({});
    return ConcatSkip{};
  }
  throw Error(ErrorCode::parse_error, ctx + ": unknown kind '" + type + "'");
}

}  // namespace

nlohmann::ordered_json graph_to_json(const NetGraph& g) {
  nlohmann::ordered_json j;
  j["format"] = "netgraph";
  j["schema_version"] = 1;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : g.nodes) {
    nlohmann::ordered_json nj;
    nj["id"] = n.id;
    nj["stage"] = n.stage;
    nj["role"] = role_to_string(n.role);
    nj["kind"] = kind_to_json(n.kind);
    j["nodes"].push_back(nj);
  }
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& [a, b] : g.edges) j["edges"].push_back({a, b});
  j["skips"] = nlohmann::ordered_json::array();
  for (const auto& s : g.skips) {
    j["skips"].push_back(
        {{"enc", s.enc_stage}, {"dec", s.dec_stage}, {"merge", s.merge}});
  }
  return j;
}

NetGraph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object())
    throw Error(ErrorCode::parse_error, "graph json must be an object");
  static const std::set<std::string> kKeys = {"format", "schema_version",
                                              "nodes", "edges", "skips"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!kKeys.count(it.key()))
      throw Error(ErrorCode::parse_error,
                  "unknown key '" + it.key() + "' in graph json");
  }
  if (j.contains("schema_version") &&
      !(j["schema_version"].is_number_integer() &&
        j["schema_version"].get<int>() == 1))
    throw Error(ErrorCode::parse_error, "unsupported schema_version");
  if (!j.contains("nodes") || !j["nodes"].is_array())
    throw Error(ErrorCode::parse_error, "graph json needs a 'nodes' array");
  NetGraph g;
  for (const auto& nj : j["nodes"]) {
    if (!nj.is_object())
      throw Error(ErrorCode::parse_error, "graph node must be an object");
    static const std::set<std::string> kNodeKeys = {"id", "stage", "role",
                                                    "kind"};
    for (auto it = nj.begin(); it != nj.end(); ++it) {
      if (!kNodeKeys.count(it.key()))
        throw Error(ErrorCode::parse_error,
                    "unknown key '" + it.key() + "' in graph node");
    }
    if (!nj.contains("id") || !nj["id"].is_string())
      throw Error(ErrorCode::parse_error, "graph node needs a string id");
    LayerNode n;
    n.id = nj["id"].get<std::string>();
    n.stage = nj.value("stage", std::string("updown"));
    n.role = role_from_string(nj.value("role", std::string("body")));
    if (!nj.contains("kind"))
      throw Error(ErrorCode::parse_error,
                  "node '" + n.id + "' needs a 'kind'");
    n.kind = kind_from_json(nj["kind"], "node '" + n.id + "'");
    g.nodes.push_back(std::move(n));
  }
  if (j.contains("edges")) {
    if (!j["edges"].is_array())
      throw Error(ErrorCode::parse_error, "'edges' must be an array");
    for (const auto& ej : j["edges"]) {
      if (!ej.is_array() || ej.size() != 2 || !ej[0].is_string() ||
          !ej[1].is_string())
        throw Error(ErrorCode::parse_error,
                    "each edge must be a [from, to] string pair");
      g.edges.emplace_back(ej[0].get<std::string>(), ej[1].get<std::string>());
    }
  }
  if (j.contains("skips")) {
    if (!j["skips"].is_array())
      throw Error(ErrorCode::parse_error, "'skips' must be an array");
    for (const auto& sj : j["skips"]) {
      if (!sj.is_object())
        throw Error(ErrorCode::parse_error, "each skip must be an object");
      static const std::set<std::string> kSkipKeys = {"enc", "dec", "merge"};
      for (auto it = sj.begin(); it != sj.end(); ++it) {
        if (!kSkipKeys.count(it.key()))
          throw Error(ErrorCode::parse_error,
                      "unknown key '" + it.key() + "' in skip");
      }
      SkipSpec s;
      try {
        s.enc_stage = sj.at("enc").get<std::string>();
        s.dec_stage = sj.at("dec").get<std::string>();
        s.merge = sj.value("merge", std::string("add"));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string("bad skip: ") +
                                                e.what());
      }
      g.skips.push_back(std::move(s));
    }
  }
  return g;
}

}  // namespace mofa
