#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>
#include <variant>

#include "doctest.h"
#include "mofa/analyzer.h"
#include "mofa/builders.h"
#include "mofa/passes.h"

using namespace mofa;

namespace {

const Dims4 kIn{1, 3, 256, 256};

std::pair<std::uint64_t, std::uint64_t> totals(const NetGraph& g) {
  CostReport r = analyze(g, kIn);
  return {r.total_params, r.total_macs};
}

std::set<std::string> default_cheap(const NetGraph& g) {
  return cheap_layers(analyze(g, kIn, Convention::all_vanilla_estimate));
}

NetGraph p123(const NetGraph& g) {
  NetGraph out = p1_to_pconv(g);
  out = p2_widen_middle(out, {"enc3", "dec2"});
  return p3_widen_cheap(out, default_cheap(g));
}

}  // namespace

TEST_CASE("p1 converts body convs and splits channel changers") {
  NetGraph g = build_pmrid_like();
  int rewritten = 0;
  NetGraph g1 = p1_to_pconv(g, &rewritten);
  CHECK(rewritten == 31);
  CHECK(validate(g1).empty());

  auto [params, macs] = totals(g1);
  CHECK(params == 2716613);
  CHECK(macs == 2148140032ULL);

  // every body conv is now a pconv at the default portion
  int pconvs = 0;
  for (const auto& n : g1.nodes) {
    if (const auto* p = std::get_if<PConv>(&n.kind)) {
      ++pconvs;
      CHECK(n.role == RoleTag::body);
      CHECK(p->portion == Portion{1, 4});
      CHECK(p->spec.in_ch == p->spec.out_ch);
    }
    if (n.role == RoleTag::io) {
      CHECK(std::holds_alternative<VanillaConv>(n.kind));
    }
    if (n.role == RoleTag::downsample) {
      CHECK(std::holds_alternative<SeparableConv>(n.kind));
    }
    if (n.role == RoleTag::upsample) {
      CHECK(std::holds_alternative<Deconv>(n.kind));
    }
  }
  CHECK(pconvs == 31);

  // a channel-changing separable keeps its pointwise half
  const LayerNode* pw = g1.find("enc4_trans_pw");
  REQUIRE(pw != nullptr);
  const auto* pk = std::get_if<PointwiseConv>(&pw->kind);
  REQUIRE(pk != nullptr);
  CHECK(pk->spec.in_ch == 512);
  CHECK(pk->spec.out_ch == 160);
  CHECK(g1.inputs_of("enc4_trans_pw") ==
        std::vector<std::string>{"enc4_trans"});

  // idempotent
  int again = -1;
  NetGraph g2 = p1_to_pconv(g1, &again);
  CHECK(again == 0);
  CHECK(graph_equal(g1, g2));
}

TEST_CASE("p1 without a pointwise tail when channels are preserved") {
  NetGraph g;
  g.nodes = {{"in", VanillaConv{{3, 8, 3, 1, true}}, "input", RoleTag::io},
             {"body", SeparableConv{{8, 8, 3, 1, true}, {8, 8, 1, 1, true}},
              "enc1", RoleTag::body},
             {"out", VanillaConv{{8, 3, 3, 1, true}}, "output", RoleTag::io}};
  g.edges = {{"in", "body"}, {"body", "out"}};
  NetGraph g1 = p1_to_pconv(g);
  CHECK(g1.nodes.size() == 3);
  CHECK(g1.find("body_pw") == nullptr);
  CHECK(std::holds_alternative<PConv>(g1.find("body")->kind));
}

TEST_CASE("p1 leaves a graph with no body convs alone") {
  NetGraph g;
  g.nodes = {{"in", VanillaConv{{3, 8, 3, 1, true}}, "input", RoleTag::io},
             {"act", Activation{}, "enc1", RoleTag::body},
             {"out", VanillaConv{{8, 3, 3, 1, true}}, "output", RoleTag::io}};
  g.edges = {{"in", "act"}, {"act", "out"}};
  int rewritten = -1;
  NetGraph g1 = p1_to_pconv(g, &rewritten);
  CHECK(rewritten == 0);
  CHECK(graph_equal(g, g1));
}

TEST_CASE("p2 widens the chosen pair only") {
  NetGraph g1 = p1_to_pconv(build_pmrid_like());
  int rewritten = 0;
  NetGraph g2 = p2_widen_middle(g1, {"enc3", "dec2"}, {1, 2}, &rewritten);
  CHECK(rewritten == 10);  // 8 pconvs in enc3, 2 in dec2
  auto [params, macs] = totals(g2);
  CHECK(params == 4068463);
  CHECK(macs == 3673080832ULL);

  for (const auto& n : g2.nodes) {
    if (const auto* p = std::get_if<PConv>(&n.kind)) {
      Portion want =
          (n.stage == "enc3" || n.stage == "dec2") ? Portion{1, 2}
                                                   : Portion{1, 4};
      CHECK(p->portion == want);
    }
  }

  int again = -1;
  NetGraph g3 = p2_widen_middle(g2, {"enc3", "dec2"}, {1, 2}, &again);
  CHECK(again == 0);
  CHECK(graph_equal(g2, g3));
}

TEST_CASE("p2 alternate pairs match the published ordering") {
  NetGraph g1 = p1_to_pconv(build_pmrid_like());
  auto p_a = totals(p2_widen_middle(g1, {"enc3", "dec2"})).first;
  auto p_b = totals(p2_widen_middle(g1, {"enc2", "dec3"})).first;
  auto p_c = totals(p2_widen_middle(g1, {"enc1", "dec4"})).first;
  CHECK(p_a == 4068463);
  CHECK(p_b == 2819963);
  CHECK(p_c == 2742501);
  CHECK(p_a > p_b);
  CHECK(p_b > p_c);
}

TEST_CASE("p2 on a missing stage is a stage error") {
  NetGraph g1 = p1_to_pconv(build_pmrid_like());
  try {
    p2_widen_middle(g1, {"enc3", "dec9"});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::stage_error);
    CHECK(std::string(e.what()).find("dec9") != std::string::npos);
    CHECK(std::string(e.what()).find("not found") != std::string::npos);
  }
}

TEST_CASE("p3 widens the cheap stages") {
  NetGraph g = build_pmrid_like();
  std::set<std::string> cheap = default_cheap(g);
  CHECK(cheap ==
        std::set<std::string>{"middle", "dec1", "dec2", "dec3", "dec4"});

  NetGraph g2 = p2_widen_middle(p1_to_pconv(g), {"enc3", "dec2"});
  int rewritten = 0;
  NetGraph g3 = p3_widen_cheap(g2, cheap, {1, 2}, &rewritten);
  CHECK(rewritten == 8);  // dec2 was already wide
  auto [params, macs] = totals(g3);
  CHECK(params == 4536891);
  CHECK(macs == 4418015232ULL);

  int none = -1;
  NetGraph same = p3_widen_cheap(g3, {}, {1, 2}, &none);
  CHECK(none == 0);
  CHECK(graph_equal(g3, same));

  // cheap = every body stage pushes every pconv to the wide portion
  NetGraph all = p3_widen_cheap(g2, {"enc1", "enc2", "enc3", "enc4", "middle",
                                     "dec1", "dec2", "dec3", "dec4"});
  for (const auto& n : all.nodes) {
    if (const auto* p = std::get_if<PConv>(&n.kind))
      CHECK(p->portion == Portion{1, 2});
  }
}

TEST_CASE("p4 decouples upsampling and preserves cost exactly") {
  NetGraph g3 = p123(build_pmrid_like());
  auto [params_before, macs_before] = totals(g3);

  int rewritten = 0;
  NetGraph g4 = p4_decouple_updown(g3, "upsample_only", &rewritten);
  CHECK(rewritten == 4);
  CHECK(validate(g4).empty());
  auto [params_after, macs_after] = totals(g4);
  CHECK(params_after == params_before);
  CHECK(macs_after == macs_before);

  for (int j = 1; j <= 4; ++j) {
    std::string base = "up" + std::to_string(j);
    CHECK(g4.find(base) == nullptr);
    const LayerNode* conv = g4.find(base + "_conv");
    const LayerNode* interp = g4.find(base + "_interp");
    REQUIRE(conv != nullptr);
    REQUIRE(interp != nullptr);
    const auto* vk = std::get_if<VanillaConv>(&conv->kind);
    REQUIRE(vk != nullptr);
    CHECK(vk->spec.stride == 1);
    CHECK(g4.inputs_of(base + "_interp") ==
          std::vector<std::string>{base + "_conv"});
  }
  // downsample path untouched in this scope
  CHECK(g4.find("down1") != nullptr);

  int again = -1;
  NetGraph g5 = p4_decouple_updown(g4, "upsample_only", &again);
  CHECK(again == 0);
  CHECK(graph_equal(g4, g5));
}

TEST_CASE("p4 scope both also splits downsampling") {
  NetGraph g = build_pmrid_like();
  int rewritten = 0;
  NetGraph g4 = p4_decouple_updown(g, "both", &rewritten);
  CHECK(rewritten == 8);
  CHECK(validate(g4).empty());
  for (int i = 1; i <= 4; ++i) {
    std::string base = "down" + std::to_string(i);
    CHECK(g4.find(base) == nullptr);
    const LayerNode* pool = g4.find(base + "_pool");
    const LayerNode* conv = g4.find(base + "_conv");
    REQUIRE(pool != nullptr);
    REQUIRE(conv != nullptr);
    CHECK(std::holds_alternative<AvgPool2x2>(pool->kind));
    CHECK(g4.inputs_of(base + "_conv") ==
          std::vector<std::string>{base + "_pool"});
  }
  ShapeMap shapes = infer_shapes(g4, kIn);
  CHECK(shapes.at("out_conv") == Dims4{1, 3, 256, 256});

  CHECK(graph_equal(p4_decouple_updown(g, "none"), g));
  CHECK_THROWS_AS(p4_decouple_updown(g, "sideways"), Error);
}

TEST_CASE("p5 threshold rule with the documented tie-break") {
  NetGraph g;
  g.nodes = {{"in", VanillaConv{{3, 256, 3, 1, true}}, "input", RoleTag::io},
             {"big", PConv{{256, 256, 3, 1, true}, {1, 4}}, "enc1",
              RoleTag::body},
             {"mid", VanillaConv{{256, 64, 3, 1, true}}, "enc1",
              RoleTag::body},
             {"small", PConv{{64, 64, 3, 1, true}, {1, 4}}, "enc2",
              RoleTag::body},
             {"out", VanillaConv{{64, 3, 3, 1, true}}, "output", RoleTag::io}};
  g.edges = {{"in", "big"}, {"big", "mid"}, {"mid", "small"},
             {"small", "out"}};
  int rewritten = 0;
  NetGraph g5 = p5_pconv_to_pdw(g, 32, false, &rewritten);
  CHECK(rewritten == 1);
  CHECK(std::holds_alternative<PDWConv>(g5.find("big")->kind));   // 64 >= 32
  CHECK(std::holds_alternative<PConv>(g5.find("small")->kind));   // 16 < 32

  // exactly at the threshold: converted by default, kept in strict mode
  NetGraph h;
  h.nodes = {{"in", VanillaConv{{3, 128, 3, 1, true}}, "input", RoleTag::io},
             {"edge", PConv{{128, 128, 3, 1, true}, {1, 4}}, "enc1",
              RoleTag::body},
             {"out", VanillaConv{{128, 3, 3, 1, true}}, "output",
              RoleTag::io}};
  h.edges = {{"in", "edge"}, {"edge", "out"}};
  CHECK(std::holds_alternative<PDWConv>(
      p5_pconv_to_pdw(h, 32).find("edge")->kind));
  CHECK(std::holds_alternative<PConv>(
      p5_pconv_to_pdw(h, 32, true).find("edge")->kind));
}

TEST_CASE("p5 sweep on the prepared graph") {
  NetGraph g3 = p123(build_pmrid_like());
  NetGraph g4 = p4_decouple_updown(g3);

  struct Point {
    std::int64_t t;
    int rewritten;
    std::uint64_t params;
  };
  const Point sweep[] = {{0, 31, 830891},
                         {16, 21, 846791},
                         {32, 17, 897691},
                         {64, 9, 1127691},
                         {128, 8, 1285691}};
  std::uint64_t prev = 0;
  for (const auto& pt : sweep) {
    int rewritten = 0;
    NetGraph g5 = p5_pconv_to_pdw(g4, pt.t, false, &rewritten);
    CHECK(rewritten == pt.rewritten);
    auto [params, macs] = totals(g5);
    (void)macs;
    CHECK(params == pt.params);
    CHECK(params >= prev);
    prev = params;
    CHECK(validate(g5).empty());

    int again = -1;
    NetGraph g6 = p5_pconv_to_pdw(g5, pt.t, false, &again);
    CHECK(again == 0);
    CHECK(graph_equal(g5, g6));
  }

  // strict mode keeps borderline layers as pconv, so params stay higher
  int strict_rewritten = 0;
  NetGraph strict = p5_pconv_to_pdw(g4, 32, true, &strict_rewritten);
  CHECK(strict_rewritten == 10);
  CHECK(totals(strict).first > 897691);
}

TEST_CASE("run_roadmap default plan reproduces the frozen trajectory") {
  auto [final_g, trace] = run_roadmap(build_pmrid_like(), PassPlan{});
  CHECK(validate(final_g).empty());
  CHECK(trace.input == kIn);
  REQUIRE(trace.rows.size() == 5);

  const char* names[] = {"P1_pconv", "P2_middle", "P3_cheap", "P4_updown",
                         "P5_pdw"};
  const std::uint64_t params[] = {2716613, 4068463, 4536891, 4536891, 897691};
  const std::uint64_t macs[] = {2148140032ULL, 3673080832ULL, 4418015232ULL,
                                4418015232ULL, 1613996032ULL};
  std::uint64_t prev_params = 898985, prev_macs = 1029343232ULL;
  for (int i = 0; i < 5; ++i) {
    CHECK(trace.rows[i].name == names[i]);
    CHECK(trace.rows[i].params_before == prev_params);
    CHECK(trace.rows[i].macs_before == prev_macs);
    CHECK(trace.rows[i].params_after == params[i]);
    CHECK(trace.rows[i].macs_after == macs[i]);
    prev_params = params[i];
    prev_macs = macs[i];
  }

  // add parameters first, then accelerate
  CHECK(trace.rows[0].params_after > trace.rows[0].params_before);
  CHECK(trace.rows[1].params_after > trace.rows[1].params_before);
  CHECK(trace.rows[2].params_after > trace.rows[2].params_before);
  CHECK(trace.rows[4].params_after < trace.rows[4].params_before);
  CHECK(trace.rows[4].params_after < 898985);  // below the baseline

  auto [p_final, m_final] = totals(final_g);
  CHECK(p_final == 897691);
  CHECK(m_final == 1613996032ULL);
}

TEST_CASE("run_roadmap single-pass plan") {
  PassPlan plan;
  plan.enabled = {"P1_pconv"};
  auto [g1, trace] = run_roadmap(build_pmrid_like(), plan);
  REQUIRE(trace.rows.size() == 1);
  CHECK(trace.rows[0].layers_rewritten == 31);
  CHECK(trace.rows[0].params_after == 2716613);
  CHECK(graph_equal(g1, p1_to_pconv(build_pmrid_like())));
}

TEST_CASE("run_roadmap rejects bad plans") {
  PassPlan plan;
  plan.enabled = {"P1_pconv", "P9_warp"};
  CHECK_THROWS_AS(run_roadmap(build_pmrid_like(), plan), Error);

  plan.enabled = {"P5_pdw"};  // pdw needs pconvs to exist
  try {
    run_roadmap(build_pmrid_like(), plan);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_error);
    CHECK(std::string(e.what()).find("P1_pconv") != std::string::npos);
  }

  // direct p5 on a pconv-free graph is a quiet no-op, though
  int rewritten = -1;
  NetGraph same = p5_pconv_to_pdw(build_pmrid_like(), 32, false, &rewritten);
  CHECK(rewritten == 0);
  CHECK(graph_equal(same, build_pmrid_like()));
}

TEST_CASE("plan json round-trips and rejects junk") {
  PassPlan plan;
  plan.enabled = {"P1_pconv", "P5_pdw"};
  plan.middle_pair = {"enc2", "dec3"};
  plan.widen_portion = {1, 4};
  plan.pdw_threshold = 64;
  plan.pdw_strict = true;
  plan.updown_scope = "both";
  CHECK(plan_from_json(plan_to_json(plan)) == plan);
  CHECK(plan_from_json(nlohmann::json::object()) == PassPlan{});

  nlohmann::json j = plan_to_json(PassPlan{});
  j["enabled"] = {"P1_pconv", "P1_pconv"};
  CHECK_THROWS_AS(plan_from_json(j), Error);

  j = plan_to_json(PassPlan{});
  j["widen_portion"] = {1, 3};
  CHECK_THROWS_AS(plan_from_json(j), Error);

  j = plan_to_json(PassPlan{});
  j["pdw_threshold"] = -4;
  CHECK_THROWS_AS(plan_from_json(j), Error);

  j = plan_to_json(PassPlan{});
  j["updown_scope"] = "inward";
  CHECK_THROWS_AS(plan_from_json(j), Error);

  j = plan_to_json(PassPlan{});
  j["surprise"] = 0;
  CHECK_THROWS_AS(plan_from_json(j), Error);
}

TEST_CASE("trace serialization round-trips") {
  auto [final_g, trace] = run_roadmap(build_pmrid_like(), PassPlan{});
  (void)final_g;
  PassTrace back = trace_from_json(trace_to_json(trace));
  CHECK(back.input == trace.input);
  REQUIRE(back.rows.size() == trace.rows.size());
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    CHECK(back.rows[i].name == trace.rows[i].name);
    CHECK(back.rows[i].layers_rewritten == trace.rows[i].layers_rewritten);
    CHECK(back.rows[i].params_after == trace.rows[i].params_after);
    CHECK(back.rows[i].macs_after == trace.rows[i].macs_after);
  }

  std::string csv = trace_to_csv(trace);
  CHECK(csv.rfind("# convention:", 0) == 0);
  CHECK(csv.find("\r\n") != std::string::npos);
  CHECK(csv.find("P5_pdw,17,4536891,897691") != std::string::npos);
}

TEST_CASE("passes preserve the end-to-end shape") {
  NetGraph g = build_pmrid_like();
  auto out_shape = [](const NetGraph& x) {
    return infer_shapes(x, kIn).at("out_conv");
  };
  const Dims4 want = out_shape(g);
  NetGraph cur = p1_to_pconv(g);
  CHECK(out_shape(cur) == want);
  cur = p2_widen_middle(cur, {"enc3", "dec2"});
  CHECK(out_shape(cur) == want);
  cur = p3_widen_cheap(cur, default_cheap(g));
  CHECK(out_shape(cur) == want);
  cur = p4_decouple_updown(cur, "both");
  CHECK(out_shape(cur) == want);
  cur = p5_pconv_to_pdw(cur, 32);
  CHECK(out_shape(cur) == want);

  // io nodes are bit-identical across the whole pipeline
  for (const auto& n : g.nodes) {
    if (n.role != RoleTag::io) continue;
    const LayerNode* after = cur.find(n.id);
    REQUIRE(after != nullptr);
    CHECK(node_equal(n, *after));
  }
}
