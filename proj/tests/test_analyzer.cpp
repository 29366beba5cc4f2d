#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <map>

#include "doctest.h"
#include "mofa/analyzer.h"
#include "mofa/builders.h"

using namespace mofa;

TEST_CASE("layer_params formulas") {
  CHECK(layer_params(VanillaConv{{3, 16, 3, 1, true}}) == 448);
  CHECK(layer_params(VanillaConv{{3, 16, 3, 1, false}}) == 432);
  CHECK(layer_params(DepthwiseConv{{16, 16, 3, 1, true}}) == 160);
  CHECK(layer_params(PointwiseConv{{16, 32, 1, 1, true}}) == 544);
  CHECK(layer_params(SeparableConv{{16, 16, 3, 1, true},
                                   {16, 32, 1, 1, true}}) == 704);
  CHECK(layer_params(PConv{{64, 64, 3, 1, true}, {1, 4}}) == 2320);
  CHECK(layer_params(PDWConv{{64, 64, 3, 1, true}, {1, 4}}) == 160);
  CHECK(layer_params(Deconv{{8, 4, 3, 2, true}}) == 292);
  CHECK(layer_params(AvgPool2x2{}) == 0);
  CHECK(layer_params(Interp2x{}) == 0);
  CHECK(layer_params(Activation{}) == 0);
  CHECK(layer_params(Add{}) == 0);
  CHECK(layer_params(ConcatSkip{}) == 0);
}

TEST_CASE("layer_macs formulas") {
  CHECK(layer_macs(VanillaConv{{3, 16, 3, 1, true}}, {1, 3, 256, 256}) ==
        28311552);
  CHECK(layer_macs(VanillaConv{{1, 1, 1, 1, true}}, {1, 1, 1, 1}) == 1);
  CHECK(layer_macs(PConv{{64, 64, 3, 1, true}, {1, 4}}, {1, 64, 8, 8}) ==
        147456);
  CHECK(layer_macs(PDWConv{{64, 64, 3, 1, true}, {1, 4}}, {1, 64, 8, 8}) ==
        9216);
  CHECK(layer_macs(DepthwiseConv{{16, 16, 3, 1, true}}, {1, 16, 10, 10}) ==
        14400);
  CHECK(layer_macs(PointwiseConv{{16, 32, 1, 1, true}}, {1, 16, 10, 10}) ==
        51200);
  // separable: depthwise at its output resolution, then pointwise there too
  CHECK(layer_macs(SeparableConv{{16, 16, 3, 2, true}, {16, 32, 1, 1, true}},
                   {1, 16, 8, 8}) == 2304 + 8192);
  // deconv is charged at its *input* resolution
  CHECK(layer_macs(Deconv{{8, 4, 3, 2, true}}, {1, 8, 6, 6}) == 10368);
  CHECK(layer_macs(AvgPool2x2{}, {1, 8, 6, 6}) == 0);
  CHECK(layer_macs(Interp2x{}, {1, 8, 6, 6}) == 0);
  CHECK(layer_macs(Activation{}, {1, 8, 6, 6}) == 0);
  // batch scales linearly
  CHECK(layer_macs(VanillaConv{{3, 16, 3, 1, true}}, {2, 3, 256, 256}) ==
        2 * 28311552ULL);
  // stride-2 output extents use ceiling division
  CHECK(layer_macs(VanillaConv{{4, 4, 3, 2, true}}, {1, 4, 7, 7}) ==
        4ULL * 4 * 4 * 4 * 9);
}

TEST_CASE("pconv cost ratio is p^2 on divisible widths") {
  Dims4 in{1, 64, 16, 16};
  auto vanilla = layer_macs(VanillaConv{{64, 64, 3, 1, true}}, in);
  auto quarter = layer_macs(PConv{{64, 64, 3, 1, true}, {1, 4}}, in);
  auto half = layer_macs(PConv{{64, 64, 3, 1, true}, {1, 2}}, in);
  CHECK(quarter * 16 == vanilla);
  CHECK(half * 4 == vanilla);
}

TEST_CASE("analyze totals are sums and shares sum to one") {
  NetGraph g = build_pmrid_like();
  CostReport r = analyze(g, {1, 3, 256, 256});
  std::uint64_t p = 0, m = 0;
  double share = 0.0;
  for (const auto& row : r.per_layer) {
    p += row.params;
    m += row.macs;
    share += row.mac_share;
  }
  CHECK(p == r.total_params);
  CHECK(m == r.total_macs);
  CHECK(share == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.per_layer.size() == g.nodes.size());
  // report order is the graph's topological node order
  CHECK(r.per_layer.front().id == "in_conv");
  CHECK(r.per_layer.back().id == "out_conv");
}

TEST_CASE("param additivity under a single-node rewrite") {
  NetGraph g;
  g.nodes = {{"in", VanillaConv{{3, 8, 3, 1, true}}, "input", RoleTag::io},
             {"body", VanillaConv{{8, 8, 3, 1, true}}, "enc1", RoleTag::body},
             {"out", VanillaConv{{8, 3, 3, 1, true}}, "output", RoleTag::io}};
  g.edges = {{"in", "body"}, {"body", "out"}};
  CostReport before = analyze(g, {1, 3, 16, 16});
  auto old_params = layer_params(g.nodes[1].kind);
  g.nodes[1].kind = PConv{{8, 8, 3, 1, true}, {1, 4}};  // shape-preserving
  auto new_params = layer_params(g.nodes[1].kind);
  CostReport after = analyze(g, {1, 3, 16, 16});
  CHECK(before.total_params - after.total_params ==
        old_params - new_params);
}

TEST_CASE("all-vanilla estimate recosts convs at their output resolution") {
  NetGraph g = build_pmrid_like();
  CostReport est = analyze(g, {1, 3, 256, 256},
                           Convention::all_vanilla_estimate);
  CHECK(est.convention == Convention::all_vanilla_estimate);
  CHECK(est.total_macs == 12722503680ULL);  // frozen default
  // params are never restated
  CHECK(est.total_params == analyze(g, {1, 3, 256, 256}).total_params);

  std::map<std::string, std::uint64_t> stage;
  for (const auto& row : est.per_layer) stage[row.stage] += row.macs;
  CHECK(stage.at("input") == 117964800ULL);
  CHECK(stage.at("output") == 117964800ULL);
  CHECK(stage.at("enc1") == 943718400ULL);
  CHECK(stage.at("enc2") == 943718400ULL);
  CHECK(stage.at("enc3") == 3355443200ULL);
  CHECK(stage.at("enc4") == 2202009600ULL);
  CHECK(stage.at("middle") == 81920000ULL);
  CHECK(stage.at("dec1") == 838860800ULL);
  CHECK(stage.at("dec2") == 471859200ULL);
  CHECK(stage.at("dec3") == 471859200ULL);
  CHECK(stage.at("dec4") == 471859200ULL);
  CHECK(stage.at("updown") == 2705326080ULL);

  // a single separable downsample: vanilla formula at halved resolution
  for (const auto& row : est.per_layer) {
    if (row.id == "down1")
      CHECK(row.macs == 128ULL * 128 * 24 * 48 * 25);
  }
}

TEST_CASE("encoders dominate the estimated distribution") {
  CostReport est = analyze(build_pmrid_like(), {1, 3, 256, 256},
                           Convention::all_vanilla_estimate);
  double enc = 0.0, decmid = 0.0;
  for (const auto& row : est.per_layer) {
    if (row.stage.rfind("enc", 0) == 0) enc += row.mac_share;
    if (row.stage.rfind("dec", 0) == 0 || row.stage == "middle")
      decmid += row.mac_share;
  }
  CHECK(enc > decmid);
}

TEST_CASE("cheap_layers picks middle and decoders by default") {
  CostReport est = analyze(build_pmrid_like(), {1, 3, 256, 256},
                           Convention::all_vanilla_estimate);
  std::set<std::string> cheap = cheap_layers(est);
  CHECK(cheap == std::set<std::string>{"middle", "dec1", "dec2", "dec3",
                                       "dec4"});
  CHECK(cheap_layers(est, 0.0).empty());
  CHECK(cheap_layers(est, 1.0) ==
        std::set<std::string>{"enc1", "enc2", "enc3", "enc4", "middle", "dec1",
                              "dec2", "dec3", "dec4"});
}

TEST_CASE("report serialization carries the convention") {
  CostReport r = analyze(build_pmrid_like(), {1, 3, 64, 64});
  nlohmann::json j = report_to_json(r);
  CHECK(j["convention"] == "actual");
  CHECK(j["convention_note"] == "MACs, bias excluded");
  CHECK(j["generator_version"] == kGeneratorVersion);
  CHECK(j["totals"]["params"] == r.total_params);
  CHECK(j["totals"]["macs"] == r.total_macs);
  CHECK(j["per_layer"].size() == r.per_layer.size());
  CHECK(j["per_layer"][0]["id"] == "in_conv");

  std::string csv = report_to_csv(r);
  CHECK(csv.rfind("# convention: actual; MACs, bias excluded\r\n", 0) == 0);
  CHECK(csv.find("id,stage,kind,params,macs,mac_share\r\n") !=
        std::string::npos);
  CHECK(csv.find("total,,," + std::to_string(r.total_params)) !=
        std::string::npos);
  // RFC-4180 line endings throughout
  std::size_t lf = 0, crlf = 0;
  for (std::size_t i = 0; i + 1 <= csv.size(); ++i) {
    if (csv[i] == '\n') {
      ++lf;
      if (i > 0 && csv[i - 1] == '\r') ++crlf;
    }
  }
  CHECK(lf == crlf);
}
