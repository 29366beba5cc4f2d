#include "mofa/builders.h"

#include <set>

namespace mofa {

namespace {

void check_cfg(const ModelConfig& c) {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::config_error, msg);
  };
  if (c.input_ch < 1) fail("input_ch must be positive");
  if (c.stem_ch < 1) fail("stem_ch must be positive");
  if (c.enc_stages.size() != 4)
    fail("expected 4 encoder stages, got " +
         std::to_string(c.enc_stages.size()));
  if (c.dec_stages.size() != 4)
    fail("expected 4 decoder stages, got " +
         std::to_string(c.dec_stages.size()));
  for (const auto& s : c.enc_stages) {
    if (s.channels < 1 || s.blocks < 1)
      fail("encoder stages need positive channels and blocks");
  }
  for (const auto& s : c.dec_stages) {
    if (s.channels < 1 || s.blocks < 1)
      fail("decoder stages need positive channels and blocks");
  }
  if (c.middle_channels < 1) fail("middle_channels must be positive");
  if (c.middle_blocks < 1) fail("middle_blocks must be positive");
  if (c.downsample != "stride2-separable" && c.downsample != "avgpool+conv")
    fail("unknown downsample '" + c.downsample + "'");
  if (c.upsample != "deconv" && c.upsample != "conv-then-interp" &&
      c.upsample != "interp-then-conv")
    fail("unknown upsample '" + c.upsample + "'");
  if (c.skip_merge != "add" && c.skip_merge != "concat")
    fail("unknown skip_merge '" + c.skip_merge + "'");
  if (c.skip_merge == "add") {
    // additive skips need the decoder to mirror the tapped encoder widths
    const std::int64_t want[4] = {c.enc_stages[2].channels,
                                  c.enc_stages[1].channels,
                                  c.enc_stages[0].channels, c.stem_ch};
    for (int j = 0; j < 4; ++j) {
      if (c.dec_stages[j].channels != want[j])
        fail("skip_merge 'add' requires dec" + std::to_string(j + 1) +
             " channels == " + std::to_string(want[j]) + ", got " +
             std::to_string(c.dec_stages[j].channels));
    }
  }
}

ConvSpec conv(std::int64_t in, std::int64_t out, int k, int stride = 1) {
  return ConvSpec{in, out, k, stride, true};
}

SeparableConv sep(std::int64_t in, std::int64_t out, int k, int stride = 1) {
  return SeparableConv{conv(in, in, k, stride), conv(in, out, 1, 1)};
}

struct Builder {
  NetGraph g;
  std::string tail;  // last node on the main path

  void node(const std::string& id, LayerKind kind, const std::string& stage,
            RoleTag role, bool chain = true) {
    g.nodes.push_back({id, std::move(kind), stage, role});
    if (chain) {
      if (!tail.empty()) g.edges.emplace_back(tail, id);
      tail = id;
    }
  }

  // residual bottleneck: sep(c -> c/den), relu, sep(c/den -> c), add
  void block(const std::string& stage, int index, std::int64_t c) {
    const std::int64_t mid = std::max<std::int64_t>(1, c / kBottleneckDen);
    const std::string base = stage + "_b" + std::to_string(index) + "_";
    const std::string block_in = tail;
    node(base + "sep1", sep(c, mid, kBodyKernel), stage, RoleTag::body);
    node(base + "act", Activation{}, stage, RoleTag::body);
    node(base + "sep2", sep(mid, c, kBodyKernel), stage, RoleTag::body);
    node(base + "add", Add{}, stage, RoleTag::body);
    g.edges.emplace_back(block_in, base + "add");
  }
};

}  // namespace

NetGraph build_pmrid_like(const ModelConfig& c) {
  check_cfg(c);
  Builder b;

  b.node("in_conv", VanillaConv{conv(c.input_ch, c.stem_ch, kIoKernel)},
         "input", RoleTag::io);

  // skip sources: each encoder stage's input, i.e. the tensor feeding down_i
  std::vector<std::string> skip_src;
  std::int64_t prev = c.stem_ch;
  for (int i = 0; i < 4; ++i) {
    const std::string stage = "enc" + std::to_string(i + 1);
    const std::string dn = "down" + std::to_string(i + 1);
    skip_src.push_back(b.tail);
    if (c.downsample == "stride2-separable") {
      b.node(dn, sep(prev, c.enc_stages[i].channels, kBodyKernel, 2), "updown",
             RoleTag::downsample);
    } else {
      b.node(dn + "_pool", AvgPool2x2{}, "updown", RoleTag::downsample);
      b.node(dn + "_conv", sep(prev, c.enc_stages[i].channels, kBodyKernel, 1),
             "updown", RoleTag::downsample);
    }
    for (int j = 0; j < c.enc_stages[i].blocks; ++j) {
      b.block(stage, j + 1, c.enc_stages[i].channels);
    }
    prev = c.enc_stages[i].channels;
  }

  if (c.middle_channels != c.enc_stages[3].channels) {
    b.node("enc4_trans", sep(prev, c.middle_channels, kBodyKernel), "enc4",
           RoleTag::body);
    prev = c.middle_channels;
  }
  for (int j = 0; j < c.middle_blocks; ++j) {
    b.block("middle", j + 1, c.middle_channels);
  }

  for (int j = 0; j < 4; ++j) {
    const std::string stage = "dec" + std::to_string(j + 1);
    const std::string up = "up" + std::to_string(j + 1);
    const std::int64_t m = c.dec_stages[j].channels;
    if (c.upsample == "deconv") {
      b.node(up, Deconv{conv(prev, m, kUpKernel, 2)}, "updown",
             RoleTag::upsample);
    } else if (c.upsample == "conv-then-interp") {
      b.node(up + "_conv", VanillaConv{conv(prev, m, kUpKernel)}, "updown",
             RoleTag::upsample);
      b.node(up + "_interp", Interp2x{}, "updown", RoleTag::upsample);
    } else {
      b.node(up + "_interp", Interp2x{}, "updown", RoleTag::upsample);
      b.node(up + "_conv", VanillaConv{conv(prev, m, kUpKernel)}, "updown",
             RoleTag::upsample);
    }
    const std::string& src = skip_src[3 - j];  // dec1 pairs with enc4's input
    if (c.skip_merge == "add") {
      b.node(stage + "_merge", Add{}, stage, RoleTag::body);
      b.g.edges.emplace_back(src, stage + "_merge");
    } else {
      b.node(stage + "_merge", ConcatSkip{}, stage, RoleTag::body);
      b.g.edges.emplace_back(src, stage + "_merge");
      // fold the concatenated channels back to the stage width
      const std::int64_t src_ch = j == 3 ? c.stem_ch
                                         : c.enc_stages[2 - j].channels;
      b.node(stage + "_fuse", PointwiseConv{conv(m + src_ch, m, 1)}, stage,
             RoleTag::body);
    }
    for (int k = 0; k < c.dec_stages[j].blocks; ++k) {
      b.block(stage, k + 1, m);
    }
    prev = m;
  }

  b.node("out_conv", VanillaConv{conv(prev, c.input_ch, kIoKernel)}, "output",
         RoleTag::io);

  b.g.skips = {{"enc1", "dec4", c.skip_merge},
               {"enc2", "dec3", c.skip_merge},
               {"enc3", "dec2", c.skip_merge},
               {"enc4", "dec1", c.skip_merge}};
  return b.g;
}

namespace {

StageCfg stage_from_json(const nlohmann::json& j, std::int64_t def_channels,
                         int def_blocks, const std::string& ctx) {
  if (!j.is_object())
    throw Error(ErrorCode::config_error, ctx + " entries must be objects");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "channels" && it.key() != "blocks")
      throw Error(ErrorCode::config_error,
                  "unknown field '" + it.key() + "' in " + ctx);
  }
  StageCfg s{def_channels, def_blocks};
  try {
    if (j.contains("channels")) s.channels = j["channels"].get<std::int64_t>();
    if (j.contains("blocks")) s.blocks = j["blocks"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, ctx + ": " + e.what());
  }
  return s;
}

}  // namespace

ModelConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object())
    throw Error(ErrorCode::config_error, "model config must be a json object");
  static const std::set<std::string> kKeys = {
      "schema_version", "input_ch",      "stem_ch",    "enc_stages",
      "middle_channels", "middle_blocks", "dec_stages", "downsample",
      "upsample",        "skip_merge"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!kKeys.count(it.key()))
      throw Error(ErrorCode::config_error,
                  "unknown field '" + it.key() + "' in model config");
  }
  if (j.contains("schema_version") &&
      !(j["schema_version"].is_number_integer() &&
        j["schema_version"].get<int>() == 1))
    throw Error(ErrorCode::config_error, "unsupported schema_version");
  ModelConfig c;
  try {
    if (j.contains("input_ch")) c.input_ch = j["input_ch"].get<std::int64_t>();
    if (j.contains("stem_ch")) c.stem_ch = j["stem_ch"].get<std::int64_t>();
    if (j.contains("enc_stages")) {
      const auto& arr = j["enc_stages"];
      if (!arr.is_array())
        throw Error(ErrorCode::config_error, "enc_stages must be an array");
      if (arr.size() != 4)
        throw Error(ErrorCode::config_error, "expected 4 encoder stages, got " +
                                                 std::to_string(arr.size()));
      const ModelConfig defaults;
      c.enc_stages.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        c.enc_stages.push_back(stage_from_json(
            arr[i], defaults.enc_stages[i].channels,
            defaults.enc_stages[i].blocks, "enc_stages"));
      }
    }
    if (j.contains("dec_stages")) {
      const auto& arr = j["dec_stages"];
      if (!arr.is_array())
        throw Error(ErrorCode::config_error, "dec_stages must be an array");
      if (arr.size() != 4)
        throw Error(ErrorCode::config_error, "expected 4 decoder stages, got " +
                                                 std::to_string(arr.size()));
      const ModelConfig defaults;
      c.dec_stages.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        c.dec_stages.push_back(stage_from_json(
            arr[i], defaults.dec_stages[i].channels,
            defaults.dec_stages[i].blocks, "dec_stages"));
      }
    }
    if (j.contains("middle_channels"))
      c.middle_channels = j["middle_channels"].get<std::int64_t>();
    if (j.contains("middle_blocks"))
      c.middle_blocks = j["middle_blocks"].get<int>();
    if (j.contains("downsample"))
      c.downsample = j["downsample"].get<std::string>();
    if (j.contains("upsample")) c.upsample = j["upsample"].get<std::string>();
    if (j.contains("skip_merge"))
      c.skip_merge = j["skip_merge"].get<std::string>();
  } catch (const Error&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error,
                std::string("bad model config: ") + e.what());
  }
  check_cfg(c);
  return c;
}

nlohmann::ordered_json serialize_config(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["input_ch"] = c.input_ch;
  j["stem_ch"] = c.stem_ch;
  j["enc_stages"] = nlohmann::ordered_json::array();
  for (const auto& s : c.enc_stages)
    j["enc_stages"].push_back({{"channels", s.channels}, {"blocks", s.blocks}});
  j["middle_channels"] = c.middle_channels;
  j["middle_blocks"] = c.middle_blocks;
  j["dec_stages"] = nlohmann::ordered_json::array();
  for (const auto& s : c.dec_stages)
    j["dec_stages"].push_back({{"channels", s.channels}, {"blocks", s.blocks}});
  j["downsample"] = c.downsample;
  j["upsample"] = c.upsample;
  j["skip_merge"] = c.skip_merge;
  return j;
}

NetGraph model_from_json(const nlohmann::json& j) {
  if (j.is_object() && j.contains("nodes")) return graph_from_json(j);
  return build_pmrid_like(parse_config(j));
}

}  // namespace mofa
