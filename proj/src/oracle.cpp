#include "mofa/oracle.h"

#include <cstring>

#include "mofa/analyzer.h"

namespace mofa {

namespace {

std::int64_t pick(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng.next_u64() %
                                        static_cast<std::uint64_t>(hi - lo + 1));
}

int pick_kernel(Rng& rng) {
  const int ks[3] = {1, 3, 5};
  return ks[pick(rng, 0, 2)];
}

}  // namespace

OracleCase random_oracle_case(Rng& rng) {
  for (;;) {
    const std::int64_t which = pick(rng, 0, 9);
    const std::int64_t h = pick(rng, 1, 32), w = pick(rng, 1, 32);
    const std::int64_t c = pick(rng, 1, 128);
    const int k = pick_kernel(rng);
    const int stride = static_cast<int>(pick(rng, 1, 2));
    const bool bias = pick(rng, 0, 1) == 1;
    OracleCase oc;
    oc.shape = {1, c, h, w};
    switch (which) {
      case 0: {
        const std::int64_t out = pick(rng, 1, 128);
        oc.kind = VanillaConv{{c, out, k, stride, bias}};
        oc.name = "vanilla";
        break;
      }
      case 1:
        oc.kind = DepthwiseConv{{c, c, k, stride, bias}};
        oc.name = "depthwise";
        break;
      case 2: {
        const std::int64_t out = pick(rng, 1, 128);
        oc.kind = PointwiseConv{{c, out, 1, 1, bias}};
        oc.name = "pointwise";
        break;
      }
      case 3: {
        const std::int64_t out = pick(rng, 1, 128);
        oc.kind = SeparableConv{{c, c, k, stride, bias}, {c, out, 1, 1, bias}};
        oc.name = "separable";
        break;
      }
      case 4: {
        const int den = pick(rng, 0, 1) ? 2 : 4;
        const std::int64_t d = pick(rng, den, 128);
        oc.shape.c = d;
        oc.kind = PConv{{d, d, k, 1, bias}, {1, den}};
        oc.name = "pconv";
        break;
      }
      case 5: {
        const int den = pick(rng, 0, 1) ? 2 : 4;
        const std::int64_t d = pick(rng, den, 128);
        oc.shape.c = d;
        oc.kind = PDWConv{{d, d, k, 1, bias}, {1, den}};
        oc.name = "pdwconv";
        break;
      }
      case 6: {
        const std::int64_t out = pick(rng, 1, 128);
        oc.kind = Deconv{{c, out, k, 2, bias}};
        oc.name = "deconv";
        break;
      }
      case 7:
        oc.shape.h = pick(rng, 2, 32);
        oc.shape.w = pick(rng, 2, 32);
        oc.kind = AvgPool2x2{};
        oc.name = "avgpool";
        break;
      case 8:
        oc.kind = Interp2x{pick(rng, 0, 1) ? InterpMode::bilinear
                                           : InterpMode::nearest};
        oc.name = "interp";
        break;
      default:
        oc.kind = Activation{};
        oc.name = "relu";
        break;
    }
    // keep single cases cheap so thousand-case sweeps stay within budget
    if (layer_macs(oc.kind, oc.shape) <= 40'000'000ULL) return oc;
  }
}

OracleCase random_partial_case(Rng& rng, bool pdw) {
  const int den = pick(rng, 0, 1) ? 2 : 4;
  const std::int64_t d = pick(rng, den, 128);
  const std::int64_t h = pick(rng, 1, 32), w = pick(rng, 1, 32);
  const int k = pick_kernel(rng);
  const bool bias = pick(rng, 0, 1) == 1;
  OracleCase oc;
  oc.shape = {1, d, h, w};
  if (pdw) {
    oc.kind = PDWConv{{d, d, k, 1, bias}, {1, den}};
    oc.name = "pdwconv";
  } else {
    oc.kind = PConv{{d, d, k, 1, bias}, {1, den}};
    oc.name = "pconv";
  }
  return oc;
}

std::string check_oracle_case(const OracleCase& c, std::uint64_t seed) {
  NodeWeights w = make_layer_weights(c.kind, c.name, seed);
  Tensor x = tensor_from_seed(c.shape, seed ^ fnv1a64(c.name + "_x"));
  std::uint64_t counted = 0;
  run_layer(c.kind, w, x, &counted);
  const std::uint64_t predicted = layer_macs(c.kind, c.shape);
  if (counted != predicted) {
    return c.name + " at " + dims_to_string(c.shape) + ": analyzer says " +
           std::to_string(predicted) + ", interpreter counted " +
           std::to_string(counted);
  }
  return {};
}

std::string check_partial_case(const OracleCase& c, std::uint64_t seed) {
  const bool pdw = std::holds_alternative<PDWConv>(c.kind);
  const ConvSpec spec =
      pdw ? std::get<PDWConv>(c.kind).spec : std::get<PConv>(c.kind).spec;
  const Portion portion =
      pdw ? std::get<PDWConv>(c.kind).portion : std::get<PConv>(c.kind).portion;
  const std::int64_t d = spec.in_ch;
  const std::int64_t cp = portion.cp(d);
  NodeWeights w = make_layer_weights(c.kind, c.name, seed);
  Tensor x = tensor_from_seed(c.shape, seed ^ fnv1a64(c.name + "_x"));
  Tensor out = run_layer(c.kind, w, x, nullptr);

  // passthrough channels [cp, d) must be bitwise-identical to the input
  if (cp < d) {
    Tensor tail_in = channel_slice(x, cp, d);
    Tensor tail_out = channel_slice(out, cp, d);
    if (std::memcmp(tail_in.data.data(), tail_out.data.data(),
                    tail_in.data.size() * sizeof(float)) != 0) {
      return c.name + " at " + dims_to_string(c.shape) +
             ": passthrough channels were modified";
    }
  }
  // active slice must equal the plain conv run standalone on the slice; the
  // partial kind draws its weights exactly like the dense kind on cp channels
  LayerKind dense;
  if (pdw) {
    dense = DepthwiseConv{{cp, cp, spec.kernel, 1, spec.bias}};
  } else {
    dense = VanillaConv{{cp, cp, spec.kernel, 1, spec.bias}};
  }
  NodeWeights dense_w = make_layer_weights(dense, c.name, seed);
  Tensor head_in = channel_slice(x, 0, cp);
  Tensor ref = run_layer(dense, dense_w, head_in, nullptr);
  Tensor head_out = channel_slice(out, 0, cp);
  if (std::memcmp(ref.data.data(), head_out.data.data(),
                  ref.data.size() * sizeof(float)) != 0) {
    return c.name + " at " + dims_to_string(c.shape) +
           ": active slice differs from the standalone conv";
  }
  return {};
}

}  // namespace mofa
