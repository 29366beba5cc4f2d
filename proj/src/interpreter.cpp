#include "mofa/interpreter.h"

#include <cmath>

namespace mofa {

namespace {

constexpr std::uint64_t kSeedMix = 0x9E3779B97F4A7C15ULL;

void draw(Rng& rng, double scale, std::size_t count, std::vector<float>& dst) {
  dst.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    dst[i] =
        static_cast<float>(static_cast<double>(rng.next_float()) * scale);
  }
}

struct ConvOut {
  std::int64_t h;
  std::int64_t w;
};

ConvOut strided_out(std::int64_t h, std::int64_t w, int stride) {
  if (stride == 2) return {(h + 1) / 2, (w + 1) / 2};
  return {h, w};
}

void check_in_channels(const Tensor& x, std::int64_t want) {
  if (x.shape.c != want) {
    throw Error(ErrorCode::shape_mismatch,
                "layer expects " + std::to_string(want) +
                    " input channels, got " + std::to_string(x.shape.c));
  }
}

// plain vanilla conv; also covers the leading channels of a pconv when
// in_lo/out cover only the convolved slice
void conv2d_into(const Tensor& x, Tensor& out, const float* w, const float* b,
                 std::int64_t in_ch, std::int64_t out_ch, int kernel,
                 int stride, std::uint64_t& mults) {
  const std::int64_t H = x.shape.h, W = x.shape.w;
  const std::int64_t K = kernel, P = (kernel - 1) / 2;
  const std::int64_t OH = out.shape.h, OW = out.shape.w;
  std::uint64_t m = 0;
  for (std::int64_t n = 0; n < x.shape.n; ++n) {
    for (std::int64_t oc = 0; oc < out_ch; ++oc) {
      float* op = out.data.data() + ((n * out.shape.c + oc) * OH) * OW;
      for (std::int64_t oy = 0; oy < OH; ++oy) {
        for (std::int64_t ox = 0; ox < OW; ++ox) {
          float acc = 0.0f;
          for (std::int64_t ic = 0; ic < in_ch; ++ic) {
            const float* xp =
                x.data.data() + ((n * x.shape.c + ic) * H) * W;
            const float* wp = w + ((oc * in_ch + ic) * K) * K;
            for (std::int64_t ky = 0; ky < K; ++ky) {
              const std::int64_t iy = oy * stride + ky - P;
              const bool inside_y = iy >= 0 && iy < H;
              for (std::int64_t kx = 0; kx < K; ++kx) {
                const std::int64_t ix = ox * stride + kx - P;
                const float xv = (inside_y && ix >= 0 && ix < W)
                                     ? xp[iy * W + ix]
                                     : 0.0f;
                acc += wp[ky * K + kx] * xv;
                ++m;
              }
            }
          }
          if (b) acc += b[oc];
          op[oy * OW + ox] = acc;
        }
      }
    }
  }
  mults += m;
}

// depthwise on channels [0, ch); channels beyond ch (pdw passthrough) are the
// caller's business
void depthwise_into(const Tensor& x, Tensor& out, const float* w,
                    const float* b, std::int64_t ch, int kernel, int stride,
                    std::uint64_t& mults) {
  const std::int64_t H = x.shape.h, W = x.shape.w;
  const std::int64_t K = kernel, P = (kernel - 1) / 2;
  const std::int64_t OH = out.shape.h, OW = out.shape.w;
  std::uint64_t m = 0;
  for (std::int64_t n = 0; n < x.shape.n; ++n) {
    for (std::int64_t c = 0; c < ch; ++c) {
      const float* xp = x.data.data() + ((n * x.shape.c + c) * H) * W;
      const float* wp = w + (c * K) * K;
      float* op = out.data.data() + ((n * out.shape.c + c) * OH) * OW;
      for (std::int64_t oy = 0; oy < OH; ++oy) {
        for (std::int64_t ox = 0; ox < OW; ++ox) {
          float acc = 0.0f;
          for (std::int64_t ky = 0; ky < K; ++ky) {
            const std::int64_t iy = oy * stride + ky - P;
            const bool inside_y = iy >= 0 && iy < H;
            for (std::int64_t kx = 0; kx < K; ++kx) {
              const std::int64_t ix = ox * stride + kx - P;
              const float xv =
                  (inside_y && ix >= 0 && ix < W) ? xp[iy * W + ix] : 0.0f;
              acc += wp[ky * K + kx] * xv;
              ++m;
            }
          }
          if (b) acc += b[c];
          op[oy * OW + ox] = acc;
        }
      }
    }
  }
  mults += m;
}

void pointwise_into(const Tensor& x, Tensor& out, const float* w,
                    const float* b, std::int64_t in_ch, std::int64_t out_ch,
                    std::uint64_t& mults) {
  const std::int64_t H = x.shape.h, W = x.shape.w;
  std::uint64_t m = 0;
  for (std::int64_t n = 0; n < x.shape.n; ++n) {
    for (std::int64_t oc = 0; oc < out_ch; ++oc) {
      const float* wp = w + oc * in_ch;
      float* op = out.data.data() + ((n * out.shape.c + oc) * H) * W;
      for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t xcol = 0; xcol < W; ++xcol) {
          float acc = 0.0f;
          for (std::int64_t ic = 0; ic < in_ch; ++ic) {
            acc += wp[ic] *
                   x.data[((n * x.shape.c + ic) * H + y) * W + xcol];
            ++m;
          }
          if (b) acc += b[oc];
          op[y * W + xcol] = acc;
        }
      }
    }
  }
  mults += m;
}

void copy_channels(const Tensor& x, Tensor& out, std::int64_t lo,
                   std::int64_t hi) {
  const std::int64_t plane = x.shape.h * x.shape.w;
  for (std::int64_t n = 0; n < x.shape.n; ++n) {
    for (std::int64_t c = lo; c < hi; ++c) {
      const float* src = x.data.data() + (n * x.shape.c + c) * plane;
      float* dst = out.data.data() + (n * out.shape.c + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) dst[i] = src[i];
    }
  }
}

// stride-2 transposed conv realized by scattering every input*weight product
// into a padded buffer and cropping (kernel-1)/2 from each border; the buffer
// is long enough that no product is ever skipped, so the multiply count is
// exactly h*w*in*out*k^2
Tensor deconv_forward(const ConvSpec& s, const float* w, const float* b,
                      const Tensor& x, std::uint64_t& mults) {
  const std::int64_t H = x.shape.h, W = x.shape.w;
  const std::int64_t K = s.kernel, P = (s.kernel - 1) / 2;
  const std::int64_t OH = 2 * H, OW = 2 * W;
  const std::int64_t BH = std::max(2 * H + K - 2, OH + P);
  const std::int64_t BW = std::max(2 * W + K - 2, OW + P);
  Tensor out({x.shape.n, s.out_ch, OH, OW});
  std::vector<float> buf(static_cast<std::size_t>(BH * BW));
  std::uint64_t m = 0;
  for (std::int64_t n = 0; n < x.shape.n; ++n) {
    for (std::int64_t oc = 0; oc < s.out_ch; ++oc) {
      std::fill(buf.begin(), buf.end(), 0.0f);
      for (std::int64_t ic = 0; ic < s.in_ch; ++ic) {
        const float* xp = x.data.data() + ((n * x.shape.c + ic) * H) * W;
        const float* wp = w + ((oc * s.in_ch + ic) * K) * K;
        for (std::int64_t iy = 0; iy < H; ++iy) {
          for (std::int64_t ix = 0; ix < W; ++ix) {
            const float xv = xp[iy * W + ix];
            for (std::int64_t ky = 0; ky < K; ++ky) {
              float* bp = buf.data() + (iy * 2 + ky) * BW + ix * 2;
              for (std::int64_t kx = 0; kx < K; ++kx) {
                bp[kx] += wp[ky * K + kx] * xv;
                ++m;
              }
            }
          }
        }
      }
      float* op = out.data.data() + ((n * out.shape.c + oc) * OH) * OW;
      const float bias = s.bias && b ? b[oc] : 0.0f;
      for (std::int64_t oy = 0; oy < OH; ++oy) {
        for (std::int64_t ox = 0; ox < OW; ++ox) {
          op[oy * OW + ox] = buf[(oy + P) * BW + (ox + P)] + bias;
        }
      }
    }
  }
  mults += m;
  return out;
}

Tensor avgpool_forward(const Tensor& x) {
  if (x.shape.h < 2 || x.shape.w < 2) {
    throw Error(ErrorCode::shape_mismatch,
                "avgpool2x2 needs h,w >= 2, got " + dims_to_string(x.shape));
  }
  const std::int64_t OH = x.shape.h / 2, OW = x.shape.w / 2;
  Tensor out({x.shape.n, x.shape.c, OH, OW});
  for (std::int64_t n = 0; n < x.shape.n; ++n) {
    for (std::int64_t c = 0; c < x.shape.c; ++c) {
      for (std::int64_t y = 0; y < OH; ++y) {
        for (std::int64_t xcol = 0; xcol < OW; ++xcol) {
          const float s = x.at(n, c, 2 * y, 2 * xcol) +
                          x.at(n, c, 2 * y, 2 * xcol + 1) +
                          x.at(n, c, 2 * y + 1, 2 * xcol) +
                          x.at(n, c, 2 * y + 1, 2 * xcol + 1);
          out.at(n, c, y, xcol) = s * 0.25f;
        }
      }
    }
  }
  return out;
}

Tensor interp_forward(const Interp2x& ip, const Tensor& x) {
  const std::int64_t H = x.shape.h, W = x.shape.w;
  Tensor out({x.shape.n, x.shape.c, 2 * H, 2 * W});
  if (ip.mode == InterpMode::nearest) {
    for (std::int64_t n = 0; n < x.shape.n; ++n)
      for (std::int64_t c = 0; c < x.shape.c; ++c)
        for (std::int64_t y = 0; y < 2 * H; ++y)
          for (std::int64_t xcol = 0; xcol < 2 * W; ++xcol)
            out.at(n, c, y, xcol) = x.at(n, c, y / 2, xcol / 2);
    return out;
  }
  // bilinear, half-pixel centers
  for (std::int64_t n = 0; n < x.shape.n; ++n) {
    for (std::int64_t c = 0; c < x.shape.c; ++c) {
      for (std::int64_t y = 0; y < 2 * H; ++y) {
        const float sy = (y + 0.5f) * 0.5f - 0.5f;
        std::int64_t y0 = static_cast<std::int64_t>(std::floor(sy));
        const float fy = sy - static_cast<float>(y0);
        std::int64_t y1 = y0 + 1;
        y0 = std::clamp<std::int64_t>(y0, 0, H - 1);
        y1 = std::clamp<std::int64_t>(y1, 0, H - 1);
        for (std::int64_t xcol = 0; xcol < 2 * W; ++xcol) {
          const float sx = (xcol + 0.5f) * 0.5f - 0.5f;
          std::int64_t x0 = static_cast<std::int64_t>(std::floor(sx));
          const float fx = sx - static_cast<float>(x0);
          std::int64_t x1 = x0 + 1;
          x0 = std::clamp<std::int64_t>(x0, 0, W - 1);
          x1 = std::clamp<std::int64_t>(x1, 0, W - 1);
          const float v00 = x.at(n, c, y0, x0), v01 = x.at(n, c, y0, x1);
          const float v10 = x.at(n, c, y1, x0), v11 = x.at(n, c, y1, x1);
          out.at(n, c, y, xcol) = (1.0f - fy) * ((1.0f - fx) * v00 + fx * v01) +
                                  fy * ((1.0f - fx) * v10 + fx * v11);
        }
      }
    }
  }
  return out;
}

}  // namespace

NodeWeights make_layer_weights(const LayerKind& k, const std::string& id,
                               std::uint64_t seed) {
  Rng rng(fnv1a64(id) ^ (kSeedMix * seed));
  NodeWeights nw;
  auto scale = [](std::int64_t fan_in) {
    return 1.0 / std::sqrt(static_cast<double>(fan_in));
  };
  if (const auto* v = std::get_if<VanillaConv>(&k)) {
    const ConvSpec& s = v->spec;
    const double sc = scale(s.in_ch * s.kernel * s.kernel);
    draw(rng, sc, s.out_ch * s.in_ch * s.kernel * s.kernel, nw.w);
    if (s.bias) draw(rng, sc, s.out_ch, nw.b);
  } else if (const auto* v = std::get_if<DepthwiseConv>(&k)) {
    const ConvSpec& s = v->spec;
    const double sc = scale(s.kernel * s.kernel);
    draw(rng, sc, s.in_ch * s.kernel * s.kernel, nw.w);
    if (s.bias) draw(rng, sc, s.in_ch, nw.b);
  } else if (const auto* v = std::get_if<PointwiseConv>(&k)) {
    const ConvSpec& s = v->spec;
    const double sc = scale(s.in_ch);
    draw(rng, sc, s.out_ch * s.in_ch, nw.w);
    if (s.bias) draw(rng, sc, s.out_ch, nw.b);
  } else if (const auto* v = std::get_if<SeparableConv>(&k)) {
    const double sd = scale(v->depthwise.kernel * v->depthwise.kernel);
    draw(rng, sd,
         v->depthwise.in_ch * v->depthwise.kernel * v->depthwise.kernel,
         nw.w);
    if (v->depthwise.bias) draw(rng, sd, v->depthwise.in_ch, nw.b);
    const double sp = scale(v->pointwise.in_ch);
    draw(rng, sp, v->pointwise.out_ch * v->pointwise.in_ch, nw.w2);
    if (v->pointwise.bias) draw(rng, sp, v->pointwise.out_ch, nw.b2);
  } else if (const auto* v = std::get_if<PConv>(&k)) {
    const std::int64_t cp = v->portion.cp(v->spec.in_ch);
    const double sc = scale(cp * v->spec.kernel * v->spec.kernel);
    draw(rng, sc, cp * cp * v->spec.kernel * v->spec.kernel, nw.w);
    if (v->spec.bias) draw(rng, sc, cp, nw.b);
  } else if (const auto* v = std::get_if<PDWConv>(&k)) {
    const std::int64_t cp = v->portion.cp(v->spec.in_ch);
    const double sc = scale(v->spec.kernel * v->spec.kernel);
    draw(rng, sc, cp * v->spec.kernel * v->spec.kernel, nw.w);
    if (v->spec.bias) draw(rng, sc, cp, nw.b);
  } else if (const auto* v = std::get_if<Deconv>(&k)) {
    const ConvSpec& s = v->spec;
    const double sc = scale(s.in_ch * s.kernel * s.kernel);
    draw(rng, sc, s.out_ch * s.in_ch * s.kernel * s.kernel, nw.w);
    if (s.bias) draw(rng, sc, s.out_ch, nw.b);
  }
  return nw;
}

Weights make_weights(const NetGraph& g, std::uint64_t seed) {
  Weights w;
  w.seed = seed;
  for (const auto& n : g.nodes) {
    w.per_node[n.id] = make_layer_weights(n.kind, n.id, seed);
  }
  return w;
}

Tensor run_layer(const LayerKind& k, const NodeWeights& nw, const Tensor& x,
                 std::uint64_t* mults) {
  std::uint64_t local = 0;
  std::uint64_t& m = mults ? *mults : local;
  if (const auto* v = std::get_if<VanillaConv>(&k)) {
    const ConvSpec& s = v->spec;
    check_in_channels(x, s.in_ch);
    auto [oh, ow] = strided_out(x.shape.h, x.shape.w, s.stride);
    Tensor out({x.shape.n, s.out_ch, oh, ow});
    conv2d_into(x, out, nw.w.data(), s.bias ? nw.b.data() : nullptr, s.in_ch,
                s.out_ch, s.kernel, s.stride, m);
    return out;
  }
  if (const auto* v = std::get_if<DepthwiseConv>(&k)) {
    const ConvSpec& s = v->spec;
    check_in_channels(x, s.in_ch);
    auto [oh, ow] = strided_out(x.shape.h, x.shape.w, s.stride);
    Tensor out({x.shape.n, s.in_ch, oh, ow});
    depthwise_into(x, out, nw.w.data(), s.bias ? nw.b.data() : nullptr,
                   s.in_ch, s.kernel, s.stride, m);
    return out;
  }
  if (const auto* v = std::get_if<PointwiseConv>(&k)) {
    const ConvSpec& s = v->spec;
    check_in_channels(x, s.in_ch);
    Tensor out({x.shape.n, s.out_ch, x.shape.h, x.shape.w});
    pointwise_into(x, out, nw.w.data(), s.bias ? nw.b.data() : nullptr,
                   s.in_ch, s.out_ch, m);
    return out;
  }
  if (const auto* v = std::get_if<SeparableConv>(&k)) {
    check_in_channels(x, v->depthwise.in_ch);
    auto [oh, ow] = strided_out(x.shape.h, x.shape.w, v->depthwise.stride);
    Tensor mid({x.shape.n, v->depthwise.in_ch, oh, ow});
    depthwise_into(x, mid, nw.w.data(),
                   v->depthwise.bias ? nw.b.data() : nullptr,
                   v->depthwise.in_ch, v->depthwise.kernel,
                   v->depthwise.stride, m);
    Tensor out({x.shape.n, v->pointwise.out_ch, oh, ow});
    pointwise_into(mid, out, nw.w2.data(),
                   v->pointwise.bias ? nw.b2.data() : nullptr,
                   v->pointwise.in_ch, v->pointwise.out_ch, m);
    return out;
  }
  if (const auto* v = std::get_if<PConv>(&k)) {
    check_in_channels(x, v->spec.in_ch);
    const std::int64_t cp = v->portion.cp(v->spec.in_ch);
    Tensor out(x.shape);
    // conv the leading cp channels as a dense cp->cp vanilla conv
    {
      Tensor head = channel_slice(x, 0, cp);
      Tensor head_out({x.shape.n, cp, x.shape.h, x.shape.w});
      conv2d_into(head, head_out, nw.w.data(),
                  v->spec.bias ? nw.b.data() : nullptr, cp, cp, v->spec.kernel,
                  1, m);
      const std::int64_t plane = x.shape.h * x.shape.w;
      for (std::int64_t n = 0; n < x.shape.n; ++n) {
        for (std::int64_t c = 0; c < cp; ++c) {
          const float* src = head_out.data.data() + (n * cp + c) * plane;
          float* dst = out.data.data() + (n * out.shape.c + c) * plane;
          for (std::int64_t i = 0; i < plane; ++i) dst[i] = src[i];
        }
      }
    }
    copy_channels(x, out, cp, x.shape.c);
    return out;
  }
  if (const auto* v = std::get_if<PDWConv>(&k)) {
    check_in_channels(x, v->spec.in_ch);
    const std::int64_t cp = v->portion.cp(v->spec.in_ch);
    Tensor out(x.shape);
    depthwise_into(x, out, nw.w.data(), v->spec.bias ? nw.b.data() : nullptr,
                   cp, v->spec.kernel, 1, m);
    copy_channels(x, out, cp, x.shape.c);
    return out;
  }
  if (const auto* v = std::get_if<Deconv>(&k)) {
    check_in_channels(x, v->spec.in_ch);
    return deconv_forward(v->spec, nw.w.data(), nw.b.data(), x, m);
  }
  if (std::holds_alternative<AvgPool2x2>(k)) return avgpool_forward(x);
  if (const auto* v = std::get_if<Interp2x>(&k)) return interp_forward(*v, x);
  if (std::holds_alternative<Activation>(k)) {
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      const float val = x.data[i];
      out.data[i] = val > 0.0f ? val : 0.0f;
    }
    return out;
  }
  throw Error(ErrorCode::shape_mismatch,
              "run_layer cannot execute multi-input kind '" + kind_name(k) +
                  "'");
}

std::pair<Tensor, ExecStats> forward(const NetGraph& g, const Weights& w,
                                     const Tensor& x) {
  auto order = topo_order(g);
  if (order.empty()) {
    throw Error(ErrorCode::shape_mismatch, "cannot run an empty graph");
  }
  std::string final_id = order.back();
  for (const auto& n : g.nodes) {
    if (n.role == RoleTag::io && n.stage == "output") final_id = n.id;
  }
  std::map<std::string, Tensor> live;
  std::map<std::string, int> remaining;
  for (const auto& n : g.nodes) {
    remaining[n.id] = static_cast<int>(g.outputs_of(n.id).size());
  }
  ExecStats stats;
  for (const auto& id : order) {
    const LayerNode* node = g.find(id);
    auto producers = g.inputs_of(id);
    std::uint64_t m = 0;
    Tensor out;
    if (std::holds_alternative<Add>(node->kind)) {
      if (producers.size() < 2) {
        throw Error(ErrorCode::shape_mismatch,
                    "node '" + id + "': add needs at least 2 inputs");
      }
      out = live.at(producers[0]);
      for (std::size_t i = 1; i < producers.size(); ++i) {
        const Tensor& rhs = live.at(producers[i]);
        if (!(rhs.shape == out.shape)) {
          throw Error(ErrorCode::shape_mismatch,
                      "node '" + id + "': add inputs disagree, " +
                          dims_to_string(out.shape) + " vs " +
                          dims_to_string(rhs.shape));
        }
        for (std::size_t j = 0; j < out.data.size(); ++j) {
          out.data[j] += rhs.data[j];
        }
      }
    } else if (std::holds_alternative<ConcatSkip>(node->kind)) {
      if (producers.size() < 2) {
        throw Error(ErrorCode::shape_mismatch,
                    "node '" + id + "': concat needs at least 2 inputs");
      }
      out = live.at(producers[0]);
      for (std::size_t i = 1; i < producers.size(); ++i) {
        out = concat_channels(out, live.at(producers[i]));
      }
    } else {
      const Tensor& in = producers.empty() ? x : live.at(producers[0]);
      auto wit = w.per_node.find(id);
      if (wit == w.per_node.end()) {
        throw Error(ErrorCode::config_error,
                    "missing weights for node '" + id + "'");
      }
      out = run_layer(node->kind, wit->second, in, &m);
    }
    for (float v : out.data) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::non_finite,
                    "node '" + id + "' produced a non-finite value");
      }
    }
    stats.multiplies[id] = m;
    stats.total_multiplies += m;
    stats.checksums[id] = checksum(out);
    for (const auto& p : producers) {
      if (--remaining[p] <= 0 && p != final_id) live.erase(p);
    }
    live[id] = std::move(out);
  }
  return {live.at(final_id), std::move(stats)};
}

std::map<std::string, std::uint64_t> count_macs(const NetGraph& g,
                                                const Weights& w,
                                                const Tensor& x) {
  return forward(g, w, x).second.multiplies;
}

}  // namespace mofa
