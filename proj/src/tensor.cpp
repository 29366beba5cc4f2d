#include "mofa/tensor.h"

#include <bit>

namespace mofa {

std::string dims_to_string(const Dims4& d) {
  return std::to_string(d.n) + "x" + std::to_string(d.c) + "x" +
         std::to_string(d.h) + "x" + std::to_string(d.w);
}

Tensor::Tensor(Dims4 s) {
  if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
    throw Error(ErrorCode::invalid_shape,
                "tensor shape must be positive, got " + dims_to_string(s));
  }
  shape = s;
  data.assign(static_cast<std::size_t>(s.numel()), 0.0f);
}

std::uint64_t Rng::next_u64() {
  state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
  return state_;
}

float Rng::next_float() {
  std::uint64_t m = next_u64() >> 40;  // top 24 bits
  return static_cast<float>(static_cast<double>(m) / 8388608.0 - 1.0);
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

Tensor tensor_from_seed(Dims4 shape, std::uint64_t seed) {
  Tensor t(shape);
  Rng rng(seed);
  for (float& v : t.data) v = rng.next_float();
  return t;
}

Tensor channel_slice(const Tensor& t, std::int64_t lo, std::int64_t hi) {
  if (lo < 0 || hi > t.shape.c || lo >= hi) {
    throw Error(ErrorCode::slice_error,
                "channel_slice [" + std::to_string(lo) + "," +
                    std::to_string(hi) + ") out of range for " +
                    std::to_string(t.shape.c) + " channels");
  }
  Tensor out({t.shape.n, hi - lo, t.shape.h, t.shape.w});
  const std::int64_t plane = t.shape.h * t.shape.w;
  for (std::int64_t n = 0; n < t.shape.n; ++n) {
    for (std::int64_t c = lo; c < hi; ++c) {
      const float* src = t.data.data() + (n * t.shape.c + c) * plane;
      float* dst = out.data.data() + (n * out.shape.c + (c - lo)) * plane;
      for (std::int64_t i = 0; i < plane; ++i) dst[i] = src[i];
    }
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.shape.n != b.shape.n || a.shape.h != b.shape.h ||
      a.shape.w != b.shape.w) {
    throw Error(ErrorCode::shape_mismatch,
                "concat_channels: " + dims_to_string(a.shape) + " vs " +
                    dims_to_string(b.shape));
  }
  Tensor out({a.shape.n, a.shape.c + b.shape.c, a.shape.h, a.shape.w});
  const std::int64_t plane = a.shape.h * a.shape.w;
  for (std::int64_t n = 0; n < a.shape.n; ++n) {
    float* dst = out.data.data() + n * out.shape.c * plane;
    const float* pa = a.data.data() + n * a.shape.c * plane;
    const float* pb = b.data.data() + n * b.shape.c * plane;
    for (std::int64_t i = 0; i < a.shape.c * plane; ++i) dst[i] = pa[i];
    dst += a.shape.c * plane;
    for (std::int64_t i = 0; i < b.shape.c * plane; ++i) dst[i] = pb[i];
  }
  return out;
}

std::uint64_t checksum(const std::vector<float>& v) {
  std::uint64_t sum = 0;
  for (float f : v) sum += std::bit_cast<std::uint32_t>(f);
  return sum;
}

std::uint64_t checksum(const Tensor& t) { return checksum(t.data); }

}  // namespace mofa
