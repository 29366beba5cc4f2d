#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mofa {

enum class ErrorCode {
  invalid_shape,
  slice_error,
  shape_mismatch,
  config_error,
  parse_error,
  stage_error,
  non_finite,
  empty_report,
  io_error,
};

// single exception type for all domain errors; code() tells callers which
// contract was violated without string matching
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct Dims4 {
  std::int64_t n = 1;
  std::int64_t c = 1;
  std::int64_t h = 1;
  std::int64_t w = 1;
  bool operator==(const Dims4&) const = default;
  std::int64_t numel() const { return n * c * h * w; }
};

std::string dims_to_string(const Dims4& d);

// NCHW float32, dense row-major
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims4 shape);

  Dims4 shape;
  std::vector<float> data;

  float& at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
    return data[((n * shape.c + c) * shape.h + y) * shape.w + x];
  }
  float at(std::int64_t n, std::int64_t c, std::int64_t y,
           std::int64_t x) const {
    return data[((n * shape.c + c) * shape.h + y) * shape.w + x];
  }
};

// deterministic 64-bit LCG (MMIX constants); floats come from the top 24 bits
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64();
  float next_float();  // uniform in [-1, 1)

 private:
  std::uint64_t state_;
};

std::uint64_t fnv1a64(const std::string& s);

Tensor tensor_from_seed(Dims4 shape, std::uint64_t seed);
Tensor channel_slice(const Tensor& t, std::int64_t lo, std::int64_t hi);
Tensor concat_channels(const Tensor& a, const Tensor& b);

// wrapping sum of the float32 bit patterns; position-blind but exact on values
std::uint64_t checksum(const Tensor& t);
std::uint64_t checksum(const std::vector<float>& v);

}  // namespace mofa
