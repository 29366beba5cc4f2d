#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <bit>
#include <cstdint>

#include "doctest.h"
#include "mofa/tensor.h"

using namespace mofa;

namespace {
std::uint32_t bits(float f) { return std::bit_cast<std::uint32_t>(f); }
}  // namespace

TEST_CASE("dims4 basics") {
  Dims4 d{2, 8, 16, 16};
  CHECK(d.numel() == 4096);
  CHECK(d == Dims4{2, 8, 16, 16});
  CHECK_FALSE(d == Dims4{2, 8, 16, 17});
  CHECK(dims_to_string(d) == "2x8x16x16");
}

TEST_CASE("tensor rejects non-positive dimensions") {
  CHECK_THROWS_AS(Tensor(Dims4{1, 0, 4, 4}), Error);
  try {
    Tensor t(Dims4{1, 3, -1, 4});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_shape);
  }
}

TEST_CASE("tensor layout is row-major nchw") {
  Tensor t(Dims4{1, 2, 2, 3});
  for (std::size_t i = 0; i < t.data.size(); ++i)
    t.data[i] = static_cast<float>(i);
  CHECK(t.at(0, 0, 0, 0) == 0.0f);
  CHECK(t.at(0, 0, 0, 2) == 2.0f);
  CHECK(t.at(0, 0, 1, 0) == 3.0f);
  CHECK(t.at(0, 1, 0, 0) == 6.0f);
  CHECK(t.at(0, 1, 1, 2) == 11.0f);
}

TEST_CASE("rng golden sequence, seed 0") {
  Rng rng(0);
  const std::uint32_t want[6] = {0xbf57f50a, 0xbf4bee24, 0x3e57b3c0,
                                 0xbe4a4f30, 0xbe6e55a0, 0x3df947f0};
  for (std::uint32_t w : want) CHECK(bits(rng.next_float()) == w);
}

TEST_CASE("rng golden first draw, seed 7") {
  Rng rng(7);
  CHECK(bits(rng.next_float()) == 0xbc5e6c00);
}

TEST_CASE("rng stays in [-1, 1)") {
  Rng rng(123456789);
  for (int i = 0; i < 4096; ++i) {
    float v = rng.next_float();
    CHECK(v >= -1.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("fnv1a64 goldens") {
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("n0") == 0x08b37c07b558d673ULL);
  CHECK(fnv1a64("n0") != fnv1a64("n1"));
}

TEST_CASE("tensor_from_seed determinism and seed sensitivity") {
  Tensor a = tensor_from_seed({1, 1, 1, 1}, 7);
  Tensor b = tensor_from_seed({1, 1, 1, 1}, 7);
  CHECK(a.data.size() == 1);
  CHECK(bits(a.data[0]) == bits(b.data[0]));

  Tensor c = tensor_from_seed({1, 3, 4, 4}, 0);
  Tensor d = tensor_from_seed({1, 3, 4, 4}, 1);
  CHECK(c.data != d.data);
}

TEST_CASE("tensor_from_seed golden checksums") {
  CHECK(checksum(tensor_from_seed({1, 3, 4, 4}, 0)) == 0x1aba44ee4eULL);
  Tensor t = tensor_from_seed({2, 8, 16, 16}, 42);
  CHECK(t.data.size() == 4096);
  CHECK(checksum(t) == 0x7eee215e16eULL);
}

TEST_CASE("channel_slice shapes and bounds") {
  Tensor t = tensor_from_seed({1, 64, 3, 3}, 5);
  Tensor head = channel_slice(t, 0, 16);
  CHECK(head.shape == Dims4{1, 16, 3, 3});

  Tensor all = channel_slice(t, 0, 64);
  CHECK(all.data == t.data);

  try {
    channel_slice(t, 8, 8);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::slice_error);
  }
  CHECK_THROWS_AS(channel_slice(t, -1, 4), Error);
  CHECK_THROWS_AS(channel_slice(t, 0, 65), Error);
}

TEST_CASE("slice/concat round-trip is bitwise") {
  Tensor t = tensor_from_seed({2, 13, 5, 7}, 99);
  for (std::int64_t k = 1; k < 13; ++k) {
    Tensor joined =
        concat_channels(channel_slice(t, 0, k), channel_slice(t, k, 13));
    CHECK(joined.shape == t.shape);
    CHECK(joined.data == t.data);
  }
}

TEST_CASE("concat_channels shape rules") {
  Tensor a = tensor_from_seed({1, 4, 8, 8}, 1);
  Tensor b = tensor_from_seed({1, 12, 8, 8}, 2);
  Tensor c = concat_channels(a, b);
  CHECK(c.shape == Dims4{1, 16, 8, 8});
  CHECK(c.at(0, 0, 0, 0) == a.at(0, 0, 0, 0));
  CHECK(c.at(0, 4, 0, 0) == b.at(0, 0, 0, 0));

  Tensor bad = tensor_from_seed({1, 12, 7, 8}, 3);
  try {
    concat_channels(a, bad);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::shape_mismatch);
  }
}

TEST_CASE("checksum sums bit patterns") {
  std::vector<float> v = {1.0f, 2.0f};
  std::vector<float> w = {2.0f, 1.0f};
  CHECK(checksum(v) == checksum(w));  // sum of bit patterns commutes
  CHECK(checksum(v) ==
        std::uint64_t(bits(1.0f)) + std::uint64_t(bits(2.0f)));
  CHECK(checksum(std::vector<float>{}) == 0);
}
