#include <random>

#include "doctest.h"
#include "uncseg/error.hpp"
#include "uncseg/mask.hpp"

using namespace uncseg;

namespace {

Mask random_mask(std::mt19937_64& rng, GridShape g, double density) {
  std::bernoulli_distribution coin(density);
  std::vector<int> idx;
  for (int i = 0; i < g.size(); ++i)
    if (coin(rng)) idx.push_back(i);
  return Mask(g, idx);
}

// Brute-force morphology straight from the definition.
std::vector<std::uint8_t> naive_dilate(const std::vector<std::uint8_t>& bits, GridShape g, int r) {
  std::vector<std::uint8_t> out(bits.size(), 0);
  for (int y = 0; y < g.rows; ++y)
    for (int x = 0; x < g.cols; ++x)
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          if (g.contains(y + dy, x + dx) && bits[g.index(y + dy, x + dx)]) out[g.index(y, x)] = 1;
  return out;
}

std::vector<std::uint8_t> naive_erode(const std::vector<std::uint8_t>& bits, GridShape g, int r) {
  std::vector<std::uint8_t> out(bits.size(), 0);
  for (int y = 0; y < g.rows; ++y)
    for (int x = 0; x < g.cols; ++x) {
      bool all = true;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          if (!g.contains(y + dy, x + dx) || !bits[g.index(y + dy, x + dx)]) all = false;
      out[g.index(y, x)] = all;
    }
  return out;
}

}  // namespace

TEST_CASE("mask construction normalizes and validates") {
  GridShape g{3, 4};
  Mask m(g, {5, 1, 5, 3});
  CHECK(m.size() == 3);
  CHECK(m.indices()[0] == 1);
  CHECK(m.contains(5));
  CHECK_FALSE(m.contains(2));
  CHECK(m.pixel(2).row == 1);
  CHECK(m.pixel(2).col == 1);
  CHECK_THROWS_AS(Mask(g, {12}), Error);
  CHECK_THROWS_AS(Mask(g, {-1}), Error);
}

TEST_CASE("set algebra") {
  GridShape g{2, 4};
  Mask a(g, {0, 1, 2, 3});
  Mask b(g, {2, 3, 4});
  CHECK(intersection_size(a, b) == 2);
  CHECK(mask_union(a, b).size() == 5);
  CHECK(mask_difference(a, b).same_pixels(Mask(g, {0, 1})));
  CHECK(mask_intersection(a, b).same_pixels(Mask(g, {2, 3})));
}

TEST_CASE("morphology matches brute force") {
  std::mt19937_64 rng(3);
  GridShape g{9, 11};
  for (int trial = 0; trial < 50; ++trial) {
    Mask m = random_mask(rng, g, 0.4 + 0.01 * trial);
    for (int r = 1; r <= 2; ++r) {
      CHECK(dilate(m, r).to_bitmap() == naive_dilate(m.to_bitmap(), g, r));
      CHECK(erode(m, r).to_bitmap() == naive_erode(m.to_bitmap(), g, r));
    }
  }
}

TEST_CASE("RLE hand examples") {
  GridShape g{2, 3};
  CHECK(encode_rle(Mask(g, {1, 2, 5})) == "1,2,2,1");
  CHECK(encode_rle(Mask(g, {})) == "6");
  CHECK(encode_rle(Mask::full(g)) == "0,6");
  CHECK(encode_rle(Mask(g, {0})) == "0,1,5");
  CHECK(decode_rle("1,2,2,1", g).same_pixels(Mask(g, {1, 2, 5})));
}

TEST_CASE("RLE rejects malformed input") {
  GridShape g{2, 3};
  CHECK_THROWS_AS(decode_rle("1,2", g), Error);
  CHECK_THROWS_AS(decode_rle("1,9", g), Error);
  CHECK_THROWS_AS(decode_rle("1,x,3", g), Error);
  CHECK_THROWS_AS(decode_rle("", g), Error);
  CHECK_THROWS_AS(decode_rle("1,-2,7", g), Error);
}

TEST_CASE("RLE round-trips 1000 random masks") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 30);
  std::uniform_real_distribution<double> dens(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    GridShape g{dim(rng), dim(rng)};
    Mask m = random_mask(rng, g, dens(rng));
    const std::string code = encode_rle(m);
    CHECK(decode_rle(code, g).same_pixels(m));
  }
}

TEST_CASE("mask source names round-trip") {
  for (auto s : {MaskSource::bottom_up, MaskSource::top_down, MaskSource::tracked})
    CHECK(mask_source_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(mask_source_from_string("sideways"), Error);
}
