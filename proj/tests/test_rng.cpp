#include <gtest/gtest.h>

#include <set>

#include "privet/rng.hpp"

using namespace privet;

TEST(Rng, SplitmixReferenceOutputs) {
  // first outputs of splitmix64 seeded with 0 and 1234567
  std::uint64_t s = 0;
  EXPECT_EQ(splitmix64(s), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(splitmix64(s), 0x6E789E6AA1B965F4ULL);
  s = 1234567;
  EXPECT_EQ(splitmix64(s), 6457827717110365317ULL);
  EXPECT_EQ(splitmix64(s), 3203168211198807973ULL);
}

TEST(Rng, StreamsAreReproducible) {
  Xoshiro256 a(99), b(99), c(100);
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
  }
}

TEST(Rng, DerivedSeedsDiffer) {
  std::set<std::uint64_t> seen;
  for (const char* name : {"split", "injection", "bootstrap", "grid"}) seen.insert(derive_seed(7, name));
  for (std::uint64_t j = 0; j < 50; ++j) seen.insert(derive_seed(7, "bootstrap", j));
  EXPECT_EQ(seen.size(), 54u);
  EXPECT_EQ(derive_seed(7, "split"), derive_seed(7, "split"));
}

TEST(Rng, UniformRanges) {
  Xoshiro256 rng(3);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform_open();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    ASSERT_LT(rng.below(7), 7u);
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.01);
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
  Xoshiro256 rng(1);
  const auto v = sample_without_replacement(100, 40, rng);
  EXPECT_EQ(v.size(), 40u);
  EXPECT_EQ(std::set<std::size_t>(v.begin(), v.end()).size(), 40u);
  EXPECT_TRUE(std::all_of(v.begin(), v.end(), [](std::size_t x) { return x < 100; }));
}
