#include "privet/rng.hpp"

#include <cmath>
#include <numeric>

namespace privet {

double Xoshiro256::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view name) {
  std::uint64_t state = master ^ fnv1a64(name);
  return splitmix64(state);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view name, std::uint64_t index) {
  std::uint64_t state = derive_seed(master, name) ^ (index * 0xD1B54A32D192ED03ULL);
  return splitmix64(state);
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    Xoshiro256& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (k > n) k = n;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace privet
