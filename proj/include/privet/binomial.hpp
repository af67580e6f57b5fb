#pragma once

#include <cmath>
#include <cstddef>

namespace privet {

// log(1 - exp(x)) for x <= 0.
inline double log1mexp(double x) {
  if (x > -0.6931471805599453) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

// log P[X >= r] and log P[X < r] for X ~ Bin(M, p).
struct BinomialTail {
  double log_upper;
  double log_lower;
};

// Both tails from log p and log(1 - p), which the caller may know more
// accurately than 1 - p itself. The tail not containing the mean is summed
// directly from the term nearest the mode; the other is its log-complement.
// Requires r <= M + 1 (r = 0 and r = M + 1 give the trivial tails).
BinomialTail binomial_tail(std::size_t M, std::size_t r, double log_p, double log_1mp);

// log P[X >= r], 1 <= r <= M, log_p <= 0.
double log_binomial_tail(std::size_t M, std::size_t r, double log_p);

// log of the Bin(M, p) probability mass at k, via the saddle-point form.
double log_binomial_pmf(std::size_t M, std::size_t k, double log_p, double log_1mp);

}  // namespace privet
