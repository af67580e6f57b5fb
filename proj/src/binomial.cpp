#include "privet/binomial.hpp"

#include <limits>

#include "privet/error.hpp"

namespace privet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(n!) - log(sqrt(2 pi n) (n/e)^n)
double stirlerr(double n) {
  static constexpr double table[16] = {
      0.0,
      0.08106146679532725821967026,
      0.04134069595540929409382208,
      0.02767792568499833914878929,
      0.02079067210376509311152277,
      0.01664469118982119216319487,
      0.01387612882307074799874573,
      0.01189670994589177009505572,
      0.01041126526197209649747857,
      0.009255462182712732917728637,
      0.008330563433362871256469319,
      0.007573675487951840794972024,
      0.006942840107209529865664153,
      0.006408994188004207068439631,
      0.005951370112758847735624416,
      0.00555473355196280137103869,
  };
  constexpr double S0 = 1.0 / 12, S1 = 1.0 / 360, S2 = 1.0 / 1260, S3 = 1.0 / 1680,
                   S4 = 1.0 / 1188;
  if (n <= 15.0) return table[static_cast<int>(n)];
  const double nn = n * n;
  if (n > 500) return (S0 - S1 / nn) / n;
  if (n > 80) return (S0 - (S1 - S2 / nn) / nn) / n;
  if (n > 35) return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n;
  return (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n;
}

// Deviance term x log(x / np) + np - x, with np also given in log form so
// that an underflowed np does not matter.
double bd0(double x, double np, double log_np) {
  if (np > 0.0 && std::abs(x - np) < 0.1 * (x + np)) {
    double v = (x - np) / (x + np);
    double s = (x - np) * v;
    double ej = 2.0 * x * v;
    v *= v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v;
      const double s1 = s + ej / (2 * j + 1);
      if (s1 == s) return s1;
      s = s1;
    }
    return s;
  }
  return x * (std::log(x) - log_np) + np - x;
}

}  // namespace

double log_binomial_pmf(std::size_t M, std::size_t k, double log_p, double log_1mp) {
  if (k > M) return -kInf;
  const double n = static_cast<double>(M), x = static_cast<double>(k);
  if (k == 0) return M == 0 ? 0.0 : n * log_1mp;
  if (k == M) return n * log_p;
  if (log_p == -kInf || log_1mp == -kInf) return -kInf;
  const double log_n = std::log(n);
  const double lnp = log_n + log_p, lnq = log_n + log_1mp;
  const double lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) -
                    bd0(x, std::exp(lnp), lnp) - bd0(n - x, std::exp(lnq), lnq);
  const double lf = std::log(2.0 * M_PI) + std::log(x) + std::log1p(-x / n);
  return lc - 0.5 * lf;
}

BinomialTail binomial_tail(std::size_t M, std::size_t r, double log_p, double log_1mp) {
  if (r > M + 1) throw ValidationError("rank exceeds M + 1");
  if (r == 0) return {0.0, -kInf};
  if (r == M + 1) return {-kInf, 0.0};
  if (log_p == -kInf) return {-kInf, 0.0};
  if (log_1mp == -kInf) return {0.0, -kInf};

  const double n = static_cast<double>(M);
  const double mean = n * std::exp(log_p);
  const double rr = static_cast<double>(r);
  constexpr double kStop = 1e-18;

  if (rr > mean) {
    // upper tail, terms nonincreasing from k = r
    const double ratio_pq = std::exp(log_p - log_1mp);
    double s = 1.0, t = 1.0;
    for (std::size_t k = r; k < M; ++k) {
      t *= static_cast<double>(M - k) / static_cast<double>(k + 1) * ratio_pq;
      s += t;
      if (t < kStop * s) break;
    }
    const double up = log_binomial_pmf(M, r, log_p, log_1mp) + std::log(s);
    return {std::min(up, 0.0), log1mexp(std::min(up, 0.0))};
  }
  // lower tail P[X <= r-1], terms nonincreasing going down from k = r-1
  const double ratio_qp = std::exp(log_1mp - log_p);
  double s = 1.0, t = 1.0;
  for (std::size_t k = r - 1; k > 0; --k) {
    t *= static_cast<double>(k) / static_cast<double>(M - k + 1) * ratio_qp;
    s += t;
    if (t < kStop * s) break;
  }
  const double lo = log_binomial_pmf(M, r - 1, log_p, log_1mp) + std::log(s);
  return {log1mexp(std::min(lo, 0.0)), std::min(lo, 0.0)};
}

double log_binomial_tail(std::size_t M, std::size_t r, double log_p) {
  if (r < 1 || r > M) throw ValidationError("rank must satisfy 1 <= r <= M");
  if (!(log_p <= 0.0)) throw ValidationError("log_p must be <= 0");
  return binomial_tail(M, r, log_p, log1mexp(log_p)).log_upper;
}

}  // namespace privet
