#include "privet/orderstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "privet/error.hpp"

namespace privet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn10 = 2.302585092994045684;

void check_pair(const NNDistanceSet& d_str, const NNDistanceSet& d_ste) {
  if (d_str.n_query != d_ste.n_query)
    throw ValidationError("synth-to-train and synth-to-test sets differ in size");
}

// round(M F(u)) with F given in log form
long long rounded_rank(double log_f, std::size_t M) {
  return std::llround(static_cast<double>(M) * std::exp(log_f));
}

std::vector<long long> excess(const TailFit& fit, const NNDistanceSet& d, std::size_t M) {
  std::vector<long long> out(M);
  for (std::size_t k = 0; k < M; ++k)
    out[k] = static_cast<long long>(k + 1) -
             rounded_rank(tail_log_cdf(fit, d.distances[static_cast<Eigen::Index>(k)]), M);
  return out;
}

std::size_t corrected_rank(std::size_t r, const std::vector<long long>& n_excess, std::size_t M) {
  const long long prev = r >= 2 ? n_excess[r - 2] : 0;
  const long long k = static_cast<long long>(r) - prev;
  return static_cast<std::size_t>(std::clamp<long long>(k, 1, static_cast<long long>(M)));
}

}  // namespace

std::vector<RankProbability> pi_scores(const TailFit& fit, const NNDistanceSet& distances,
                                       std::size_t M) {
  if (M != distances.size() || M == 0)
    throw ValidationError("M must equal the number of query rows in the distance set");
  std::vector<RankProbability> out(M);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(M); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const double u = distances.distances[k];
    const BinomialTail t =
        binomial_tail(M, kk + 1, tail_log_cdf(fit, u), tail_log_sf(fit, u));
    RankProbability& rp = out[kk];
    rp.rank = kk + 1;
    rp.u = u;
    rp.log10_pi = t.log_upper / kLn10;
    rp.log10_complement = t.log_lower / kLn10;
    rp.query_row = distances.permutation[kk];
    rp.reference_label = distances.reference_label;
  }
  return out;
}

std::optional<double> delta_pi(double log10_pi_train, double log10_pi_test) {
  if (log10_pi_train == -kInf && log10_pi_test == -kInf) return std::nullopt;
  return log10_pi_train - log10_pi_test;
}

std::optional<double> delta_pi_bar(double log10_complement_train, double log10_complement_test) {
  if (log10_complement_train == -kInf && log10_complement_test == -kInf) return std::nullopt;
  return log10_complement_test - log10_complement_train;
}

double expected_rank(const TailFit& fit, double u, std::size_t M) {
  return static_cast<double>(M) * tail_cdf(fit, u);
}

std::size_t median_rank(const TailFit& fit, double u, std::size_t M) {
  const double lf = tail_log_cdf(fit, u), ls = tail_log_sf(fit, u);
  const double half = std::log(0.5);
  std::size_t lo = 0, hi = M + 1;
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (binomial_tail(M, mid, lf, ls).log_upper >= half)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

ExcessCurves excess_curves(const TailFit& train_fit, const TailFit& test_fit,
                           const NNDistanceSet& d_str, const NNDistanceSet& d_ste) {
  check_pair(d_str, d_ste);
  const std::size_t M = d_str.size();
  ExcessCurves c;
  c.n_overfit = excess(train_fit, d_str, M);
  c.n_excess_test = excess(test_fit, d_ste, M);
  c.n_pleaks.resize(M);
  for (std::size_t k = 0; k < M; ++k) c.n_pleaks[k] = c.n_overfit[k] - c.n_excess_test[k];
  return c;
}

ExcessCurves excess_curves(const TailFit& fit, const NNDistanceSet& d_str,
                           const NNDistanceSet& d_ste) {
  return excess_curves(fit, fit, d_str, d_ste);
}

std::vector<CorrectedScore> corrected_scores(const TailFit& train_fit, const TailFit& test_fit,
                                             const NNDistanceSet& d_str,
                                             const NNDistanceSet& d_ste) {
  check_pair(d_str, d_ste);
  const std::size_t M = d_str.size();
  const auto ex_tr = excess(train_fit, d_str, M);
  const auto ex_te = excess(test_fit, d_ste, M);
  std::vector<CorrectedScore> out(M);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(M); ++i) {
    const auto row = static_cast<std::size_t>(i);
    const std::size_t r = d_str.rank_of[row] + 1;
    const std::size_t rt = d_ste.rank_of[row] + 1;
    const double u = d_str.distances[static_cast<Eigen::Index>(r - 1)];
    const double ut = d_ste.distances[static_cast<Eigen::Index>(rt - 1)];
    const auto k = corrected_rank(r, ex_tr, M);
    const auto kt = corrected_rank(rt, ex_te, M);
    CorrectedScore& cs = out[row];
    cs.log10_p_train =
        binomial_tail(M, k, tail_log_cdf(train_fit, u), tail_log_sf(train_fit, u)).log_upper /
        kLn10;
    cs.log10_p_test =
        binomial_tail(M, kt, tail_log_cdf(test_fit, ut), tail_log_sf(test_fit, ut)).log_upper /
        kLn10;
    cs.delta_p = delta_pi(cs.log10_p_train, cs.log10_p_test);
  }
  return out;
}

std::vector<CorrectedScore> corrected_scores(const TailFit& fit, const NNDistanceSet& d_str,
                                             const NNDistanceSet& d_ste) {
  return corrected_scores(fit, fit, d_str, d_ste);
}

std::vector<SampleScore> score_samples(const TailFit& train_fit, const TailFit& test_fit,
                                       const NNDistanceSet& d_str, const NNDistanceSet& d_ste,
                                       double tau) {
  check_pair(d_str, d_ste);
  const std::size_t M = d_str.size();
  const auto pi_tr = pi_scores(train_fit, d_str, M);
  const auto pi_te = pi_scores(test_fit, d_ste, M);
  const auto corrected = corrected_scores(train_fit, test_fit, d_str, d_ste);
  std::vector<SampleScore> out(M);
  for (std::size_t k = 0; k < M; ++k) {
    const std::size_t row = d_str.permutation[k];
    SampleScore& s = out[row];
    s.synth_row = row;
    s.rank_train = k + 1;
    s.rank_test = d_ste.rank_of[row] + 1;
    s.nn_dist_train = d_str.distances[static_cast<Eigen::Index>(k)];
    s.nn_dist_test = d_ste.of_row(row);
    s.log10_pi_train = pi_tr[k].log10_pi;
    s.log10_pi_test = pi_te[k].log10_pi;
    s.delta_pi = delta_pi(pi_tr[k].log10_pi, pi_te[k].log10_pi);
    s.delta_pi_bar = delta_pi_bar(pi_tr[k].log10_complement, pi_te[k].log10_complement);
    s.delta_p = corrected[row].delta_p;
    s.leak = s.delta_pi && *s.delta_pi < tau;
  }
  return out;
}

DecimationResult decimate(const TailFit& train_fit, const TailFit& test_fit,
                          const NNDistanceSet& d_str, const NNDistanceSet& d_ste, double tau) {
  check_pair(d_str, d_ste);
  const std::size_t M = d_str.size();
  DecimationResult res;
  res.samples = score_samples(train_fit, test_fit, d_str, d_ste, tau);

  // F does not change between rounds, only M and the ranks do.
  std::vector<double> lf_tr(M), ls_tr(M), lf_te(M), ls_te(M);
  for (std::size_t row = 0; row < M; ++row) {
    lf_tr[row] = tail_log_cdf(train_fit, d_str.of_row(row));
    ls_tr[row] = tail_log_sf(train_fit, d_str.of_row(row));
    lf_te[row] = tail_log_cdf(test_fit, d_ste.of_row(row));
    ls_te[row] = tail_log_sf(test_fit, d_ste.of_row(row));
  }
  std::vector<bool> alive(M, true);
  std::vector<std::size_t> seq_tr, seq_te;
  std::vector<double> l_tr, l_te, lc_tr, lc_te;

  for (;;) {
    seq_tr.clear();
    seq_te.clear();
    for (std::size_t k = 0; k < M; ++k) {
      if (alive[d_str.permutation[k]]) seq_tr.push_back(d_str.permutation[k]);
      if (alive[d_ste.permutation[k]]) seq_te.push_back(d_ste.permutation[k]);
    }
    const std::size_t m = seq_tr.size();
    if (m == 0) break;
    l_tr.assign(m, 0.0);
    l_te.assign(m, 0.0);
    lc_tr.assign(m, 0.0);
    lc_te.assign(m, 0.0);
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(m); ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const std::size_t a = seq_tr[kk], b = seq_te[kk];
      const BinomialTail ta = binomial_tail(m, kk + 1, lf_tr[a], ls_tr[a]);
      const BinomialTail tb = binomial_tail(m, kk + 1, lf_te[b], ls_te[b]);
      l_tr[kk] = ta.log_upper / kLn10;
      lc_tr[kk] = ta.log_lower / kLn10;
      l_te[kk] = tb.log_upper / kLn10;
      lc_te[kk] = tb.log_lower / kLn10;
    }
    std::size_t worst = m;
    double worst_val = kInf;
    for (std::size_t k = 0; k < m; ++k) {
      const auto d = delta_pi(l_tr[k], l_te[k]);
      if (d && *d < worst_val) {
        worst_val = *d;
        worst = k;
      }
    }
    const bool remove = worst < m && worst_val < tau;
    if (!remove) {
      // fixed point: record the survivors' final scores
      for (std::size_t k = 0; k < m; ++k) {
        SampleScore& s = res.samples[seq_tr[k]];
        s.log10_pi_train = l_tr[k];
        s.log10_pi_test = l_te[k];
        s.delta_pi = delta_pi(l_tr[k], l_te[k]);
        s.delta_pi_bar = delta_pi_bar(lc_tr[k], lc_te[k]);
        s.leak = false;
        s.decimated_round.reset();
      }
      break;
    }
    ++res.rounds;
    const std::size_t row = seq_tr[worst];
    SampleScore& s = res.samples[row];
    s.log10_pi_train = l_tr[worst];
    s.log10_pi_test = l_te[worst];
    s.delta_pi = worst_val;
    s.delta_pi_bar = delta_pi_bar(lc_tr[worst], lc_te[worst]);
    s.leak = true;
    s.decimated_round = res.rounds;
    alive[row] = false;
  }
  return res;
}

DecimationResult decimate(const TailFit& fit, const NNDistanceSet& d_str,
                          const NNDistanceSet& d_ste, double tau) {
  return decimate(fit, fit, d_str, d_ste, tau);
}

std::vector<bool> pleaks_flags(const ExcessCurves& curves, const NNDistanceSet& d_str) {
  long long k = 0;
  for (long long v : curves.n_pleaks) k = std::max(k, v);
  std::vector<bool> flags(d_str.size(), false);
  for (long long i = 0; i < k && i < static_cast<long long>(d_str.size()); ++i)
    flags[d_str.permutation[static_cast<std::size_t>(i)]] = true;
  return flags;
}

}  // namespace privet
