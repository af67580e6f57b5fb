#pragma once

#include <optional>
#include <string>
#include <vector>

#include "privet/binomial.hpp"
#include "privet/evt.hpp"
#include "privet/knn.hpp"

namespace privet {

inline constexpr double kDefaultTau = -3.0;
inline constexpr double kDefaultDeltaPTau = -0.00115;

// pi_r = P[Bin(M, F(u_r)) >= r] at rank r (1-based) of a sorted NN set.
struct RankProbability {
  std::size_t rank = 0;
  double u = 0.0;
  double log10_pi = 0.0;
  double log10_complement = 0.0;  // log10(1 - pi_r)
  std::size_t query_row = 0;
  std::string reference_label;
};

std::vector<RankProbability> pi_scores(const TailFit& fit, const NNDistanceSet& distances,
                                       std::size_t M);

// log10(pi_train / pi_test); empty when both sides are -inf.
std::optional<double> delta_pi(double log10_pi_train, double log10_pi_test);
// log10((1 - pi_test) / (1 - pi_train)); empty when both pi are exactly 1.
std::optional<double> delta_pi_bar(double log10_complement_train, double log10_complement_test);

double expected_rank(const TailFit& fit, double u, std::size_t M);
// Largest r in [0, M] with P[Bin(M, F(u)) >= r] >= 1/2, by bisection.
std::size_t median_rank(const TailFit& fit, double u, std::size_t M);

struct ExcessCurves {
  // index r - 1 holds the value at rank r
  std::vector<long long> n_overfit;      // r - round(M F_train(u_r^train))
  std::vector<long long> n_excess_test;  // r - round(M F_test(u_r^test))
  std::vector<long long> n_pleaks;       // round(M F_test(u_r^test)) - round(M F_train(u_r^train))
};

ExcessCurves excess_curves(const TailFit& train_fit, const TailFit& test_fit,
                           const NNDistanceSet& d_str, const NNDistanceSet& d_ste);
ExcessCurves excess_curves(const TailFit& fit, const NNDistanceSet& d_str,
                           const NNDistanceSet& d_ste);

// Rank-corrected probabilities for one synthetic row, in log10.
struct CorrectedScore {
  double log10_p_train = 0.0;
  double log10_p_test = 0.0;
  std::optional<double> delta_p;
};

// Indexed by synthetic row. The train side uses the row's rank r in the
// synth-to-train ordering, the test side its rank r' in synth-to-test.
std::vector<CorrectedScore> corrected_scores(const TailFit& train_fit, const TailFit& test_fit,
                                             const NNDistanceSet& d_str,
                                             const NNDistanceSet& d_ste);
std::vector<CorrectedScore> corrected_scores(const TailFit& fit, const NNDistanceSet& d_str,
                                             const NNDistanceSet& d_ste);

struct SampleScore {
  std::size_t synth_row = 0;
  std::size_t rank_train = 0;  // 1-based
  std::size_t rank_test = 0;
  double nn_dist_train = 0.0;
  double nn_dist_test = 0.0;
  double log10_pi_train = 0.0;
  double log10_pi_test = 0.0;  // at the same rank as the train side
  std::optional<double> delta_pi;
  std::optional<double> delta_pi_bar;
  std::optional<double> delta_p;
  bool leak = false;
  std::optional<std::size_t> decimated_round;
};

// Per-row scores indexed by synthetic row; leak = delta_pi < tau.
std::vector<SampleScore> score_samples(const TailFit& train_fit, const TailFit& test_fit,
                                       const NNDistanceSet& d_str, const NNDistanceSet& d_ste,
                                       double tau = kDefaultTau);

struct DecimationResult {
  std::vector<SampleScore> samples;
  std::size_t rounds = 0;
};

// Removes the sample with the lowest delta_pi while it is below tau,
// rescoring the survivors after every removal.
DecimationResult decimate(const TailFit& train_fit, const TailFit& test_fit,
                          const NNDistanceSet& d_str, const NNDistanceSet& d_ste,
                          double tau = kDefaultTau);
DecimationResult decimate(const TailFit& fit, const NNDistanceSet& d_str,
                          const NNDistanceSet& d_ste, double tau = kDefaultTau);

// Flags the round(max_r n_pleaks(r)) rows closest to train.
std::vector<bool> pleaks_flags(const ExcessCurves& curves, const NNDistanceSet& d_str);

}  // namespace privet
