#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "privet/data.hpp"
#include "privet/evt.hpp"
#include "privet/knn.hpp"

namespace privet {

struct PitResult {
  double q_frac = 0.0;
  double lower = 0.0, upper = 0.0;
  std::vector<double> pit_values;  // ascending, one per in-window point
  double ks_stat = 0.0;
  std::size_t m = 0;
};

// Kolmogorov-Smirnov distance of ascending values in [0, 1] to Uniform[0, 1].
double ks_uniform(std::span<const double> sorted_values);

// PIT of the in-window distances under the truncated fitted law.
PitResult pit(const TailFit& fit, const NNDistanceSet& distances, const TailWindow& window);
PitResult pit(const TailFit& fit, std::span<const double> points, double lower, double upper);

// Empirical CDF of ascending values evaluated on grid.
std::vector<double> ecdf_on_grid(std::span<const double> sorted_values,
                                 std::span<const double> grid);

std::vector<double> unit_grid(std::size_t n = 101);

struct PpRibbon {
  std::vector<double> q_values;
  std::vector<double> grid;
  std::vector<std::vector<double>> curves;  // one per q, on grid
  std::vector<double> lower, upper;         // pointwise envelope
  std::vector<TailFit> fits;
};

// Each q is refit on its own window. The default refit is the truncated
// likelihood: the ribbon checks the conditional shape inside the window.
PpRibbon pp_ribbon(const NNDistanceSet& distances, double q_min = 0.10, double q_max = 0.30,
                   std::size_t n_q = 9, double a_frac = TailWindow{}.a_frac,
                   const FitOptions& options = {FamilyChoice::best, Likelihood::truncated},
                   std::size_t grid_size = 101);

struct BootstrapBand {
  std::size_t n_bootstrap = 0;
  std::size_t m = 0;
  double observed = 0.0;        // KS of the window refit with the bootstrap likelihood
  double critical_value = 0.0;  // 95th percentile of replicate statistics
  double mc_p_value = 1.0;
  std::vector<double> replicate_stats;
  std::size_t failures = 0;
};

// Parametric bootstrap: each replicate draws m points from the truncated
// fit, refits on [lower, upper] with the truncated likelihood and records
// the PIT KS statistic. The observed statistic is computed the same way on
// the real window so both sides share one estimator.
BootstrapBand bootstrap_ks_band(const TailFit& fit, std::span<const double> points, double lower,
                                double upper, std::size_t n_bootstrap = 200,
                                std::uint64_t seed = 0);
BootstrapBand bootstrap_ks_band(const TailFit& fit, const NNDistanceSet& distances,
                                const TailWindow& window, std::size_t n_bootstrap = 200,
                                std::uint64_t seed = 0);

// m draws from the fit restricted to [lower, upper], ascending.
std::vector<double> sample_truncated(const TailFit& fit, double lower, double upper,
                                     std::size_t m, std::uint64_t seed);

struct SplitConsistency {
  std::vector<double> grid;
  std::vector<std::vector<double>> curves;  // PIT eCDF of the held-out half, per split
  std::vector<double> median, lower, upper;
  std::vector<std::size_t> m;               // held-out points per split
};

// Fit on one random half (self-excluded NN), freeze, PIT the other half.
SplitConsistency split_consistency(const DataMatrix& train, Metric metric,
                                   const TailWindow& window, std::size_t n_splits,
                                   std::uint64_t seed, const FitOptions& options = {},
                                   std::size_t grid_size = 101);

// P-P plot: diagonal, ribbon envelope, reference curve and +-critical band.
std::string pp_svg(const PpRibbon& ribbon, const std::vector<double>& reference_curve,
                   double critical_value, const std::string& title);

// Long-format plot data: curve,x,y.
std::string pp_csv(const PpRibbon& ribbon, const std::vector<double>& reference_curve,
                   double critical_value);

}  // namespace privet
