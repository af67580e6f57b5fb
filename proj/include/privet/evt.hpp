#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "privet/knn.hpp"

namespace privet {

enum class Family { weibull, gumbel };
// Which families fit_tail may return; best picks the smaller NLL.
enum class FamilyChoice { best, weibull, gumbel };

// Objective on the tail window. truncated conditions every point on
// [a, b_q]; censored also uses how many points fall below a and above b_q,
// which pins the absolute level of F.
enum class Likelihood { censored, truncated };

const char* to_string(Family f);
const char* to_string(Likelihood l);
Likelihood likelihood_from_string(const std::string& s);
Family family_from_string(const std::string& s);
FamilyChoice family_choice_from_string(const std::string& s);

struct TailWindow {
  double a_frac = 0.01;
  double q_frac = 0.20;
};

// Window bounds resolved on a sorted sample. lo_rank and hi_rank are the
// 1-based order statistics used for the bounds (lo_rank 0 means lower = 0).
struct ResolvedWindow {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t lo_rank = 0;
  std::size_t hi_rank = 0;
  std::size_t first = 0;  // 0-based position of the first point in the sorted sample
  std::vector<double> points;
};

ResolvedWindow resolve_window(const Eigen::VectorXd& sorted, const TailWindow& window,
                              std::size_t min_points = 20);

// F(u) = 1 - exp(-H(u)) with cumulative hazard H(u) = A u^shape (Weibull)
// or A exp(shape u) (Gumbel). A is kept in log form since it routinely
// leaves the double range for large distances.
struct TailFit {
  Family family = Family::weibull;
  double log_A = 0.0;
  double shape = 1.0;
  TailWindow window;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t n_reference = 1;
  double nll = 0.0;
  std::size_t m = 0;
  std::size_t iterations = 0;
  Likelihood likelihood = Likelihood::censored;

  double A() const;
};

struct FitOptions {
  FamilyChoice family = FamilyChoice::best;
  Likelihood likelihood = Likelihood::censored;
  std::size_t max_iterations = 2000;
};

// Truncated maximum likelihood on the window of a sorted NN distance set.
TailFit fit_tail(const NNDistanceSet& distances, const TailWindow& window,
                 const FitOptions& options = {});
TailFit fit_tail(const Eigen::VectorXd& sorted, std::size_t n_reference,
                 const TailWindow& window, const FitOptions& options = {});

// Fit one family to points already restricted to [lower, upper]. The
// optional start (e.g. a previous fit) replaces the heuristic seeds.
TailFit fit_truncated(std::span<const double> points, double lower, double upper, Family family,
                      const std::optional<TailFit>& start = std::nullopt,
                      std::size_t max_iterations = 2000);

// -log L of the points under the fit conditioned on [lower, upper].
double truncated_nll(const TailFit& fit, std::span<const double> points, double lower,
                     double upper);

// Censored objective: -sum log f(u_i) - n_below log F(a) - n_above log S(b).
double censored_nll(const TailFit& fit, std::span<const double> points, double lower,
                    double upper, std::size_t n_below, std::size_t n_above);

double log_hazard(const TailFit& fit, double u);
double tail_cdf(const TailFit& fit, double u);
double tail_log_cdf(const TailFit& fit, double u);
double tail_log_sf(const TailFit& fit, double u);
double tail_density(const TailFit& fit, double u);
double tail_quantile(const TailFit& fit, double p);

// Quantile of the law conditioned on [lower, upper] at level v in [0, 1].
double truncated_quantile(const TailFit& fit, double lower, double upper, double v);
// Conditional CDF on [lower, upper], clamped to [0, 1].
double truncated_cdf(const TailFit& fit, double lower, double upper, double u);

// Same law for NN searches against n_target reference points: A scales by
// n_target / n_reference.
TailFit rescale_fit(const TailFit& fit, std::size_t n_target);

// Factor by which distances measured against n_target points must be
// divided to be read on the original Weibull fit, (n_reference/n_target)^(1/alpha).
double distance_rescale_factor(const TailFit& fit, std::size_t n_target);

}  // namespace privet
