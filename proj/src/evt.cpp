#include "privet/evt.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "privet/error.hpp"

namespace privet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Both families are a minimum-Gumbel law in x = log u (Weibull) or x = u
// (Gumbel) with location mu and scale sigma = exp(tau):
// H = exp((x - mu) / sigma). The optimizer works on standardized
// coordinates mu' = (mu - c) / s, tau' = tau - log s.
struct Problem {
  Family family;
  std::vector<double> x;
  double xa = -kInf;  // -inf when the lower bound is 0 for Weibull
  double xb = 0.0;
  double jacobian = 0.0;  // sum log u for Weibull
  double c = 0.0, s = 1.0;
  Likelihood likelihood = Likelihood::truncated;
  double n_below = 0.0, n_above = 0.0;  // censored counts outside [a, b]

  double to_x(double u) const {
    if (family == Family::gumbel) return u;
    return u > 0.0 ? std::log(u) : -kInf;
  }

  Problem(std::span<const double> points, double lower, double upper, Family fam,
          Likelihood lik = Likelihood::truncated, double below = 0.0, double above = 0.0)
      : family(fam), likelihood(lik), n_below(below), n_above(above) {
    x.reserve(points.size());
    for (double u : points) x.push_back(to_x(u));
    if (family == Family::weibull) jacobian = std::accumulate(x.begin(), x.end(), 0.0);
    xa = to_x(lower);
    xb = to_x(upper);
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    c = 0.5 * (*lo + *hi);
    s = std::max(0.5 * (*hi - *lo), 1e-300);
  }

  std::array<double, 2> natural(const Eigen::Vector2d& t) const {
    return {c + s * t[0], t[1] + std::log(s)};
  }

  // NLL and gradient in natural coordinates (mu, tau).
  double eval(double mu, double tau, Eigen::Vector2d* grad) const {
    const double sigma = std::exp(tau);
    const double m = static_cast<double>(x.size());
    double sum = 0.0, g_mu = 0.0, g_tau = 0.0;
    for (double xi : x) {
      const double z = (xi - mu) / sigma;
      const double ez = std::exp(z);
      sum += z - ez;
      if (grad) {
        g_mu += (ez - 1.0) * (-1.0 / sigma);
        g_tau += (ez - 1.0) * (-z);
      }
    }
    const double zb = (xb - mu) / sigma;
    const double hb = std::exp(zb);
    double ha = 0.0, za = 0.0;
    if (xa > -kInf) {
      za = (xa - mu) / sigma;
      ha = std::exp(za);
    }
    double nll = -sum + m * tau + jacobian;
    // coefficients of dz_a/dtheta and dz_b/dtheta in the gradient
    double ca = 0.0, cb = 0.0;
    if (likelihood == Likelihood::truncated) {
      const double den = -std::expm1(-(hb - ha));
      nll += m * (-ha + std::log(den));
      const double e = std::exp(-(hb - ha));
      ca = -m * ha / den;
      cb = m * hb * e / den;
    } else {
      if (n_below > 0.0) {
        // log F(a) = log(1 - exp(-H_a)); d/dz_a = H_a / expm1(H_a)
        const double log_fa = xa == -kInf ? -kInf
                              : ha < 1e-5  ? za + std::log1p(-0.5 * ha)
                                           : std::log(-std::expm1(-ha));
        nll -= n_below * log_fa;
        ca = ha < 1e-5 ? -n_below : -n_below * ha / std::expm1(ha);
      }
      nll += n_above * hb;
      cb = n_above * hb;
    }
    if (grad) {
      // dz/dmu = -1/sigma, dz/dtau = -z
      g_mu += (ca + cb) * (-1.0 / sigma);
      g_tau += m + (xa > -kInf ? ca * (-za) : 0.0) + cb * (-zb);
      (*grad)[0] = g_mu;
      (*grad)[1] = g_tau;
    }
    return std::isfinite(nll) ? nll : kInf;
  }

  double f(const Eigen::Vector2d& t) const {
    const auto [mu, tau] = natural(t);
    return eval(mu, tau, nullptr);
  }

  double fg(const Eigen::Vector2d& t, Eigen::Vector2d& g) const {
    const auto [mu, tau] = natural(t);
    Eigen::Vector2d gn;
    const double v = eval(mu, tau, &gn);
    g[0] = gn[0] * s;
    g[1] = gn[1];
    return v;
  }
};

struct Optimum {
  Eigen::Vector2d t;
  double value = kInf;
  bool converged = false;
  std::size_t iterations = 0;
};

Optimum nelder_mead(const Problem& p, const Eigen::Vector2d& start, std::size_t max_iter) {
  std::array<Eigen::Vector2d, 3> v{start, start + Eigen::Vector2d(0.2, 0.0),
                                   start + Eigen::Vector2d(0.0, 0.2)};
  std::array<double, 3> fv{};
  for (int i = 0; i < 3; ++i) fv[i] = p.f(v[i]);
  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    std::array<int, 3> o{0, 1, 2};
    std::sort(o.begin(), o.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const int b = o[0], m = o[1], w = o[2];
    if (std::isfinite(fv[w]) && fv[w] - fv[b] <= 1e-13 * (1.0 + std::abs(fv[b])) &&
        (v[w] - v[b]).norm() <= 1e-9)
      break;
    const Eigen::Vector2d cen = 0.5 * (v[b] + v[m]);
    const Eigen::Vector2d xr = cen + (cen - v[w]);
    const double fr = p.f(xr);
    if (fr < fv[b]) {
      const Eigen::Vector2d xe = cen + 2.0 * (cen - v[w]);
      const double fe = p.f(xe);
      if (fe < fr) {
        v[w] = xe;
        fv[w] = fe;
      } else {
        v[w] = xr;
        fv[w] = fr;
      }
    } else if (fr < fv[m]) {
      v[w] = xr;
      fv[w] = fr;
    } else {
      const bool outside = fr < fv[w];
      const Eigen::Vector2d xc = outside ? Eigen::Vector2d(cen + 0.5 * (xr - cen))
                                         : Eigen::Vector2d(cen + 0.5 * (v[w] - cen));
      const double fc = p.f(xc);
      if (fc < (outside ? fr : fv[w])) {
        v[w] = xc;
        fv[w] = fc;
      } else {
        for (int i : {m, w}) {
          v[i] = v[b] + 0.5 * (v[i] - v[b]);
          fv[i] = p.f(v[i]);
        }
      }
    }
  }
  const int b = static_cast<int>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return {v[b], fv[b], false, it};
}

// Newton iterations with a finite-difference Hessian of the analytic
// gradient and backtracking; falls back to gradient steps when the Hessian
// is not positive definite.
Optimum polish(const Problem& p, Optimum o, std::size_t max_iter) {
  Eigen::Vector2d g;
  double fx = p.fg(o.t, g);
  if (!std::isfinite(fx)) return o;
  for (std::size_t it = 0; it < max_iter; ++it) {
    ++o.iterations;
    if (g.norm() <= 1e-8) {
      o.converged = true;
      break;
    }
    Eigen::Matrix2d hess;
    const double h = 1e-5;
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d e = Eigen::Vector2d::Zero();
      e[k] = h;
      Eigen::Vector2d gp, gm;
      p.fg(o.t + e, gp);
      p.fg(o.t - e, gm);
      hess.col(k) = (gp - gm) / (2.0 * h);
    }
    hess = 0.5 * (hess + hess.transpose()).eval();
    Eigen::Vector2d step;
    Eigen::LLT<Eigen::Matrix2d> llt(hess);
    if (llt.info() == Eigen::Success && hess.allFinite())
      step = -llt.solve(g);
    else
      step = -g / std::max(1.0, g.norm());
    double lambda = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::Vector2d cand = o.t + lambda * step;
      Eigen::Vector2d gc;
      const double fc = p.fg(cand, gc);
      if (std::isfinite(fc) && fc <= fx + 1e-4 * lambda * g.dot(step) + 1e-12 * std::abs(fx)) {
        const double step_norm = (lambda * step).norm();
        o.t = cand;
        fx = fc;
        g = gc;
        moved = true;
        if (step_norm <= 1e-10) o.converged = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!moved) {
      // no decrease possible: at a minimum to working precision
      o.converged = (lambda * step).norm() <= 1e-10 || g.norm() <= 1e-6;
      break;
    }
    if (o.converged) break;
  }
  o.value = fx;
  return o;
}

TailFit to_fit(const Problem& p, const Eigen::Vector2d& t, Family family) {
  const auto [mu, tau] = p.natural(t);
  const double sigma = std::exp(tau);
  TailFit f;
  f.family = family;
  f.shape = 1.0 / sigma;
  f.log_A = -mu / sigma;
  return f;
}

Eigen::Vector2d from_fit(const Problem& p, const TailFit& f) {
  const double sigma = 1.0 / f.shape;
  const double mu = -f.log_A * sigma;
  return {(mu - p.c) / p.s, std::log(sigma) - std::log(p.s)};
}

// Heuristic starting points in natural coordinates.
std::vector<std::array<double, 2>> seeds(const Problem& p,
                                         std::span<const double> plotting_positions) {
  std::vector<std::array<double, 2>> out;
  const auto n = static_cast<double>(p.x.size());
  // x = mu + sigma y with y = log(-log(1 - F)) on the plotting positions.
  if (plotting_positions.size() == p.x.size()) {
    double sy = 0, sx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < p.x.size(); ++i) {
      const double y = std::log(-std::log1p(-plotting_positions[i]));
      sy += y;
      sx += p.x[i];
      syy += y * y;
      sxy += y * p.x[i];
    }
    const double var = syy - sy * sy / n;
    if (var > 0) {
      const double sigma = (sxy - sx * sy / n) / var;
      if (sigma > 0 && std::isfinite(sigma)) {
        const double mu = (sx - sigma * sy) / n;
        out.push_back({mu, std::log(sigma)});
        out.push_back({mu, std::log(2.0 * sigma)});
      }
    }
  }
  // Moment matching for the minimum-Gumbel law in x, ignoring truncation.
  const double mean = std::accumulate(p.x.begin(), p.x.end(), 0.0) / n;
  double ss = 0;
  for (double xi : p.x) ss += (xi - mean) * (xi - mean);
  const double sd = std::sqrt(ss / std::max(1.0, n - 1.0));
  const double sigma = std::max(sd * std::sqrt(6.0) / M_PI, 1e-12 * p.s);
  out.push_back({mean + 0.5772156649015329 * sigma, std::log(sigma)});
  // Upper bound at a moderate quantile with a wide scale.
  out.push_back({p.xb + p.s, std::log(p.s)});
  return out;
}

TailFit run_fit(const Problem& p, Family family, std::span<const double> plotting_positions,
                const std::optional<TailFit>& start, std::size_t max_iter) {
  std::vector<Eigen::Vector2d> starts;
  if (start) {
    starts.push_back(from_fit(p, *start));
  } else {
    for (const auto& [mu, tau] : seeds(p, plotting_positions))
      starts.emplace_back((mu - p.c) / p.s, tau - std::log(p.s));
  }
  Optimum best;
  bool any_converged = false;
  for (const auto& s0 : starts) {
    if (!std::isfinite(p.f(s0))) continue;
    Optimum o = nelder_mead(p, s0, max_iter);
    o = polish(p, o, 100);
    if (!std::isfinite(o.value)) continue;
    const bool better = o.converged && (!any_converged || o.value < best.value);
    if (better || (!any_converged && o.value < best.value)) {
      best = o;
      any_converged = any_converged || o.converged;
    }
  }
  if (!std::isfinite(best.value))
    throw NumericalError(std::string("tail fit failed: no finite likelihood for ") +
                         to_string(family));
  if (!any_converged)
    throw NumericalError(std::string("tail fit did not converge for ") + to_string(family));
  TailFit f = to_fit(p, best.t, family);
  f.nll = best.value;
  f.iterations = best.iterations;
  return f;
}

}  // namespace

const char* to_string(Family f) { return f == Family::weibull ? "weibull" : "gumbel"; }

Family family_from_string(const std::string& s) {
  if (s == "weibull") return Family::weibull;
  if (s == "gumbel") return Family::gumbel;
  throw ValidationError("unknown family '" + s + "'");
}

FamilyChoice family_choice_from_string(const std::string& s) {
  if (s == "best" || s == "auto") return FamilyChoice::best;
  if (s == "weibull") return FamilyChoice::weibull;
  if (s == "gumbel") return FamilyChoice::gumbel;
  throw ValidationError("unknown family choice '" + s + "' (expected best, weibull or gumbel)");
}

double TailFit::A() const { return std::exp(log_A); }

ResolvedWindow resolve_window(const Eigen::VectorXd& sorted, const TailWindow& window,
                              std::size_t min_points) {
  if (!(window.a_frac >= 0.0 && window.a_frac < window.q_frac && window.q_frac <= 1.0))
    throw ValidationError("tail window needs 0 <= a_frac < q_frac <= 1");
  const auto n = static_cast<std::size_t>(sorted.size());
  if (n == 0) throw ValidationError("empty distance set");
  ResolvedWindow w;
  w.lo_rank = static_cast<std::size_t>(std::floor(window.a_frac * static_cast<double>(n) + 1e-9));
  w.hi_rank = static_cast<std::size_t>(std::floor(window.q_frac * static_cast<double>(n) + 1e-9));
  if (w.hi_rank == 0) throw ValidationError("tail window too small: upper rank is 0");
  w.lower = w.lo_rank ? sorted[static_cast<Eigen::Index>(w.lo_rank - 1)] : 0.0;
  w.upper = sorted[static_cast<Eigen::Index>(w.hi_rank - 1)];
  if (!(w.lower < w.upper))
    throw ValidationError("degenerate tail window: distances are all equal in [a, b_q]");
  std::size_t k = 0;
  while (k < n && !(sorted[static_cast<Eigen::Index>(k)] >= w.lower &&
                    sorted[static_cast<Eigen::Index>(k)] > 0.0))
    ++k;
  w.first = k;
  for (; k < n && sorted[static_cast<Eigen::Index>(k)] <= w.upper; ++k)
    w.points.push_back(sorted[static_cast<Eigen::Index>(k)]);
  if (w.points.size() < min_points)
    throw ValidationError("tail window too small: " + std::to_string(w.points.size()) +
                          " points, need " + std::to_string(min_points));
  return w;
}

TailFit fit_tail(const NNDistanceSet& distances, const TailWindow& window,
                 const FitOptions& options) {
  return fit_tail(distances.distances, distances.effective_reference(), window, options);
}

TailFit fit_tail(const Eigen::VectorXd& sorted, std::size_t n_reference,
                 const TailWindow& window, const FitOptions& options) {
  const ResolvedWindow w = resolve_window(sorted, window);
  const auto n = static_cast<double>(sorted.size());
  const std::size_t m = w.points.size();
  std::size_t n_below = 0;  // positive distances below the window; zeros are left out
  for (std::size_t k = 0; k < w.first; ++k)
    if (sorted[static_cast<Eigen::Index>(k)] > 0.0) ++n_below;
  std::vector<double> pp(w.points.size());
  for (std::size_t i = 0; i < pp.size(); ++i)
    pp[i] = (static_cast<double>(w.first + i) + 0.5) / n;

  std::vector<Family> families;
  if (options.family != FamilyChoice::gumbel) families.push_back(Family::weibull);
  if (options.family != FamilyChoice::weibull) families.push_back(Family::gumbel);

  std::optional<TailFit> best;
  std::string failure;
  for (Family fam : families) {
    try {
      const Problem p(w.points, w.lower, w.upper, fam, options.likelihood,
                      static_cast<double>(n_below),
                      static_cast<double>(sorted.size()) - static_cast<double>(w.first + m));
      TailFit f = run_fit(p, fam, pp, std::nullopt, options.max_iterations);
      f.likelihood = options.likelihood;
      if (!best || f.nll < best->nll) best = f;
    } catch (const NumericalError& e) {
      failure = e.what();
    }
  }
  if (!best) throw NumericalError(failure);
  best->window = window;
  best->lower = w.lower;
  best->upper = w.upper;
  best->n_reference = n_reference;
  best->m = w.points.size();
  return *best;
}

TailFit fit_truncated(std::span<const double> points, double lower, double upper, Family family,
                      const std::optional<TailFit>& start, std::size_t max_iterations) {
  if (points.size() < 2) throw ValidationError("need at least two points to fit");
  if (!(lower < upper)) throw ValidationError("fit bounds must satisfy lower < upper");
  const Problem p(points, lower, upper, family);
  TailFit f = run_fit(p, family, {}, start, max_iterations);
  f.likelihood = Likelihood::truncated;
  f.lower = lower;
  f.upper = upper;
  f.m = points.size();
  if (start) {
    f.window = start->window;
    f.n_reference = start->n_reference;
  }
  return f;
}

double truncated_nll(const TailFit& fit, std::span<const double> points, double lower,
                     double upper) {
  const Problem p(points, lower, upper, fit.family, Likelihood::truncated);
  const double sigma = 1.0 / fit.shape;
  return p.eval(-fit.log_A * sigma, std::log(sigma), nullptr);
}

double censored_nll(const TailFit& fit, std::span<const double> points, double lower,
                    double upper, std::size_t n_below, std::size_t n_above) {
  const Problem p(points, lower, upper, fit.family, Likelihood::censored,
                  static_cast<double>(n_below), static_cast<double>(n_above));
  const double sigma = 1.0 / fit.shape;
  return p.eval(-fit.log_A * sigma, std::log(sigma), nullptr);
}

const char* to_string(Likelihood l) { return l == Likelihood::censored ? "censored" : "truncated"; }

Likelihood likelihood_from_string(const std::string& s) {
  if (s == "censored") return Likelihood::censored;
  if (s == "truncated") return Likelihood::truncated;
  throw ValidationError("unknown likelihood '" + s + "' (expected censored or truncated)");
}

double log_hazard(const TailFit& fit, double u) {
  if (fit.family == Family::weibull) {
    if (u <= 0.0) return -kInf;
    return fit.log_A + fit.shape * std::log(u);
  }
  return fit.log_A + fit.shape * u;
}

double tail_cdf(const TailFit& fit, double u) {
  const double h = std::exp(log_hazard(fit, u));
  return std::clamp(-std::expm1(-h), 0.0, 1.0);
}

double tail_log_cdf(const TailFit& fit, double u) {
  const double lh = log_hazard(fit, u);
  if (lh == -kInf) return -kInf;
  const double h = std::exp(lh);
  if (h < 1e-5) return lh + std::log1p(-h / 2.0 + h * h / 6.0);
  return std::log(-std::expm1(-h));
}

double tail_log_sf(const TailFit& fit, double u) { return -std::exp(log_hazard(fit, u)); }

double tail_density(const TailFit& fit, double u) {
  const double lh = log_hazard(fit, u);
  if (lh == -kInf) return 0.0;
  const double h = std::exp(lh);
  const double dlh = fit.family == Family::weibull ? fit.shape / u : fit.shape;
  return dlh * h * std::exp(-h);
}

namespace {

double u_from_log_hazard(const TailFit& fit, double lh) {
  if (fit.family == Family::weibull) return std::exp((lh - fit.log_A) / fit.shape);
  return (lh - fit.log_A) / fit.shape;
}

}  // namespace

double tail_quantile(const TailFit& fit, double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("quantile level must lie in (0, 1)");
  return u_from_log_hazard(fit, std::log(-std::log1p(-p)));
}

double truncated_quantile(const TailFit& fit, double lower, double upper, double v) {
  v = std::clamp(v, 0.0, 1.0);
  const double ha = std::exp(log_hazard(fit, lower));
  const double hb = std::exp(log_hazard(fit, upper));
  // S(u) = S(a) - v (S(a) - S(b))  =>  H(u) = H_a - log1p(v expm1(-(H_b - H_a)))
  const double h = ha - std::log1p(v * std::expm1(-(hb - ha)));
  if (h <= 0.0) return lower;
  return std::clamp(u_from_log_hazard(fit, std::log(h)), lower, upper);
}

double truncated_cdf(const TailFit& fit, double lower, double upper, double u) {
  if (u <= lower) return 0.0;
  if (u >= upper) return 1.0;
  const double ha = std::exp(log_hazard(fit, lower));
  const double hb = std::exp(log_hazard(fit, upper));
  const double hu = std::exp(log_hazard(fit, u));
  const double v = std::expm1(-(hu - ha)) / std::expm1(-(hb - ha));
  return std::clamp(v, 0.0, 1.0);
}

TailFit rescale_fit(const TailFit& fit, std::size_t n_target) {
  if (n_target == 0) throw ValidationError("rescale target must be at least 1");
  TailFit out = fit;
  out.log_A = fit.log_A + (std::log(static_cast<double>(n_target)) -
                           std::log(static_cast<double>(fit.n_reference)));
  out.n_reference = n_target;
  return out;
}

double distance_rescale_factor(const TailFit& fit, std::size_t n_target) {
  const double ratio = static_cast<double>(fit.n_reference) / static_cast<double>(n_target);
  if (fit.family == Family::weibull) return std::pow(ratio, 1.0 / fit.shape);
  return 1.0;
}

}  // namespace privet
