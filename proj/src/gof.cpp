#include "privet/gof.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "privet/error.hpp"
#include "privet/rng.hpp"
#include "privet/svg.hpp"

namespace privet {

namespace {

std::vector<double> pointwise(const std::vector<std::vector<double>>& curves, double level) {
  if (curves.empty()) return {};
  std::vector<double> out(curves.front().size());
  std::vector<double> col(curves.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    for (std::size_t c = 0; c < curves.size(); ++c) col[c] = curves[c][k];
    std::sort(col.begin(), col.end());
    if (level <= 0.0) {
      out[k] = col.front();
    } else if (level >= 1.0) {
      out[k] = col.back();
    } else {
      // median of an even count averages the middle pair
      const double pos = level * static_cast<double>(col.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = static_cast<std::size_t>(std::ceil(pos));
      out[k] = 0.5 * (col[lo] + col[hi]);
    }
  }
  return out;
}

std::vector<double> in_bounds(const NNDistanceSet& d, double lower, double upper) {
  std::vector<double> out;
  for (Eigen::Index k = 0; k < d.distances.size(); ++k) {
    const double u = d.distances[k];
    if (u > 0.0 && u >= lower && u <= upper) out.push_back(u);
  }
  return out;
}

}  // namespace

double ks_uniform(std::span<const double> v) {
  const auto m = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double above = static_cast<double>(i + 1) / m - v[i];
    const double below = v[i] - static_cast<double>(i) / m;
    d = std::max({d, above, below});
  }
  return std::clamp(d, 0.0, 1.0);
}

PitResult pit(const TailFit& fit, std::span<const double> points, double lower, double upper) {
  if (points.empty()) throw ValidationError("PIT needs at least one point in the window");
  PitResult r;
  r.lower = lower;
  r.upper = upper;
  r.q_frac = fit.window.q_frac;
  r.m = points.size();
  r.pit_values.reserve(points.size());
  for (double u : points) r.pit_values.push_back(truncated_cdf(fit, lower, upper, u));
  std::sort(r.pit_values.begin(), r.pit_values.end());
  r.ks_stat = ks_uniform(r.pit_values);
  return r;
}

PitResult pit(const TailFit& fit, const NNDistanceSet& distances, const TailWindow& window) {
  const ResolvedWindow w = resolve_window(distances.distances, window, 1);
  PitResult r = pit(fit, w.points, w.lower, w.upper);
  r.q_frac = window.q_frac;
  return r;
}

std::vector<double> ecdf_on_grid(std::span<const double> v, std::span<const double> grid) {
  std::vector<double> out(grid.size());
  const auto m = static_cast<double>(v.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto n = std::upper_bound(v.begin(), v.end(), grid[k]) - v.begin();
    out[k] = m > 0 ? static_cast<double>(n) / m : 0.0;
  }
  return out;
}

std::vector<double> unit_grid(std::size_t n) {
  if (n < 2) throw ValidationError("grid needs at least two points");
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) g[k] = static_cast<double>(k) / static_cast<double>(n - 1);
  return g;
}

PpRibbon pp_ribbon(const NNDistanceSet& distances, double q_min, double q_max, std::size_t n_q,
                   double a_frac, const FitOptions& options, std::size_t grid_size) {
  if (n_q == 0) throw ValidationError("ribbon needs at least one q value");
  if (!(q_min > a_frac && q_min <= q_max && q_max <= 1.0))
    throw ValidationError("ribbon needs a_frac < q_min <= q_max <= 1");
  PpRibbon rb;
  rb.grid = unit_grid(grid_size);
  for (std::size_t k = 0; k < n_q; ++k) {
    const double q = n_q == 1 ? q_min
                              : q_min + (q_max - q_min) * static_cast<double>(k) /
                                            static_cast<double>(n_q - 1);
    const TailWindow w{a_frac, q};
    TailFit f = fit_tail(distances, w, options);
    const PitResult p = pit(f, distances, w);
    rb.q_values.push_back(q);
    rb.curves.push_back(ecdf_on_grid(p.pit_values, rb.grid));
    rb.fits.push_back(std::move(f));
  }
  rb.lower = pointwise(rb.curves, 0.0);
  rb.upper = pointwise(rb.curves, 1.0);
  return rb;
}

std::vector<double> sample_truncated(const TailFit& fit, double lower, double upper,
                                     std::size_t m, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  std::vector<double> out(m);
  for (double& u : out) u = truncated_quantile(fit, lower, upper, rng.uniform_open());
  std::sort(out.begin(), out.end());
  return out;
}

BootstrapBand bootstrap_ks_band(const TailFit& fit, std::span<const double> points, double lower,
                                double upper, std::size_t n_bootstrap, std::uint64_t seed) {
  if (n_bootstrap == 0) throw ValidationError("n_bootstrap must be at least 1");
  if (points.size() < 2) throw ValidationError("bootstrap needs at least two window points");
  BootstrapBand band;
  band.n_bootstrap = n_bootstrap;
  band.m = points.size();
  const TailFit observed_fit = fit_truncated(points, lower, upper, fit.family, fit);
  band.observed = pit(observed_fit, points, lower, upper).ks_stat;

  std::vector<std::optional<double>> stats(n_bootstrap);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(n_bootstrap); ++j) {
    const auto jj = static_cast<std::uint64_t>(j);
    const auto sample = sample_truncated(observed_fit, lower, upper, points.size(),
                                         derive_seed(seed, "bootstrap", jj));
    try {
      const TailFit rf = fit_truncated(sample, lower, upper, fit.family, observed_fit);
      stats[static_cast<std::size_t>(j)] = pit(rf, sample, lower, upper).ks_stat;
    } catch (const NumericalError&) {
    }
  }
  for (const auto& s : stats) {
    if (s)
      band.replicate_stats.push_back(*s);
    else
      ++band.failures;
  }
  if (band.failures * 20 >= n_bootstrap)
    throw NumericalError("bootstrap refits failed in " + std::to_string(band.failures) + " of " +
                         std::to_string(n_bootstrap) + " replicates");
  std::vector<double> sorted = band.replicate_stats;
  std::sort(sorted.begin(), sorted.end());
  const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size()))) - 1;
  band.critical_value = sorted[std::min(idx, sorted.size() - 1)];
  const auto exceed = std::count_if(sorted.begin(), sorted.end(),
                                    [&](double s) { return s >= band.observed; });
  band.mc_p_value = static_cast<double>(exceed + 1) / static_cast<double>(sorted.size() + 1);
  return band;
}

BootstrapBand bootstrap_ks_band(const TailFit& fit, const NNDistanceSet& distances,
                                const TailWindow& window, std::size_t n_bootstrap,
                                std::uint64_t seed) {
  const ResolvedWindow w = resolve_window(distances.distances, window, 2);
  return bootstrap_ks_band(fit, w.points, w.lower, w.upper, n_bootstrap, seed);
}

SplitConsistency split_consistency(const DataMatrix& train, Metric metric,
                                   const TailWindow& window, std::size_t n_splits,
                                   std::uint64_t seed, const FitOptions& options,
                                   std::size_t grid_size) {
  if (n_splits == 0) throw ValidationError("n_splits must be at least 1");
  const std::size_t half = train.rows() / 2;
  const double support = static_cast<double>(half) * (window.q_frac - window.a_frac);
  if (half < 2 || support < 20.0)
    throw ValidationError("split consistency needs more rows: each half of " +
                          std::to_string(half) + " rows gives under 20 window points");
  SplitConsistency sc;
  sc.grid = unit_grid(grid_size);
  sc.curves.resize(n_splits);
  sc.m.resize(n_splits);
  std::vector<std::string> errors(n_splits);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n_splits); ++s) {
    const auto ss = static_cast<std::size_t>(s);
    try {
      Xoshiro256 rng(derive_seed(seed, "split", ss));
      std::vector<std::size_t> perm = sample_without_replacement(train.rows(), 2 * half, rng);
      const std::vector<std::size_t> a(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
      const std::vector<std::size_t> b(perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end());
      const DataMatrix h1 = train.select_rows(a), h2 = train.select_rows(b);
      const TailFit f = fit_tail(nn_distances(h1, h1, metric, true), window, options);
      const std::vector<double> pts = in_bounds(nn_distances(h2, h2, metric, true), f.lower, f.upper);
      const PitResult p = pit(f, pts, f.lower, f.upper);
      sc.curves[ss] = ecdf_on_grid(p.pit_values, sc.grid);
      sc.m[ss] = p.m;
    } catch (const std::exception& e) {
      errors[ss] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError("split consistency failed: " + e);
  sc.median = pointwise(sc.curves, 0.5);
  sc.lower = pointwise(sc.curves, 0.0);
  sc.upper = pointwise(sc.curves, 1.0);
  return sc;
}

std::string pp_svg(const PpRibbon& ribbon, const std::vector<double>& reference_curve,
                   double critical_value, const std::string& title) {
  PlotSpec spec;
  spec.title = title;
  spec.x_label = "uniform quantile";
  spec.y_label = "PIT eCDF";
  spec.x_range = {0.0, 1.0};
  spec.y_range = {0.0, 1.0};
  const auto& g = ribbon.grid;
  std::vector<PlotBand> bands;
  if (!ribbon.curves.empty())
    bands.push_back({"q ribbon", g, ribbon.lower, ribbon.upper, "#1f77b4", 0.3});
  std::vector<double> lo(g.size()), hi(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    lo[k] = std::max(0.0, g[k] - critical_value);
    hi[k] = std::min(1.0, g[k] + critical_value);
  }
  bands.push_back({"bootstrap KS band", g, lo, hi, "#ff7f0e", 0.2});
  std::vector<PlotSeries> series;
  series.push_back({"diagonal", {0.0, 1.0}, {0.0, 1.0}, "#555555", true});
  if (!reference_curve.empty()) series.push_back({"reference fit", g, reference_curve, "#d62728", false});
  return render_line_plot(spec, series, bands);
}

std::string pp_csv(const PpRibbon& ribbon, const std::vector<double>& reference_curve,
                   double critical_value) {
  std::ostringstream os;
  os << "curve,x,y\n";
  const auto& g = ribbon.grid;
  auto emit = [&](const std::string& name, const std::vector<double>& y) {
    for (std::size_t k = 0; k < y.size() && k < g.size(); ++k)
      os << name << ',' << format_double(g[k]) << ',' << format_double(y[k]) << '\n';
  };
  for (std::size_t c = 0; c < ribbon.curves.size(); ++c)
    emit("q=" + format_double(ribbon.q_values[c]), ribbon.curves[c]);
  emit("ribbon_lower", ribbon.lower);
  emit("ribbon_upper", ribbon.upper);
  emit("reference", reference_curve);
  std::vector<double> lo(g.size()), hi(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    lo[k] = std::max(0.0, g[k] - critical_value);
    hi[k] = std::min(1.0, g[k] + critical_value);
  }
  emit("band_lower", lo);
  emit("band_upper", hi);
  return os.str();
}

}  // namespace privet
