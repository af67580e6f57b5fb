#include "privet/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "privet/error.hpp"
#include "privet/serialize.hpp"
#include "privet/svg.hpp"

namespace privet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double quantile_at(const Eigen::VectorXd& sorted, double p) {
  const auto n = static_cast<double>(sorted.size());
  auto k = static_cast<Eigen::Index>(std::ceil(p * n - 1e-9)) - 1;
  k = std::clamp<Eigen::Index>(k, 0, sorted.size() - 1);
  return sorted[k];
}

double median_offset(const Eigen::VectorXd& ref, const Eigen::VectorXd& other,
                     const TailWindow& window) {
  constexpr int kLevels = 50;
  const double n = static_cast<double>(std::min(ref.size(), other.size()));
  const double lo = std::max(window.a_frac, 1.0 / n), hi = window.q_frac;
  std::vector<double> offs;
  for (int k = 0; k < kLevels; ++k) {
    const double p = lo + (hi - lo) * k / (kLevels - 1);
    const double a = quantile_at(ref, p), b = quantile_at(other, p);
    if (a == b) {
      offs.push_back(0.0);
      continue;
    }
    offs.push_back(std::log10(b) - std::log10(a));
  }
  std::sort(offs.begin(), offs.end());
  const std::size_t m = offs.size();
  return m % 2 ? offs[m / 2] : 0.5 * (offs[m / 2 - 1] + offs[m / 2]);
}

}  // namespace

const char* to_string(Regime r) {
  switch (r) {
    case Regime::underfitting: return "underfitting";
    case Regime::overfitting: return "overfitting";
    default: return "well-fitted";
  }
}

const char* to_string(FlagScore f) { return f == FlagScore::delta_pi ? "delta_pi" : "delta_p"; }

FlagScore flag_score_from_string(const std::string& s) {
  if (s == "delta_pi") return FlagScore::delta_pi;
  if (s == "delta_p") return FlagScore::delta_p;
  throw ValidationError("unknown flag score '" + s + "' (expected delta_pi or delta_p)");
}

RegimeEvidence classify_regime(const NNDistanceSet& d_trtr, const NNDistanceSet& d_str,
                               const NNDistanceSet& d_ste, double tolerance,
                               const TailWindow& window) {
  RegimeEvidence ev;
  ev.tolerance = tolerance;
  ev.offset_train = median_offset(d_trtr.distances, d_str.distances, window);
  ev.offset_test = median_offset(d_trtr.distances, d_ste.distances, window);
  if (ev.offset_train < -tolerance)
    ev.regime = Regime::overfitting;
  else if (ev.offset_train > tolerance && ev.offset_test > tolerance)
    ev.regime = Regime::underfitting;
  else
    ev.regime = Regime::well_fitted;
  return ev;
}

RegimeEvidence classify_regime(const NNDistanceSet& d_trtr, const NNDistanceSet& d_str,
                               double tolerance, const TailWindow& window) {
  RegimeEvidence ev;
  ev.tolerance = tolerance;
  ev.offset_train = median_offset(d_trtr.distances, d_str.distances, window);
  ev.offset_test = kNaN;
  if (ev.offset_train < -tolerance)
    ev.regime = Regime::overfitting;
  else if (ev.offset_train > tolerance)
    ev.regime = Regime::underfitting;
  return ev;
}

std::optional<std::string> multimodal_warning(const Eigen::VectorXd& sorted,
                                              const TailWindow& window) {
  const ResolvedWindow w = resolve_window(sorted, window, 40);
  const auto n = static_cast<double>(sorted.size());
  const std::size_t m = w.points.size();
  auto slope = [&](std::size_t from, std::size_t to) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(to - from);
    for (std::size_t i = from; i < to; ++i) {
      const double x = std::log(w.points[i]);
      const double p = (static_cast<double>(w.first + i) + 0.5) / n;
      const double y = std::log(-std::log1p(-p));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double var = sxx - sx * sx / k;
    return var > 0 ? (sxy - sx * sy / k) / var : kNaN;
  };
  const double s1 = slope(0, m / 2), s2 = slope(m / 2, m);
  if (!(s1 > 0 && s2 > 0)) return std::nullopt;
  const double ratio = std::max(s1, s2) / std::min(s1, s2);
  if (ratio > 2.0) {
    std::ostringstream os;
    os.precision(3);
    os << "fit window may straddle several eCDF modes (log-log slope ratio " << ratio
       << "); consider a smaller q_frac";
    return os.str();
  }
  return std::nullopt;
}

PrivacyReport privet_from_distances(const NNDistanceSet& d_trtr, const NNDistanceSet& d_str,
                                    const std::optional<NNDistanceSet>& d_ste,
                                    const PrivetConfig& config) {
  if (!(config.tau <= 0.0 || config.tau > 0.0)) throw ValidationError("tau must be a number");
  PrivacyReport rep;
  rep.config = config;
  rep.has_test = d_ste.has_value();
  rep.n_train = d_trtr.n_query;
  rep.n_synth = d_str.n_query;
  rep.n_test = d_ste ? d_ste->n_reference : 0;
  rep.ecdf_trtr = d_trtr.distances;
  rep.ecdf_str = d_str.distances;
  if (d_ste) rep.ecdf_ste = d_ste->distances;

  auto t0 = Clock::now();
  rep.fit = fit_tail(d_trtr, config.window, FitOptions{config.family, config.likelihood});
  rep.train_fit = config.rescale ? rescale_fit(rep.fit, d_str.n_reference) : rep.fit;
  if (d_ste) rep.test_fit = config.rescale ? rescale_fit(rep.fit, d_ste->n_reference) : rep.fit;
  if (auto w = multimodal_warning(d_trtr.distances, config.window)) rep.warnings.push_back(*w);
  rep.timing.fit_ms = ms_since(t0);

  t0 = Clock::now();
  const std::size_t M = d_str.size();
  if (d_ste) {
    rep.regime = classify_regime(d_trtr, d_str, *d_ste, config.regime_tolerance, config.window);
    rep.samples = score_samples(rep.train_fit, *rep.test_fit, d_str, *d_ste, config.tau);
    const ExcessCurves curves = excess_curves(rep.train_fit, *rep.test_fit, d_str, *d_ste);
    rep.global.n_overfit_curve = curves.n_overfit;
    rep.global.n_pleaks_curve = curves.n_pleaks;
    rep.pleaks_flag = pleaks_flags(curves, d_str);
  } else {
    rep.regime = classify_regime(d_trtr, d_str, config.regime_tolerance, config.window);
    const auto pi = pi_scores(rep.train_fit, d_str, M);
    rep.samples.resize(M);
    for (std::size_t k = 0; k < M; ++k) {
      SampleScore& s = rep.samples[pi[k].query_row];
      s.synth_row = pi[k].query_row;
      s.rank_train = k + 1;
      s.nn_dist_train = pi[k].u;
      s.log10_pi_train = pi[k].log10_pi;
      s.log10_pi_test = kNaN;
      s.nn_dist_test = kNaN;
    }
    std::vector<long long> n_over(M);
    for (std::size_t k = 0; k < M; ++k)
      n_over[k] = static_cast<long long>(k + 1) -
                  std::llround(expected_rank(rep.train_fit, d_str.distances[static_cast<Eigen::Index>(k)], M));
    rep.global.n_overfit_curve = n_over;
    rep.pleaks_flag.assign(M, false);
  }
  rep.timing.score_ms = ms_since(t0);

  if (d_ste && config.decimate) {
    t0 = Clock::now();
    DecimationResult dec = decimate(rep.train_fit, *rep.test_fit, d_str, *d_ste, config.tau);
    // keep the rank-corrected scores from the full pass
    for (std::size_t row = 0; row < M; ++row) dec.samples[row].delta_p = rep.samples[row].delta_p;
    rep.samples = std::move(dec.samples);
    rep.global.decimation_rounds = dec.rounds;
    rep.timing.decimate_ms = ms_since(t0);
  }
  if (d_ste && config.flag_score == FlagScore::delta_p && !config.decimate)
    for (auto& s : rep.samples) s.leak = s.delta_p && *s.delta_p < config.tau_delta_p;

  if (d_ste) {
    double sum = 0.0;
    std::size_t n_def = 0;
    for (const auto& s : rep.samples) {
      if (s.delta_pi) {
        sum += *s.delta_pi;
        ++n_def;
      } else {
        ++rep.global.n_undefined;
      }
    }
    if (n_def) rep.global.mean_delta_pi = sum / static_cast<double>(n_def);
  }
  rep.global.npl = static_cast<std::size_t>(
      std::count_if(rep.samples.begin(), rep.samples.end(), [](const SampleScore& s) { return s.leak; }));
  for (long long v : rep.global.n_overfit_curve) rep.global.max_n_overfit = std::max(rep.global.max_n_overfit, v);
  for (long long v : rep.global.n_pleaks_curve) rep.global.max_n_pleaks = std::max(rep.global.max_n_pleaks, v);
  return rep;
}

PrivacyReport run_privet(const DataMatrix& train, const DataMatrix& test, const DataMatrix& synth,
                     const PrivetConfig& config) {
  if (train.cols() != synth.cols() || test.cols() != synth.cols())
    throw ValidationError("train, test and synth must have the same number of columns");
  const auto t0 = Clock::now();
  const NNDistanceSet d_trtr = pairwise_min_profile(train, config.metric, "train");
  const NNDistanceSet d_str = nn_distances(synth, train, config.metric, false, "synth", "train");
  const NNDistanceSet d_ste = nn_distances(synth, test, config.metric, false, "synth", "test");
  const double knn = ms_since(t0);
  PrivacyReport rep = privet_from_distances(d_trtr, d_str, d_ste, config);
  rep.timing.knn_ms = knn;
  return rep;
}

PrivacyReport run_privet(const DataMatrix& train, const DataMatrix& synth, const PrivetConfig& config) {
  if (train.cols() != synth.cols())
    throw ValidationError("train and synth must have the same number of columns");
  const auto t0 = Clock::now();
  const NNDistanceSet d_trtr = pairwise_min_profile(train, config.metric, "train");
  const NNDistanceSet d_str = nn_distances(synth, train, config.metric, false, "synth", "train");
  const double knn = ms_since(t0);
  PrivacyReport rep = privet_from_distances(d_trtr, d_str, std::nullopt, config);
  rep.timing.knn_ms = knn;
  return rep;
}

MembershipResult membership_attack(const DataMatrix& reference,
                                   const std::optional<std::vector<bool>>& labels,
                                   const DataMatrix& synth, const PrivetConfig& config,
                                   std::optional<double> memorized_fraction) {
  if (labels && labels->size() != reference.rows())
    throw ValidationError("label count " + std::to_string(labels->size()) +
                          " does not match reference rows " + std::to_string(reference.rows()));
  MembershipResult res;
  res.n_reference = reference.rows();
  res.n_synth = synth.rows();
  const NNDistanceSet d_rr = pairwise_min_profile(reference, config.metric, "reference");
  const NNDistanceSet d_rs =
      nn_distances(reference, synth, config.metric, false, "reference", "synth");
  res.fit = fit_tail(d_rr, config.window, FitOptions{config.family, config.likelihood});
  const TailFit scaled = rescale_fit(res.fit, synth.rows());
  const auto pi = pi_scores(scaled, d_rs, reference.rows());
  res.scores.assign(reference.rows(), 0.0);
  // tied distances share the score of the group's last rank, otherwise the
  // row order of the reference leaks into the ranking
  for (std::size_t k = 0; k < pi.size();) {
    std::size_t end = k + 1;
    while (end < pi.size() && pi[end].u == pi[k].u) ++end;
    for (std::size_t i = k; i < end; ++i) res.scores[pi[i].query_row] = pi[end - 1].log10_pi;
    k = end;
  }
  if (labels) {
    res.labels = labels;
    res.n_members = static_cast<std::size_t>(std::count(labels->begin(), labels->end(), true));
    res.pr = pr_curve(res.scores, *labels, memorized_fraction);
  }
  return res;
}

std::optional<PrPoint> pr_knee(const PrCurve& curve) {
  if (curve.points.empty()) return std::nullopt;
  const double prevalence = curve.points.back().precision;
  std::optional<PrPoint> best;
  double best_gain = -std::numeric_limits<double>::infinity();
  for (const auto& p : curve.points) {
    if (p.precision <= 0.0) continue;
    const double gain = p.recall * (1.0 - prevalence / p.precision);
    if (gain > best_gain) {
      best_gain = gain;
      best = p;
    }
  }
  return best ? best : curve.points.front();
}

std::string ecdf_svg(const PrivacyReport& r) {
  auto curve = [](const Eigen::VectorXd& d, const std::string& label, const std::string& color) {
    PlotSeries s{label, {}, {}, color, false};
    const auto n = static_cast<double>(d.size());
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      s.x.push_back(d[k]);
      s.y.push_back(static_cast<double>(k + 1) / n);
    }
    return s;
  };
  std::vector<PlotSeries> series;
  series.push_back(curve(r.ecdf_trtr, "train-train", "#1f77b4"));
  series.push_back(curve(r.ecdf_str, "synth-train", "#d62728"));
  series.push_back(curve(r.ecdf_ste, "synth-test", "#2ca02c"));
  PlotSeries fit{"EVT fit", {}, {}, "#000000", true};
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (const Eigen::VectorXd* d : {&r.ecdf_trtr, &r.ecdf_str, &r.ecdf_ste})
    for (Eigen::Index k = 0; k < d->size(); ++k)
      if ((*d)[k] > 0) {
        lo = std::min(lo, (*d)[k]);
        hi = std::max(hi, (*d)[k]);
      }
  if (std::isfinite(lo) && hi > lo) {
    for (int k = 0; k <= 200; ++k) {
      const double u = lo * std::pow(hi / lo, k / 200.0);
      fit.x.push_back(u);
      fit.y.push_back(tail_cdf(r.fit, u));
    }
  }
  series.push_back(fit);
  double ymin = 1.0;
  for (const auto& s : series)
    if (!s.y.empty() && s.y.front() > 0) ymin = std::min(ymin, s.y.front());
  PlotSpec spec;
  spec.title = "NN distance eCDFs";
  spec.x_label = "NN distance (log10)";
  spec.y_label = "eCDF (log10)";
  spec.log_x = spec.log_y = true;
  spec.y_range = std::make_pair(ymin, 1.0);
  return render_line_plot(spec, series);
}

void emit_report(const PrivacyReport& r, const std::filesystem::path& out_dir,
                 bool include_timing) {
  std::filesystem::create_directories(out_dir);
  std::ostringstream csv;
  csv << "synth_row,nn_dist_train,nn_dist_test,rank_train,rank_test,log10_pi_train,"
         "log10_pi_test,delta_pi,delta_pi_bar,delta_p,leak,decimated_round\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
  for (const auto& s : r.samples) {
    csv << s.synth_row << ',' << format_double(s.nn_dist_train) << ','
        << (r.has_test ? format_double(s.nn_dist_test) : "") << ',' << s.rank_train << ','
        << (r.has_test ? std::to_string(s.rank_test) : "") << ','
        << format_double(s.log10_pi_train) << ','
        << (r.has_test ? format_double(s.log10_pi_test) : "") << ','
        << (r.has_test ? opt(s.delta_pi) : "") << ',' << (r.has_test ? opt(s.delta_pi_bar) : "")
        << ',' << (r.has_test ? opt(s.delta_p) : "") << ',' << (s.leak ? 1 : 0) << ','
        << (s.decimated_round ? std::to_string(*s.decimated_round) : "") << '\n';
  }
  write_text_file(out_dir / "samples.csv", csv.str());
  write_text_file(out_dir / "summary.json", to_json(r, include_timing).dump(2) + "\n");

  std::ostringstream ec;
  ec << "curve,x,y\n";
  auto dump = [&](const Eigen::VectorXd& d, const char* name) {
    const auto n = static_cast<double>(d.size());
    for (Eigen::Index k = 0; k < d.size(); ++k)
      ec << name << ',' << format_double(d[k]) << ','
         << format_double(static_cast<double>(k + 1) / n) << '\n';
  };
  dump(r.ecdf_trtr, "train_train");
  dump(r.ecdf_str, "synth_train");
  dump(r.ecdf_ste, "synth_test");
  const double lo = r.fit.lower > 0 ? r.fit.lower : r.fit.upper / 100.0;
  const double hi = r.ecdf_trtr.size() ? r.ecdf_trtr[r.ecdf_trtr.size() - 1] : r.fit.upper;
  for (int k = 0; k <= 200; ++k) {
    const double u = lo * std::pow(std::max(hi, lo * 1.0001) / lo, k / 200.0);
    ec << "fit," << format_double(u) << ',' << format_double(tail_cdf(r.fit, u)) << '\n';
  }
  write_text_file(out_dir / "ecdf.csv", ec.str());
  write_text_file(out_dir / "ecdf.svg", ecdf_svg(r));
}

}  // namespace privet
