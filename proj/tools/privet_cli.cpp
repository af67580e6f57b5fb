// privet command-line front end. Every subcommand prints one key=value
// summary line on success. Exit codes: 0 ok, 2 invalid input or I/O,
// 3 numerical failure.
#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "privet/baselines.hpp"
#include "privet/error.hpp"
#include "privet/gof.hpp"
#include "privet/pipeline.hpp"
#include "privet/rng.hpp"
#include "privet/serialize.hpp"
#include "privet/svg.hpp"

namespace {

using namespace privet;
namespace fs = std::filesystem;

struct Common {
  int threads = 0;
  std::uint64_t seed = 0;
  std::string metric = "hamming";
  std::string format = "auto";  // input and output matrix format
  std::string values = "auto";
  std::string out = "privet_out";
  std::string config;  // consumed by expand_config before parsing
};

struct FitArgs {
  double a_frac = TailWindow{}.a_frac;
  double q_frac = TailWindow{}.q_frac;
  std::string family = "best";
  std::string likelihood = "censored";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--threads", c.threads, "Cap on worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--seed", c.seed, "Master seed for all random substreams");
  app->add_option("--metric", c.metric, "Distance: hamming or euclidean")
      ->check(CLI::IsMember({"hamming", "euclidean"}));
  app->add_option("--format", c.format, "Matrix file format: auto (by extension), csv or binary")
      ->check(CLI::IsMember({"auto", "csv", "binary"}));
  app->add_option("--values", c.values, "CSV value kind: auto, binary or float")
      ->check(CLI::IsMember({"auto", "binary", "float"}));
  app->add_option("--out", c.out, "Output directory")->envname("PRIVET_OUT_DIR");
  app->add_option("--config", c.config,
                  "File of key = value lines mirroring these flags; flags given on the command line win");
}

void add_fit_args(CLI::App* app, FitArgs& f) {
  app->add_option("--a-frac", f.a_frac, "Lower tail-window fraction");
  app->add_option("--q-frac", f.q_frac, "Upper tail-window fraction");
  app->add_option("--family", f.family, "Tail family: best, weibull or gumbel")
      ->check(CLI::IsMember({"best", "auto", "weibull", "gumbel"}));
  app->add_option("--likelihood", f.likelihood, "Window likelihood: censored or truncated")
      ->check(CLI::IsMember({"censored", "truncated"}));
}

TailWindow window_of(const FitArgs& f) {
  if (!(f.a_frac >= 0.0 && f.a_frac < f.q_frac && f.q_frac <= 1.0))
    throw ValidationError("tail window needs 0 <= a-frac < q-frac <= 1");
  return {f.a_frac, f.q_frac};
}

FitOptions fit_options_of(const FitArgs& f) {
  return {family_choice_from_string(f.family), likelihood_from_string(f.likelihood)};
}

FileFormat file_format(const Common& c, const fs::path& path) {
  if (c.format == "csv") return FileFormat::csv;
  if (c.format == "binary") return FileFormat::dense_binary;
  return format_from_extension(path);
}

DataMatrix load(const Common& c, const std::string& path) {
  if (path.empty()) throw ValidationError("missing input path");
  if (!fs::exists(path)) throw IoError("input file not found: " + path);
  const ValueKind kind = c.values == "binary"  ? ValueKind::binary
                         : c.values == "float" ? ValueKind::float64
                                               : ValueKind::auto_detect;
  return load_matrix(path, file_format(c, path), kind);
}

std::string matrix_ext(const Common& c) { return c.format == "binary" ? ".pvm" : ".csv"; }

void save(const Common& c, const DataMatrix& m, const fs::path& path) {
  save_matrix(m, path, file_format(c, path));
}

std::string num(double v) { return format_double(v); }
std::string num(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }

void summary(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string line;
  for (const auto& [k, v] : kv) {
    if (!line.empty()) line += ' ';
    line += k + '=' + v;
  }
  std::cout << line << std::endl;
}

fs::path out_dir(const Common& c) {
  fs::create_directories(c.out);
  return c.out;
}

std::vector<bool> load_labels(const std::string& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels file: " + path);
  std::vector<bool> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line.erase(std::remove_if(line.begin(), line.end(), ::isspace), line.end());
    if (line.empty()) continue;
    const std::string last = line.substr(line.find_last_of(',') == std::string::npos
                                             ? 0
                                             : line.find_last_of(',') + 1);
    if (last == "1" || last == "true")
      out.push_back(true);
    else if (last == "0" || last == "false")
      out.push_back(false);
    else if (line_no != 1)  // a header line is allowed
      throw ValidationError(path + ":" + std::to_string(line_no) + ": label must be 0 or 1");
  }
  if (out.size() != n)
    throw ValidationError(path + ": " + std::to_string(out.size()) + " labels for " +
                          std::to_string(n) + " reference rows");
  return out;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError(std::string("bad number '") + tok + "' in " + what);
    }
  }
  if (out.empty()) throw ValidationError(std::string(what) + " must not be empty");
  return out;
}

// --config FILE is expanded in place into --key=value arguments placed right
// after the subcommand name, so explicit flags given later win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::vector<std::string> injected;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.front() == '[')
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    std::replace(key.begin(), key.end(), '_', '-');
    injected.push_back("--" + key + "=" + value);
  }
  if (args.size() < 2) throw ValidationError("--config needs a subcommand");
  args.insert(args.begin() + 2, injected.begin(), injected.end());
  return args;
}

struct ScoreArgs {
  std::string train, test, synth;
  bool no_test = false;
  double tau = kDefaultTau;
  std::string flag_score = "delta_pi";
  double tau_delta_p = kDefaultDeltaPTau;
  bool decimate = false;
  bool no_rescale = false;
  double regime_tolerance = 0.05;
  bool timing = false;
};

// Everything needed to re-run the command with --config alone.
void write_config_echo(const fs::path& path, const Common& c, const FitArgs& f,
                       const ScoreArgs& s, const PrivetConfig& cfg) {
  auto abs = [](const std::string& p) { return fs::absolute(p).lexically_normal().string(); };
  std::ostringstream os;
  os << "train = \"" << abs(s.train) << "\"\n";
  if (s.no_test)
    os << "no-test = true\n";
  else
    os << "test = \"" << abs(s.test) << "\"\n";
  os << "synth = \"" << abs(s.synth) << "\"\n"
     << "format = " << c.format << "\n"
     << "values = " << c.values << "\n"
     << "metric = " << c.metric << "\n"
     << "a-frac = " << num(f.a_frac) << "\n"
     << "q-frac = " << num(f.q_frac) << "\n"
     << "family = " << f.family << "\n"
     << "likelihood = " << f.likelihood << "\n"
     << "tau = " << num(cfg.tau) << "\n"
     << "flag-score = " << to_string(cfg.flag_score) << "\n"
     << "tau-delta-p = " << num(cfg.tau_delta_p) << "\n"
     << "decimate = " << (cfg.decimate ? "true" : "false") << "\n"
     << "no-rescale = " << (cfg.rescale ? "false" : "true") << "\n"
     << "regime-tolerance = " << num(cfg.regime_tolerance) << "\n"
     << "seed = " << c.seed << "\n";
  write_text_file(path, os.str());
}

void add_score_args(CLI::App* app, ScoreArgs& s, bool full) {
  app->add_option("--train", s.train, "Train matrix")->required();
  app->add_option("--test", s.test, "Held-out test matrix");
  app->add_option("--synth", s.synth, "Synthetic matrix")->required();
  app->add_option("--tau", s.tau, "Leak threshold on delta_pi (log10)");
  app->add_option("--regime-tolerance", s.regime_tolerance,
                  "Log10 quantile offset separating the regimes");
  app->add_flag("--no-rescale", s.no_rescale, "Disable size rescaling of the fit");
  if (!full) return;
  app->add_flag("--no-test", s.no_test, "Overfitting-only mode without a test set");
  app->add_option("--flag-score", s.flag_score, "Flagging score: delta_pi or delta_p")
      ->check(CLI::IsMember({"delta_pi", "delta_p"}));
  app->add_option("--tau-delta-p", s.tau_delta_p, "Threshold for delta_p flagging");
  app->add_flag("--decimate", s.decimate, "Remove flagged samples one at a time and rescore");
  app->add_flag("--timing", s.timing, "Record stage timings in summary.json");
}

PrivetConfig config_of(const Common& c, const FitArgs& f, const ScoreArgs& s) {
  PrivetConfig cfg;
  cfg.metric = metric_from_string(c.metric);
  cfg.window = window_of(f);
  cfg.family = family_choice_from_string(f.family);
  cfg.likelihood = likelihood_from_string(f.likelihood);
  cfg.tau = s.tau;
  cfg.flag_score = flag_score_from_string(s.flag_score);
  cfg.tau_delta_p = s.tau_delta_p;
  cfg.decimate = s.decimate;
  cfg.rescale = !s.no_rescale;
  if (!(s.regime_tolerance >= 0.0)) throw ValidationError("regime tolerance must be >= 0");
  cfg.regime_tolerance = s.regime_tolerance;
  return cfg;
}

int cmd_score(const Common& c, const FitArgs& f, const ScoreArgs& s) {
  const PrivetConfig cfg = config_of(c, f, s);
  if (s.no_test && !s.test.empty()) throw ValidationError("--no-test conflicts with --test");
  if (!s.no_test && s.test.empty()) throw ValidationError("--test is required unless --no-test");
  const DataMatrix train = load(c, s.train), synth = load(c, s.synth);
  PrivacyReport r = s.no_test ? run_privet(train, synth, cfg)
                              : run_privet(train, load(c, s.test), synth, cfg);
  const fs::path dir = out_dir(c);
  emit_report(r, dir, s.timing);
  write_config_echo(dir / "config.ini", c, f, s, cfg);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  if (!r.has_test) std::cerr << "no privacy score: no test set given, overfitting only\n";
  summary({{"command", "score"},
           {"npl", r.has_test ? std::to_string(r.global.npl) : "undefined"},
           {"mean_delta_pi", num(r.global.mean_delta_pi)},
           {"regime", to_string(r.regime.regime)},
           {"family", to_string(r.fit.family)},
           {"shape", num(r.fit.shape)},
           {"log_A", num(r.fit.log_A)},
           {"max_n_overfit", std::to_string(r.global.max_n_overfit)},
           {"max_n_pleaks", std::to_string(r.global.max_n_pleaks)},
           {"n_train", std::to_string(r.n_train)},
           {"n_test", std::to_string(r.n_test)},
           {"n_synth", std::to_string(r.n_synth)},
           {"out", dir.string()}});
  return 0;
}

int cmd_ecdf(const Common& c, const FitArgs& f, const ScoreArgs& s) {
  if (s.test.empty()) throw ValidationError("ecdf needs --test");
  const PrivetConfig cfg = config_of(c, f, s);
  PrivacyReport r = run_privet(load(c, s.train), load(c, s.test), load(c, s.synth), cfg);
  const fs::path dir = out_dir(c);
  std::ostringstream ec;
  ec << "curve,x,y\n";
  auto dump = [&](const Eigen::VectorXd& d, const char* name) {
    const auto n = static_cast<double>(d.size());
    for (Eigen::Index k = 0; k < d.size(); ++k)
      ec << name << ',' << num(d[k]) << ',' << num(static_cast<double>(k + 1) / n) << '\n';
  };
  dump(r.ecdf_trtr, "train_train");
  dump(r.ecdf_str, "synth_train");
  dump(r.ecdf_ste, "synth_test");
  const double lo = r.fit.lower > 0 ? r.fit.lower : r.fit.upper / 100.0;
  const double hi = r.ecdf_trtr.size() ? r.ecdf_trtr[r.ecdf_trtr.size() - 1] : r.fit.upper;
  for (int k = 0; k <= 200; ++k) {
    const double u = lo * std::pow(std::max(hi, lo * 1.0001) / lo, k / 200.0);
    ec << "fit," << num(u) << ',' << num(tail_cdf(r.fit, u)) << '\n';
  }
  write_text_file(dir / "ecdf.csv", ec.str());
  write_text_file(dir / "ecdf.svg", ecdf_svg(r));
  summary({{"command", "ecdf"},
           {"curves", "3"},
           {"regime", to_string(r.regime.regime)},
           {"offset_train", num(r.regime.offset_train)},
           {"offset_test", num(r.regime.offset_test)},
           {"out", dir.string()}});
  return 0;
}

struct FitCmdArgs {
  std::string reference, query;
};

NNDistanceSet reference_distances(const Common& c, const std::string& reference,
                                  const std::string& query) {
  const DataMatrix ref = load(c, reference);
  const Metric metric = metric_from_string(c.metric);
  if (query.empty()) return nn_distances(ref, ref, metric, true, "reference", "reference");
  return nn_distances(load(c, query), ref, metric, false, "query", "reference");
}

int cmd_fit(const Common& c, const FitArgs& f, const FitCmdArgs& a) {
  const TailWindow w = window_of(f);
  const NNDistanceSet d = reference_distances(c, a.reference, a.query);
  const TailFit fit = fit_tail(d, w, fit_options_of(f));
  const fs::path dir = out_dir(c);
  write_text_file(dir / "fit.json", to_json(fit).dump(2) + "\n");
  summary({{"command", "fit"},
           {"family", to_string(fit.family)},
           {"shape", num(fit.shape)},
           {"log_A", num(fit.log_A)},
           {"m", std::to_string(fit.m)},
           {"lower", num(fit.lower)},
           {"upper", num(fit.upper)},
           {"nll", num(fit.nll)},
           {"out", (dir / "fit.json").string()}});
  return 0;
}

struct GofArgs {
  std::string reference;
  std::size_t n_bootstrap = 200;
  double q_min = 0.10, q_max = 0.30;
  std::size_t n_q = 9;
  std::size_t splits = 0;
};

int cmd_gof(const Common& c, const FitArgs& f, const GofArgs& g) {
  const TailWindow w = window_of(f);
  const FitOptions opts = fit_options_of(f);
  const DataMatrix ref = load(c, g.reference);
  const Metric metric = metric_from_string(c.metric);
  const NNDistanceSet d = nn_distances(ref, ref, metric, true, "reference", "reference");
  const TailFit fit = fit_tail(d, w, opts);
  const PitResult p = pit(fit, d, w);
  const BootstrapBand band =
      bootstrap_ks_band(fit, d, w, g.n_bootstrap, derive_seed(c.seed, "bootstrap"));
  FitOptions ribbon_opts = opts;
  ribbon_opts.likelihood = Likelihood::truncated;
  const PpRibbon rb = pp_ribbon(d, g.q_min, g.q_max, g.n_q, w.a_frac, ribbon_opts);
  const std::vector<double> reference_curve = ecdf_on_grid(p.pit_values, rb.grid);
  std::optional<SplitConsistency> split;
  if (g.splits > 0)
    split = split_consistency(ref, metric, w, g.splits, derive_seed(c.seed, "split"), opts);

  const fs::path dir = out_dir(c);
  write_text_file(dir / "pp.csv", pp_csv(rb, reference_curve, band.critical_value));
  write_text_file(dir / "pp.svg", pp_svg(rb, reference_curve, band.critical_value,
                                         "P-P plot of the tail fit"));
  nlohmann::json j = {{"fit", to_json(fit)},
                      {"ks_stat", json_number(p.ks_stat)},
                      {"m", p.m},
                      {"bootstrap",
                       {{"n_bootstrap", band.n_bootstrap},
                        {"observed", json_number(band.observed)},
                        {"critical_value", json_number(band.critical_value)},
                        {"mc_p_value", json_number(band.mc_p_value)},
                        {"failures", band.failures}}},
                      {"ribbon_q", rb.q_values}};
  if (split) {
    const SplitConsistency& sc = *split;
    std::ostringstream os;
    os << "curve,x,y\n";
    auto emit = [&](const std::string& name, const std::vector<double>& y) {
      for (std::size_t k = 0; k < y.size(); ++k)
        os << name << ',' << num(sc.grid[k]) << ',' << num(y[k]) << '\n';
    };
    for (std::size_t s = 0; s < sc.curves.size(); ++s) emit("split" + std::to_string(s), sc.curves[s]);
    emit("median", sc.median);
    emit("lower", sc.lower);
    emit("upper", sc.upper);
    write_text_file(dir / "split.csv", os.str());
    double width = 0.0, dev = 0.0;
    for (std::size_t k = 0; k < sc.grid.size(); ++k) {
      width = std::max(width, sc.upper[k] - sc.lower[k]);
      dev = std::max(dev, std::abs(sc.median[k] - sc.grid[k]));
    }
    j["split_consistency"] = {{"n_splits", g.splits},
                              {"max_ribbon_width", json_number(width)},
                              {"max_median_deviation", json_number(dev)}};
  }
  write_text_file(dir / "gof.json", j.dump(2) + "\n");
  summary({{"command", "gof"},
           {"family", to_string(fit.family)},
           {"m", std::to_string(p.m)},
           {"ks_stat", num(p.ks_stat)},
           {"critical_value", num(band.critical_value)},
           {"mc_p_value", num(band.mc_p_value)},
           {"bootstrap_failures", std::to_string(band.failures)},
           {"out", dir.string()}});
  return 0;
}

struct AttackArgs {
  std::string reference, synth, labels;
  double memorized_fraction = -1.0;
};

int cmd_attack(const Common& c, const FitArgs& f, const AttackArgs& a) {
  PrivetConfig cfg;
  cfg.metric = metric_from_string(c.metric);
  cfg.window = window_of(f);
  cfg.family = family_choice_from_string(f.family);
  cfg.likelihood = likelihood_from_string(f.likelihood);
  const DataMatrix ref = load(c, a.reference), synth = load(c, a.synth);
  std::optional<std::vector<bool>> labels;
  if (!a.labels.empty()) labels = load_labels(a.labels, ref.rows());
  std::optional<double> mem;
  if (a.memorized_fraction >= 0.0) {
    if (a.memorized_fraction > 1.0) throw ValidationError("memorized fraction must be <= 1");
    mem = a.memorized_fraction;
  }
  const MembershipResult res = membership_attack(ref, labels, synth, cfg, mem);
  const fs::path dir = out_dir(c);
  std::ostringstream sc;
  sc << "reference_row,score" << (labels ? ",label" : "") << '\n';
  for (std::size_t i = 0; i < res.scores.size(); ++i) {
    sc << i << ',' << num(res.scores[i]);
    if (labels) sc << ',' << ((*labels)[i] ? 1 : 0);
    sc << '\n';
  }
  write_text_file(dir / "scores.csv", sc.str());
  std::vector<std::pair<std::string, std::string>> kv = {
      {"command", "attack"}, {"n_reference", std::to_string(res.n_reference)},
      {"n_synth", std::to_string(res.n_synth)}, {"family", to_string(res.fit.family)}};
  if (res.pr) {
    std::ostringstream pr;
    pr << "threshold,precision,recall\n";
    PlotSeries curve{"PRIVET", {}, {}, "#1f77b4", false};
    for (const auto& p : res.pr->points) {
      pr << num(p.threshold) << ',' << num(p.precision) << ',' << num(p.recall) << '\n';
      curve.x.push_back(p.recall);
      curve.y.push_back(p.precision);
    }
    write_text_file(dir / "pr.csv", pr.str());
    std::vector<PlotSeries> series{curve};
    if (!res.pr->ideal.empty()) {
      PlotSeries ideal{"ideal", {}, {}, "#d62728", true};
      for (const auto& p : res.pr->ideal) {
        ideal.x.push_back(p.recall);
        ideal.y.push_back(p.precision);
      }
      series.push_back(ideal);
    }
    if (mem) series.push_back({"memorized fraction", {*mem, *mem}, {0.0, 1.0}, "#000000", true});
    PlotSpec spec;
    spec.title = "Membership attack";
    spec.x_label = "recall";
    spec.y_label = "precision";
    spec.x_range = {0.0, 1.0};
    spec.y_range = {0.0, 1.0};
    write_text_file(dir / "pr.svg", render_line_plot(spec, series));
    const auto knee = pr_knee(*res.pr);
    kv.push_back({"auc_pr", num(res.pr->auc)});
    kv.push_back({"knee_precision", knee ? num(knee->precision) : "undefined"});
    kv.push_back({"knee_recall", knee ? num(knee->recall) : "undefined"});
  }
  kv.push_back({"out", dir.string()});
  summary(kv);
  return 0;
}

struct LeakArgs {
  std::string train, synth;
  double f_fake = 0.0, f_copy = 0.0;
};

int cmd_leakgen(const Common& c, const LeakArgs& a) {
  const DataMatrix train = load(c, a.train), synth = load(c, a.synth);
  const Injection inj = inject_leaks(
      train, synth, {a.f_fake, a.f_copy, derive_seed(c.seed, "injection")}, metric_from_string(c.metric));
  if (inj.no_op_warning) std::cerr << "warning: f_copy * n_cols < 1, injection is a no-op\n";
  const fs::path dir = out_dir(c);
  const fs::path out = dir / ("pseudo_synth" + matrix_ext(c));
  save(c, inj.synth, out);
  std::ostringstream t;
  t << "synth_row,leak,source\n";
  for (std::size_t i = 0; i < inj.truth.leak.size(); ++i)
    t << i << ',' << (inj.truth.leak[i] ? 1 : 0) << ','
      << (inj.truth.source[i] ? std::to_string(*inj.truth.source[i]) : "") << '\n';
  write_text_file(dir / "truth.csv", t.str());
  summary({{"command", "leakgen"},
           {"leaked", std::to_string(inj.truth.positives())},
           {"copied_positions",
            std::to_string(static_cast<std::size_t>(
                std::floor(a.f_copy * static_cast<double>(synth.cols()) + 1e-9)))},
           {"out", out.string()}});
  return 0;
}

struct GenArgs {
  PopulationSpec pop;
  std::string sizes;
};

int cmd_generate(const Common& c, const GenArgs& g) {
  const DataMatrix pop = generate_population(g.pop, derive_seed(c.seed, "population"));
  const fs::path dir = out_dir(c);
  std::vector<std::pair<std::string, std::string>> kv = {
      {"command", "generate"}, {"rows", std::to_string(pop.rows())},
      {"cols", std::to_string(pop.cols())}};
  if (g.sizes.empty()) {
    const fs::path out = dir / ("population" + matrix_ext(c));
    save(c, pop, out);
    kv.push_back({"out", out.string()});
  } else {
    const auto v = parse_list(g.sizes, "--split-sizes");
    if (v.size() != 3) throw ValidationError("--split-sizes needs three counts");
    for (double x : v)
      if (!(x >= 1 && x == std::floor(x))) throw ValidationError("split sizes must be positive integers");
    const Split sp = split(pop, {derive_seed(c.seed, "split"), static_cast<std::size_t>(v[0]),
                                 static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2])});
    save(c, sp.train, dir / ("train" + matrix_ext(c)));
    save(c, sp.test, dir / ("test" + matrix_ext(c)));
    save(c, sp.synth, dir / ("synth" + matrix_ext(c)));
    kv.push_back({"out", dir.string()});
  }
  summary(kv);
  return 0;
}

struct GridArgs {
  std::string source;
  std::string f_fake = "0.01,0.1,0.2,0.3,0.4";
  std::string f_copy = "0.01,0.02,0.05,0.1,0.2,0.25,0.3";
  std::string sizes;
  bool decimate = false;
  bool baselines = false;
  std::vector<std::string> external;
  double external_threshold = 0.0;
};

int cmd_grid(const Common& c, const FitArgs& f, const ScoreArgs& s, const GridArgs& g) {
  const DataMatrix source = load(c, g.source);
  GridSpec spec;
  spec.f_fakes = parse_list(g.f_fake, "--f-fake");
  spec.f_copies = parse_list(g.f_copy, "--f-copy");
  spec.seed = derive_seed(c.seed, "grid");
  spec.metric = metric_from_string(c.metric);
  SplitSpec sp{derive_seed(c.seed, "split"), source.rows() / 3, source.rows() / 3, source.rows() / 3};
  if (!g.sizes.empty()) {
    const auto v = parse_list(g.sizes, "--split-sizes");
    if (v.size() != 3) throw ValidationError("--split-sizes needs three counts");
    sp.n_train = static_cast<std::size_t>(v[0]);
    sp.n_test = static_cast<std::size_t>(v[1]);
    sp.n_synth = static_cast<std::size_t>(v[2]);
  }
  ScoreArgs plain = s;
  plain.decimate = false;
  const PrivetConfig cfg = config_of(c, f, plain);
  std::vector<std::pair<std::string, Scorer>> scorers;
  auto privet_scorer = [](PrivetConfig pc) {
    return [pc](const GridCellInput& in) {
      const PrivacyReport r = run_privet(in.train, in.test, in.synth, pc);
      ScorerOutput o;
      for (const auto& x : r.samples) o.flags.push_back(x.leak);
      return o;
    };
  };
  scorers.emplace_back("privet", privet_scorer(cfg));
  if (g.decimate) {
    PrivetConfig dc = cfg;
    dc.decimate = true;
    scorers.emplace_back("privet_decimated", privet_scorer(dc));
  }
  if (g.baselines) {
    const Metric metric = spec.metric;
    scorers.emplace_back("authenticity", [metric](const GridCellInput& in) {
      const BaselineResult b = authenticity_flags(in.train, in.synth, metric);
      return ScorerOutput{b.flags, b.value};
    });
    const std::uint64_t seed = derive_seed(c.seed, "aats");
    scorers.emplace_back("aats_privacy_loss", [metric, seed](const GridCellInput& in) {
      const BaselineResult b = aats_privacy_loss(in.train, in.test, in.synth, metric, {true, seed});
      return ScorerOutput{{}, b.value};
    });
  }
  // NAME=TEMPLATE with {f_fake} and {f_copy} placeholders; rows scoring at
  // or above the threshold are flagged.
  for (const auto& e : g.external) {
    const auto eq = e.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--external needs NAME=TEMPLATE");
    const std::string name = e.substr(0, eq), templ = e.substr(eq + 1);
    const double thr = g.external_threshold;
    scorers.emplace_back(name, [templ, thr](const GridCellInput& in) {
      std::string p = templ;
      auto sub = [&](const std::string& key, double v) {
        for (auto pos = p.find(key); pos != std::string::npos; pos = p.find(key))
          p.replace(pos, key.size(), format_double(v));
      };
      sub("{f_fake}", in.f_fake);
      sub("{f_copy}", in.f_copy);
      const auto scores = load_external_scores(p, in.synth.rows());
      ScorerOutput o;
      for (double v : scores) o.flags.push_back(v >= thr);
      return o;
    });
  }
  const GridResult res = run_grid(source, spec, sp, scorers);
  const fs::path dir = out_dir(c);
  emit_grid(res, dir);
  const auto errors = std::count_if(res.cells.begin(), res.cells.end(),
                                    [](const GridCell& cell) { return !cell.error.empty(); });
  summary({{"command", "grid"},
           {"cells", std::to_string(res.cells.size())},
           {"scorers", std::to_string(res.scorer_names.size())},
           {"errors", std::to_string(errors)},
           {"out", dir.string()}});
  return 0;
}

struct BaselineArgs {
  std::string train, test, synth;
  std::string name = "all";
  bool subsample = false;
};

int cmd_baseline(const Common& c, const BaselineArgs& b) {
  const Metric metric = metric_from_string(c.metric);
  const DataMatrix train = load(c, b.train), synth = load(c, b.synth);
  const fs::path dir = out_dir(c);
  nlohmann::json j;
  std::vector<std::pair<std::string, std::string>> kv = {{"command", "baseline"}};
  if (b.name == "authenticity" || b.name == "all") {
    const BaselineResult r = authenticity_flags(train, synth, metric);
    std::ostringstream os;
    os << "synth_row,flag\n";
    for (std::size_t i = 0; i < r.flags.size(); ++i) os << i << ',' << (r.flags[i] ? 1 : 0) << '\n';
    write_text_file(dir / "authenticity.csv", os.str());
    j["in_auth"] = r.value;
    kv.push_back({"in_auth", num(r.value)});
  }
  if (b.name == "aats" || b.name == "all") {
    if (b.test.empty()) throw ValidationError("the aats baseline needs --test");
    const BaselineResult r = aats_privacy_loss(train, load(c, b.test), synth, metric,
                                               {b.subsample, derive_seed(c.seed, "aats")});
    j["aats_privacy_loss"] = json_number(r.value);
    kv.push_back({"privacy_loss", num(r.value)});
  }
  write_text_file(dir / "baseline.json", j.dump(2) + "\n");
  kv.push_back({"out", dir.string()});
  summary(kv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"Privacy leak detection for synthetic data from NN-distance tail statistics"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Common common;
  FitArgs fit_args;
  ScoreArgs score_args;

  auto* score = app.add_subcommand("score", "Score a synthetic set against train and test");
  add_common(score, common);
  add_fit_args(score, fit_args);
  add_score_args(score, score_args, true);

  auto* ecdf = app.add_subcommand("ecdf", "Three NN-distance eCDFs with the tail fit");
  add_common(ecdf, common);
  add_fit_args(ecdf, fit_args);
  add_score_args(ecdf, score_args, false);

  FitCmdArgs fit_cmd;
  auto* fit = app.add_subcommand("fit", "Fit the NN-distance tail law");
  add_common(fit, common);
  add_fit_args(fit, fit_args);
  fit->add_option("--reference", fit_cmd.reference, "Reference matrix")->required();
  fit->add_option("--query", fit_cmd.query, "Query matrix (default: reference, self excluded)");

  GofArgs gof_args;
  auto* gof = app.add_subcommand("gof", "Goodness-of-fit diagnostics of the tail fit");
  add_common(gof, common);
  add_fit_args(gof, fit_args);
  gof->add_option("--reference", gof_args.reference, "Reference matrix")->required();
  gof->add_option("--n-bootstrap", gof_args.n_bootstrap, "Bootstrap replicates")
      ->check(CLI::PositiveNumber);
  gof->add_option("--q-min", gof_args.q_min, "Smallest q of the P-P ribbon");
  gof->add_option("--q-max", gof_args.q_max, "Largest q of the P-P ribbon");
  gof->add_option("--n-q", gof_args.n_q, "Number of q values in the ribbon")
      ->check(CLI::PositiveNumber);
  gof->add_option("--splits", gof_args.splits, "Random half splits for split consistency");

  AttackArgs attack_args;
  auto* attack = app.add_subcommand("attack", "Membership attack on a reference set");
  add_common(attack, common);
  add_fit_args(attack, fit_args);
  attack->add_option("--reference", attack_args.reference, "Reference matrix (members and non-members)")
      ->required();
  attack->add_option("--synth", attack_args.synth, "Synthetic matrix")->required();
  attack->add_option("--labels", attack_args.labels, "CSV of 0/1 membership labels, one per row");
  attack->add_option("--memorized-fraction", attack_args.memorized_fraction,
                     "Known memorized fraction of members, for the ideal curve");

  LeakArgs leak_args;
  auto* leakgen = app.add_subcommand("leakgen", "Copy bits from train NNs into synthetic rows");
  add_common(leakgen, common);
  leakgen->add_option("--train", leak_args.train, "Train matrix")->required();
  leakgen->add_option("--synth", leak_args.synth, "Synthetic matrix")->required();
  leakgen->add_option("--f-fake", leak_args.f_fake, "Fraction of leaked synthetic rows")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  leakgen->add_option("--f-copy", leak_args.f_copy, "Fraction of copied features")
      ->required()
      ->check(CLI::Range(0.0, 1.0));

  GenArgs gen_args;
  auto* generate = app.add_subcommand("generate", "Synthetic SNP-like binary population");
  add_common(generate, common);
  generate->add_option("--rows", gen_args.pop.n_rows, "Rows")->check(CLI::PositiveNumber);
  generate->add_option("--cols", gen_args.pop.n_cols, "Binary features")->check(CLI::PositiveNumber);
  generate->add_option("--block", gen_args.pop.block, "Haplotype block length")->check(CLI::PositiveNumber);
  generate->add_option("--founders", gen_args.pop.founders, "Founder haplotypes")
      ->check(CLI::PositiveNumber);
  generate->add_option("--mutation", gen_args.pop.mutation, "Per-bit flip rate")
      ->check(CLI::Range(0.0, 1.0));
  generate->add_option("--mutation-max", gen_args.pop.mutation_max,
                       "Upper per-row flip rate (log-uniform between the two)")
      ->check(CLI::Range(0.0, 1.0));
  generate->add_option("--split-sizes", gen_args.sizes, "Write train,test,synth blocks of these sizes");

  GridArgs grid_args;
  auto* grid = app.add_subcommand("grid", "Controlled-leak grid over f_fake and f_copy");
  add_common(grid, common);
  add_fit_args(grid, fit_args);
  grid->add_option("--source", grid_args.source, "Source matrix to split")->required();
  grid->add_option("--f-fake", grid_args.f_fake, "Comma-separated f_fake values");
  grid->add_option("--f-copy", grid_args.f_copy, "Comma-separated f_copy values");
  grid->add_option("--split-sizes", grid_args.sizes, "train,test,synth sizes (default thirds)");
  grid->add_option("--tau", score_args.tau, "Leak threshold on delta_pi (log10)");
  grid->add_flag("--decimate", grid_args.decimate, "Also score with decimation");
  grid->add_flag("--baselines", grid_args.baselines, "Also run the authenticity and AA baselines");
  grid->add_option("--external", grid_args.external,
                   "NAME=TEMPLATE external score CSVs; {f_fake} and {f_copy} are substituted")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  grid->add_option("--external-threshold", grid_args.external_threshold,
                   "External scores at or above this are flagged");

  BaselineArgs base_args;
  auto* baseline = app.add_subcommand("baseline", "Authenticity and adversarial-accuracy baselines");
  add_common(baseline, common);
  baseline->add_option("--train", base_args.train, "Train matrix")->required();
  baseline->add_option("--test", base_args.test, "Test matrix (aats only)");
  baseline->add_option("--synth", base_args.synth, "Synthetic matrix")->required();
  baseline->add_option("--name", base_args.name, "authenticity, aats or all")
      ->check(CLI::IsMember({"authenticity", "aats", "all"}));
  baseline->add_flag("--subsample", base_args.subsample,
                     "Subsample to equal sizes instead of failing");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (common.threads > 0) omp_set_num_threads(common.threads);
    if (*score) return cmd_score(common, fit_args, score_args);
    if (*ecdf) return cmd_ecdf(common, fit_args, score_args);
    if (*fit) return cmd_fit(common, fit_args, fit_cmd);
    if (*gof) return cmd_gof(common, fit_args, gof_args);
    if (*attack) return cmd_attack(common, fit_args, attack_args);
    if (*leakgen) return cmd_leakgen(common, leak_args);
    if (*generate) return cmd_generate(common, gen_args);
    if (*grid) return cmd_grid(common, fit_args, score_args, grid_args);
    if (*baseline) return cmd_baseline(common, base_args);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
