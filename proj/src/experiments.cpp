#include "privet/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "privet/error.hpp"
#include "privet/rng.hpp"
#include "privet/svg.hpp"

namespace privet {

DataMatrix generate_population(const PopulationSpec& spec, std::uint64_t seed) {
  if (spec.block == 0 || spec.founders == 0)
    throw ValidationError("population block and founder counts must be positive");
  if (!(spec.mutation >= 0.0 && spec.mutation <= 1.0))
    throw ValidationError("mutation rate must lie in [0, 1]");
  if (!(spec.mutation_max <= 1.0))
    throw ValidationError("maximum mutation rate must be at most 1");
  const bool spread = spec.mutation_max > spec.mutation && spec.mutation > 0.0;
  Xoshiro256 frng(derive_seed(seed, "population.founders"));
  std::vector<double> freq(spec.n_cols);
  for (double& f : freq) f = spec.freq_min + (spec.freq_max - spec.freq_min) * frng.uniform();
  DataMatrix founders = DataMatrix::zeros_binary(spec.founders, spec.n_cols);
  for (std::size_t h = 0; h < spec.founders; ++h)
    for (std::size_t j = 0; j < spec.n_cols; ++j)
      if (frng.uniform() < freq[j]) founders.set_bit(h, j, true);

  DataMatrix out = DataMatrix::zeros_binary(spec.n_rows, spec.n_cols);
  Xoshiro256 rng(derive_seed(seed, "population.rows"));
  for (std::size_t i = 0; i < spec.n_rows; ++i) {
    // per-row divergence, log-uniform in [mutation, mutation_max]
    const double rate = spread ? spec.mutation * std::pow(spec.mutation_max / spec.mutation,
                                                          rng.uniform())
                               : spec.mutation;
    for (std::size_t j0 = 0; j0 < spec.n_cols; j0 += spec.block) {
      const std::size_t h = rng.below(spec.founders);
      const std::size_t j1 = std::min(spec.n_cols, j0 + spec.block);
      for (std::size_t j = j0; j < j1; ++j) {
        bool v = founders.bit(h, j);
        if (rate > 0.0 && rng.uniform() < rate) v = !v;
        if (v) out.set_bit(i, j, true);
      }
    }
  }
  return out;
}

DataMatrix generate_gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed,
                             double scale) {
  Xoshiro256 rng(seed);
  RowMatrixXd v(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = 0; j < v.cols(); ++j) v(i, j) = scale * rng.normal();
  return DataMatrix::from_dense(std::move(v));
}

std::size_t GroundTruth::positives() const {
  return static_cast<std::size_t>(std::count(leak.begin(), leak.end(), true));
}

Injection inject_leaks(const DataMatrix& train, const DataMatrix& synth, const LeakSpec& spec,
                       Metric metric) {
  if (!train.is_binary() || !synth.is_binary())
    throw ValidationError("leak injection needs binary matrices");
  if (train.cols() != synth.cols()) throw ValidationError("train and synth widths differ");
  if (!(spec.f_fake >= 0.0 && spec.f_fake <= 1.0 && spec.f_copy >= 0.0 && spec.f_copy <= 1.0))
    throw ValidationError("f_fake and f_copy must lie in [0, 1]");
  const std::size_t M = synth.rows(), D = synth.cols();
  const auto k = static_cast<std::size_t>(std::floor(spec.f_fake * static_cast<double>(M) + 1e-9));
  const auto c = static_cast<std::size_t>(std::floor(spec.f_copy * static_cast<double>(D) + 1e-9));

  Injection inj{synth, {std::vector<bool>(M, false), std::vector<std::optional<std::size_t>>(M)},
                k > 0 && c == 0};
  if (k == 0) return inj;

  Xoshiro256 row_rng(derive_seed(spec.seed, "injection.rows"));
  std::vector<std::size_t> rows = sample_without_replacement(M, k, row_rng);
  std::sort(rows.begin(), rows.end());
  const DataMatrix chosen = synth.select_rows(rows);
  const Neighbors nb = nearest_neighbors(chosen, train, metric, false);

  Xoshiro256 pos_rng(derive_seed(spec.seed, "injection.positions"));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t row = rows[i], src = nb.index[i];
    for (std::size_t j : sample_without_replacement(D, c, pos_rng))
      inj.synth.set_bit(row, j, train.bit(src, j));
    inj.truth.leak[row] = true;
    inj.truth.source[row] = src;
  }
  return inj;
}

Mixture copycat_mix(const DataMatrix& train, const DataMatrix& synth, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("beta must lie in [0, 1]");
  if (train.cols() != synth.cols() || train.dtype() != synth.dtype())
    throw ValidationError("train and synth must have the same dtype and width");
  const std::size_t N = synth.rows();
  const auto k = static_cast<std::size_t>(std::floor(beta * static_cast<double>(N) + 1e-9));
  if (k > train.rows()) throw ValidationError("floor(beta N) exceeds the number of train rows");
  Mixture mx;
  mx.truth.leak.assign(N, false);
  mx.truth.source.assign(N, std::nullopt);
  for (std::size_t i = 0; i < k; ++i) {
    mx.truth.leak[i] = true;
    mx.truth.source[i] = i;
  }
  if (k == 0)
    mx.mixed = synth;
  else if (k == N)
    mx.mixed = train.head(N);
  else
    mx.mixed = DataMatrix::stack(train.head(k), synth.head(N - k));
  return mx;
}

std::optional<double> Confusion::precision() const {
  if (tp + fp == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

std::optional<double> Confusion::recall() const {
  if (tp + fn == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

std::optional<double> Confusion::f1() const {
  const auto p = precision(), r = recall();
  if (!p || !r || *p + *r == 0.0) return std::nullopt;
  return 2.0 * *p * *r / (*p + *r);
}

Confusion confusion(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  if (predicted.size() != truth.size()) throw ValidationError("prediction/truth length mismatch");
  Confusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] && truth[i]) ++c.tp;
    else if (predicted[i]) ++c.fp;
    else if (truth[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

std::vector<PrPoint> ideal_pr_curve(std::size_t n_pos, std::size_t n_total,
                                    double memorized_fraction, std::size_t n_points) {
  std::vector<PrPoint> out;
  if (n_pos == 0 || n_total == 0 || n_points < 2) return out;
  const double P = static_cast<double>(n_pos), N = static_cast<double>(n_total);
  const double found = std::clamp(memorized_fraction, 0.0, 1.0) * P;
  const double rest = N - found, rest_pos = P - found;
  for (std::size_t i = 0; i < n_points; ++i) {
    // selected count goes from 1 to N
    const double sel = 1.0 + (N - 1.0) * static_cast<double>(i) / static_cast<double>(n_points - 1);
    double tp;
    if (sel <= found)
      tp = sel;
    else
      tp = found + (sel - found) * (rest > 0 ? rest_pos / rest : 0.0);
    out.push_back({sel, tp / sel, tp / P});
  }
  return out;
}

PrCurve pr_curve(const std::vector<double>& scores, const std::vector<bool>& truth,
                 std::optional<double> memorized_fraction) {
  if (scores.size() != truth.size()) throw ValidationError("score/truth length mismatch");
  PrCurve c;
  const std::size_t n = scores.size();
  const auto P = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::size_t tp = 0, sel = 0;
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (truth[order[j]]) ++tp;
      ++sel;
      ++j;
    }
    const double prec = static_cast<double>(tp) / static_cast<double>(sel);
    const double rec = P ? static_cast<double>(tp) / static_cast<double>(P) : 0.0;
    c.points.push_back({scores[order[i]], prec, rec});
    ap += (rec - prev_recall) * prec;
    prev_recall = rec;
    i = j;
  }
  if (P > 0 && P < n) c.auc = ap;
  if (memorized_fraction) c.ideal = ideal_pr_curve(P, n, *memorized_fraction);
  return c;
}

GridResult run_grid(const DataMatrix& source, const GridSpec& grid, const SplitSpec& split_spec,
                    const std::vector<std::pair<std::string, Scorer>>& scorers) {
  GridResult res;
  for (const auto& [name, fn] : scorers) res.scorer_names.push_back(name);
  for (double ff : grid.f_fakes)
    for (double fc : grid.f_copies) {
      GridCell cell;
      cell.f_fake = ff;
      cell.f_copy = fc;
      res.cells.push_back(std::move(cell));
    }
  const Split sp = split(source, split_spec);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(res.cells.size()); ++ci) {
    GridCell& cell = res.cells[static_cast<std::size_t>(ci)];
    try {
      const LeakSpec ls{cell.f_fake, cell.f_copy,
                        derive_seed(grid.seed, "injection", static_cast<std::uint64_t>(ci))};
      const Injection inj = inject_leaks(sp.train, sp.synth, ls, grid.metric);
      const GridCellInput in{sp.train, sp.test, inj.synth, inj.truth, cell.f_fake, cell.f_copy,
                             static_cast<std::size_t>(ci)};
      for (const auto& [name, fn] : scorers) {
        const ScorerOutput out = fn(in);
        // global-only scorers leave flags empty
        if (!out.flags.empty()) {
          cell.confusion[name] = confusion(out.flags, inj.truth.leak);
          cell.n_flagged[name] =
              static_cast<std::size_t>(std::count(out.flags.begin(), out.flags.end(), true));
        }
        if (out.global_value) cell.global_value[name] = *out.global_value;
      }
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  }
  return res;
}

namespace {

std::string fmt(std::optional<double> v) {
  if (!v) return "nan";
  std::ostringstream os;
  os.precision(10);
  os << *v;
  return os.str();
}

}  // namespace

void emit_grid(const GridResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir / "map.csv");
  if (!csv) throw IoError("cannot write " + (out_dir / "map.csv").string());
  csv << "f_fake,f_copy,metric,value\n";
  const std::vector<std::string> metrics = {"npl", "precision", "recall", "f1",
                                            "tp",  "fp",        "tn",     "fn"};
  auto value = [](const GridCell& c, const std::string& scorer,
                  const std::string& metric) -> std::optional<double> {
    if (!c.error.empty()) return std::nullopt;
    if (metric == "global") {
      const auto g = c.global_value.find(scorer);
      if (g == c.global_value.end()) return std::nullopt;
      return g->second;
    }
    const auto it = c.confusion.find(scorer);
    if (it == c.confusion.end()) return std::nullopt;
    const Confusion& cf = it->second;
    if (metric == "npl") return static_cast<double>(c.n_flagged.at(scorer));
    if (metric == "precision") return cf.precision();
    if (metric == "recall") return cf.recall();
    if (metric == "f1") return cf.f1();
    if (metric == "tp") return static_cast<double>(cf.tp);
    if (metric == "fp") return static_cast<double>(cf.fp);
    if (metric == "tn") return static_cast<double>(cf.tn);
    return static_cast<double>(cf.fn);
  };
  for (const auto& scorer : result.scorer_names) {
    std::vector<std::string> names;
    const bool has_flags = std::any_of(result.cells.begin(), result.cells.end(),
                                       [&](const GridCell& c) { return c.confusion.count(scorer); });
    const bool has_global = std::any_of(result.cells.begin(), result.cells.end(),
                                        [&](const GridCell& c) { return c.global_value.count(scorer); });
    if (has_flags) names = metrics;
    if (has_global) names.push_back("global");
    for (const auto& metric : names) {
      std::vector<std::optional<double>> vals;
      // one map per scorer/metric pair as well, one row per cell
      const auto single_path = out_dir / (scorer + "_" + metric + ".csv");
      std::ofstream single(single_path);
      if (!single) throw IoError("cannot write " + single_path.string());
      single << "f_fake,f_copy,metric,value\n";
      for (const auto& c : result.cells) {
        std::ostringstream row;
        row << c.f_fake << ',' << c.f_copy << ',' << scorer << '.' << metric << ','
            << fmt(value(c, scorer, metric)) << '\n';
        csv << row.str();
        single << row.str();
        vals.push_back(value(c, scorer, metric));
      }
      std::vector<double> ff, fc;
      for (const auto& c : result.cells) {
        if (std::find(ff.begin(), ff.end(), c.f_fake) == ff.end()) ff.push_back(c.f_fake);
        if (std::find(fc.begin(), fc.end(), c.f_copy) == fc.end()) fc.push_back(c.f_copy);
      }
      write_heatmap_svg(out_dir / (scorer + "_" + metric + ".svg"), scorer + " " + metric, fc,
                        ff, vals, "f_copy", "f_fake");
    }
  }
  std::ofstream err(out_dir / "errors.csv");
  err << "f_fake,f_copy,error\n";
  for (const auto& c : result.cells)
    if (!c.error.empty()) err << c.f_fake << ',' << c.f_copy << ",\"" << c.error << "\"\n";
}

std::vector<double> load_external_scores(const std::filesystem::path& path, std::size_t n_rows) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> scores(n_rows, std::numeric_limits<double>::quiet_NaN());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line_no == 1) continue;  // header
    std::istringstream ls(line);
    std::size_t row;
    char comma;
    double score;
    if (!(ls >> row >> comma >> score) || comma != ',')
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": bad score row");
    if (row >= n_rows) throw ValidationError(path.string() + ": synth_row out of range");
    scores[row] = score;
  }
  for (double s : scores)
    if (std::isnan(s)) throw ValidationError(path.string() + ": missing score rows");
  return scores;
}

}  // namespace privet
