#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "privet/data.hpp"
#include "privet/knn.hpp"

namespace privet {

// Seeded SNP-like binary population: each row is a mosaic of founder
// haplotypes over blocks of consecutive features, with independent bit
// flips on top. Founder alleles are Bernoulli with per-feature frequency
// drawn uniformly from [freq_min, freq_max].
struct PopulationSpec {
  std::size_t n_rows = 4500;
  std::size_t n_cols = 4096;
  std::size_t block = 64;
  std::size_t founders = 8;
  double mutation = 0.003;
  double mutation_max = 0.03;  // above mutation: per-row rate is log-uniform between the two
  double freq_min = 0.05;
  double freq_max = 0.5;
};

DataMatrix generate_population(const PopulationSpec& spec, std::uint64_t seed);

// Rows of independent N(0, scale^2) features.
DataMatrix generate_gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed,
                             double scale = 1.0);

struct LeakSpec {
  double f_fake = 0.0;
  double f_copy = 0.0;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  std::vector<bool> leak;
  std::vector<std::optional<std::size_t>> source;

  std::size_t positives() const;
};

struct Injection {
  DataMatrix synth;
  GroundTruth truth;
  bool no_op_warning = false;  // f_copy * n_cols < 1 with f_fake > 0
};

// Picks floor(f_fake M) synthetic rows, finds each one's train NN and
// overwrites floor(f_copy n_cols) random positions with the NN's bits.
Injection inject_leaks(const DataMatrix& train, const DataMatrix& synth, const LeakSpec& spec,
                       Metric metric = Metric::hamming);

struct Mixture {
  DataMatrix mixed;
  GroundTruth truth;
};

// First floor(beta N) train rows followed by the first N - floor(beta N)
// synthetic rows, N = |synth|.
Mixture copycat_mix(const DataMatrix& train, const DataMatrix& synth, double beta);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::optional<double> precision() const;
  std::optional<double> recall() const;
  std::optional<double> f1() const;
};

Confusion confusion(const std::vector<bool>& predicted, const std::vector<bool>& truth);

struct PrPoint {
  double threshold;
  double precision;
  double recall;
};

struct PrCurve {
  std::vector<PrPoint> points;  // thresholds ascending (loosening)
  std::optional<double> auc;    // average precision
  std::vector<PrPoint> ideal;   // ideal-classifier overlay
};

// Lower score = more likely positive. Tied scores enter together.
PrCurve pr_curve(const std::vector<double>& scores, const std::vector<bool>& truth,
                 std::optional<double> memorized_fraction = std::nullopt);

// Precision/recall of a ranker that finds all memorized positives first
// and then picks uniformly among the rest.
std::vector<PrPoint> ideal_pr_curve(std::size_t n_pos, std::size_t n_total,
                                    double memorized_fraction, std::size_t n_points = 101);

// Scorer output for one grid cell: per-synthetic-row flag and optional
// continuous score (lower = more suspicious).
struct ScorerOutput {
  std::vector<bool> flags;
  std::optional<double> global_value;
};

struct GridCellInput {
  const DataMatrix& train;
  const DataMatrix& test;
  const DataMatrix& synth;
  const GroundTruth& truth;
  double f_fake = 0.0, f_copy = 0.0;
  std::size_t cell_index = 0;
};

using Scorer = std::function<ScorerOutput(const GridCellInput&)>;

struct GridCell {
  double f_fake = 0.0;
  double f_copy = 0.0;
  std::map<std::string, Confusion> confusion;   // per scorer
  std::map<std::string, std::size_t> n_flagged;  // NPL per scorer
  std::map<std::string, double> global_value;
  std::string error;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::vector<std::string> scorer_names;
};

struct GridSpec {
  std::vector<double> f_fakes;
  std::vector<double> f_copies;
  std::uint64_t seed = 0;
  Metric metric = Metric::hamming;
};

// Per cell: split the source, inject leaks into the synthetic block and run
// every scorer. Failed cells keep their error message.
GridResult run_grid(const DataMatrix& source, const GridSpec& grid, const SplitSpec& split_spec,
                    const std::vector<std::pair<std::string, Scorer>>& scorers);

// Map CSV (f_fake,f_copy,metric,value) plus one heat-map SVG per
// scorer/metric pair.
void emit_grid(const GridResult& result, const std::filesystem::path& out_dir);

// External score CSV with columns synth_row,score.
std::vector<double> load_external_scores(const std::filesystem::path& path, std::size_t n_rows);

}  // namespace privet
