#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "privet/data.hpp"
#include "privet/evt.hpp"
#include "privet/experiments.hpp"
#include "privet/knn.hpp"
#include "privet/orderstats.hpp"

namespace privet {

enum class Regime { underfitting, well_fitted, overfitting };
enum class FlagScore { delta_pi, delta_p };

const char* to_string(Regime r);
const char* to_string(FlagScore f);
FlagScore flag_score_from_string(const std::string& s);

struct PrivetConfig {
  Metric metric = Metric::hamming;
  TailWindow window;
  FamilyChoice family = FamilyChoice::best;
  Likelihood likelihood = Likelihood::censored;
  double tau = kDefaultTau;
  FlagScore flag_score = FlagScore::delta_pi;
  double tau_delta_p = kDefaultDeltaPTau;
  bool decimate = false;
  bool rescale = true;
  double regime_tolerance = 0.05;
};

// Median log10 quantile offsets of the synth-to-train and synth-to-test
// sets against train-to-train, over the tail window's quantile levels.
struct RegimeEvidence {
  Regime regime = Regime::well_fitted;
  double offset_train = 0.0;
  double offset_test = 0.0;  // nan without a test set
  double tolerance = 0.05;
};

RegimeEvidence classify_regime(const NNDistanceSet& d_trtr, const NNDistanceSet& d_str,
                               const NNDistanceSet& d_ste, double tolerance = 0.05,
                               const TailWindow& window = {});
RegimeEvidence classify_regime(const NNDistanceSet& d_trtr, const NNDistanceSet& d_str,
                               double tolerance = 0.05, const TailWindow& window = {});

struct GlobalIndices {
  std::optional<double> mean_delta_pi;
  std::size_t npl = 0;
  std::size_t n_undefined = 0;  // samples whose delta_pi is undefined
  std::vector<long long> n_overfit_curve;
  std::vector<long long> n_pleaks_curve;
  long long max_n_overfit = 0;
  long long max_n_pleaks = 0;
  std::size_t decimation_rounds = 0;
};

struct Timing {
  double knn_ms = 0, fit_ms = 0, score_ms = 0, decimate_ms = 0;
};

struct PrivacyReport {
  PrivetConfig config;
  bool has_test = false;
  std::size_t n_train = 0, n_test = 0, n_synth = 0;
  TailFit fit;                     // on train-to-train
  TailFit train_fit;               // rescaled to |train|
  std::optional<TailFit> test_fit; // rescaled to |test|
  RegimeEvidence regime;
  std::vector<SampleScore> samples;  // indexed by synthetic row
  std::vector<bool> pleaks_flag;
  GlobalIndices global;
  std::vector<std::string> warnings;
  Eigen::VectorXd ecdf_trtr, ecdf_str, ecdf_ste;  // sorted NN distances
  Timing timing;
};

PrivacyReport run_privet(const DataMatrix& train, const DataMatrix& test, const DataMatrix& synth,
                     const PrivetConfig& config = {});
// Overfitting-only mode without a test reference.
PrivacyReport run_privet(const DataMatrix& train, const DataMatrix& synth,
                     const PrivetConfig& config = {});

// Scoring from precomputed NN sets. d_ste may be absent.
PrivacyReport privet_from_distances(const NNDistanceSet& d_trtr, const NNDistanceSet& d_str,
                                    const std::optional<NNDistanceSet>& d_ste,
                                    const PrivetConfig& config);

// Heuristic: the log-log hazard plot of the window bends by more than a
// factor 2 in slope between its lower and upper halves.
std::optional<std::string> multimodal_warning(const Eigen::VectorXd& sorted,
                                              const TailWindow& window);

struct MembershipResult {
  std::vector<double> scores;  // log10 pi per reference row, lower = more likely member
  std::optional<std::vector<bool>> labels;
  std::optional<PrCurve> pr;
  TailFit fit;
  std::size_t n_reference = 0, n_members = 0, n_synth = 0;
};

MembershipResult membership_attack(const DataMatrix& reference,
                                   const std::optional<std::vector<bool>>& labels,
                                   const DataMatrix& synth, const PrivetConfig& config = {},
                                   std::optional<double> memorized_fraction = std::nullopt);

// PR point with the most true positives in excess of a random selection of
// the same size, i.e. the largest recall * (1 - prevalence / precision). This
// is the max of TPR - FPR; past it each extra call is no better than a coin
// weighted by the prevalence. The prevalence is the precision of the last
// point (everything selected). Empty curve: nullopt.
std::optional<PrPoint> pr_knee(const PrCurve& curve);

// samples.csv, summary.json, ecdf.csv and ecdf.svg.
void emit_report(const PrivacyReport& report, const std::filesystem::path& out_dir,
                 bool include_timing = false);

std::string ecdf_svg(const PrivacyReport& report);

}  // namespace privet
