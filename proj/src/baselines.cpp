#include "privet/baselines.hpp"

#include <algorithm>

#include "privet/error.hpp"
#include "privet/rng.hpp"

namespace privet {

namespace {

void check_pair(const DataMatrix& a, const DataMatrix& b) {
  if (a.rows() == 0 || b.rows() == 0) throw ValidationError("baseline inputs must be non-empty");
  if (a.cols() != b.cols()) throw ValidationError("baseline inputs have different widths");
  if (a.dtype() != b.dtype()) throw ValidationError("baseline inputs have different dtypes");
}

double fraction_greater(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a[i] > b[i]) ++n;
  return static_cast<double>(n) / static_cast<double>(a.size());
}

DataMatrix subsample_rows(const DataMatrix& m, std::size_t k, std::uint64_t seed) {
  if (m.rows() == k) return m;
  Xoshiro256 rng(seed);
  std::vector<std::size_t> rows = sample_without_replacement(m.rows(), k, rng);
  std::sort(rows.begin(), rows.end());
  return m.select_rows(rows);
}

}  // namespace

BaselineResult authenticity_flags(const DataMatrix& train, const DataMatrix& synth,
                                  Metric metric) {
  check_pair(train, synth);
  if (train.rows() < 2) throw ValidationError("authenticity needs at least two train rows");
  const Neighbors s_to_t = nearest_neighbors(synth, train, metric, false);
  const Neighbors t_to_t = nearest_neighbors(train, train, metric, true);
  BaselineResult r;
  r.name = "authenticity";
  r.flags.resize(synth.rows());
  std::size_t count = 0;
  for (std::size_t s = 0; s < synth.rows(); ++s) {
    const std::size_t t = s_to_t.index[s];
    r.flags[s] = s_to_t.distance[static_cast<Eigen::Index>(s)] <
                 t_to_t.distance[static_cast<Eigen::Index>(t)];
    if (r.flags[s]) ++count;
  }
  r.value = static_cast<double>(count);
  return r;
}

double adversarial_accuracy(const DataMatrix& reference, const DataMatrix& synth, Metric metric) {
  check_pair(reference, synth);
  if (reference.rows() < 2 || synth.rows() < 2)
    throw ValidationError("adversarial accuracy needs at least two rows per set");
  const Neighbors rs = nearest_neighbors(reference, synth, metric, false);
  const Neighbors rr = nearest_neighbors(reference, reference, metric, true);
  const Neighbors sr = nearest_neighbors(synth, reference, metric, false);
  const Neighbors ss = nearest_neighbors(synth, synth, metric, true);
  return 0.5 * (fraction_greater(rs.distance, rr.distance) +
                fraction_greater(sr.distance, ss.distance));
}

BaselineResult aats_privacy_loss(const DataMatrix& train, const DataMatrix& test,
                                 const DataMatrix& synth, Metric metric,
                                 const AatsOptions& options) {
  check_pair(train, synth);
  check_pair(test, synth);
  const std::size_t n = std::min({train.rows(), test.rows(), synth.rows()});
  const bool equal = train.rows() == n && test.rows() == n && synth.rows() == n;
  if (!equal && !options.subsample)
    throw ValidationError("privacy loss needs |train| == |test| == |synth| (got " +
                          std::to_string(train.rows()) + ", " + std::to_string(test.rows()) +
                          ", " + std::to_string(synth.rows()) + "); enable subsampling");
  const DataMatrix tr = subsample_rows(train, n, derive_seed(options.seed, "aats.train"));
  const DataMatrix te = subsample_rows(test, n, derive_seed(options.seed, "aats.test"));
  const DataMatrix sy = subsample_rows(synth, n, derive_seed(options.seed, "aats.synth"));
  BaselineResult r;
  r.name = "aats_privacy_loss";
  r.value = adversarial_accuracy(te, sy, metric) - adversarial_accuracy(tr, sy, metric);
  return r;
}

}  // namespace privet
