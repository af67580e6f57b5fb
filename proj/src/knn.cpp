#include "privet/knn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "privet/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace privet {

namespace {

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int thread_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

void validate(const DataMatrix& query, const DataMatrix& reference, Metric metric,
              bool exclude_self) {
  if (query.cols() != reference.cols())
    throw ValidationError("dimension mismatch: " + std::to_string(query.cols()) + " vs " +
                          std::to_string(reference.cols()) + " columns");
  if (query.dtype() != reference.dtype())
    throw ValidationError("query and reference have different dtypes");
  if (metric == Metric::hamming && !query.is_binary())
    throw ValidationError("hamming metric requires binary data");
  if (metric == Metric::euclidean && query.is_binary())
    throw ValidationError("euclidean metric requires float data");
  if (exclude_self) {
    if (&query != &reference && !(query == reference))
      throw ValidationError("exclude_self requires query and reference to be the same set");
    if (query.rows() < 2) throw ValidationError("exclude_self needs at least two rows");
  }
}

inline std::uint64_t popcount_xor(const std::uint64_t* a, const std::uint64_t* b, std::size_t n) {
  std::uint64_t acc = 0;
  for (std::size_t k = 0; k < n; ++k) acc += static_cast<std::uint64_t>(std::popcount(a[k] ^ b[k]));
  return acc;
}

// XOR+popcount in chunks, bailing out once the partial count reaches the
// current best (a later index can only win with a strictly smaller value).
inline std::uint64_t hamming_bounded(const std::uint64_t* a, const std::uint64_t* b,
                                     std::size_t words, std::uint64_t best) {
  constexpr std::size_t kChunk = 32;
  std::uint64_t acc = 0;
  std::size_t k = 0;
  for (; k + kChunk <= words; k += kChunk) {
    acc += popcount_xor(a + k, b + k, kChunk);
    if (acc >= best) return acc;
  }
  return acc + popcount_xor(a + k, b + k, words - k);
}

void hamming_kernel(const DataMatrix& q, const DataMatrix& r, bool exclude_self, Neighbors& out) {
  constexpr std::size_t kQueryBlock = 8;
  const std::size_t nq = q.rows(), nr = r.rows(), w = q.words_per_row();
  const std::uint64_t* qb = q.packed().data();
  const std::uint64_t* rb = r.packed().data();
  const auto n_blocks = static_cast<std::ptrdiff_t>((nq + kQueryBlock - 1) / kQueryBlock);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t blk = 0; blk < n_blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * kQueryBlock;
    const std::size_t i1 = std::min(nq, i0 + kQueryBlock);
    std::uint64_t best[kQueryBlock];
    std::size_t arg[kQueryBlock];
    std::fill(best, best + kQueryBlock, std::numeric_limits<std::uint64_t>::max());
    std::fill(arg, arg + kQueryBlock, std::size_t{0});
    for (std::size_t j = 0; j < nr; ++j) {
      const std::uint64_t* rj = rb + j * w;
      for (std::size_t i = i0; i < i1; ++i) {
        if (exclude_self && i == j) continue;
        const std::size_t s = i - i0;
        const std::uint64_t d = hamming_bounded(qb + i * w, rj, w, best[s]);
        if (d < best[s]) {
          best[s] = d;
          arg[s] = j;
        }
      }
    }
    for (std::size_t i = i0; i < i1; ++i) {
      out.index[i] = arg[i - i0];
      out.distance[static_cast<Eigen::Index>(i)] = static_cast<double>(best[i - i0]);
    }
  }
}

double euclidean_direct(const RowMatrixXd& a, std::size_t i, const RowMatrixXd& b, std::size_t j) {
  const double* x = a.data() + i * static_cast<std::size_t>(a.cols());
  const double* y = b.data() + j * static_cast<std::size_t>(b.cols());
  double s = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double t = x[k] - y[k];
    s += t * t;
  }
  return std::sqrt(s);
}

// Screening state of one query row: an upper bound on its squared NN
// distance and the reference rows whose lower bound does not exceed it.
template <typename Scalar>
struct RowState {
  Scalar upper = std::numeric_limits<Scalar>::infinity();
  std::vector<std::pair<std::size_t, Scalar>> cand;

  void prune() {
    std::erase_if(cand, [this](const auto& c) { return c.second > upper; });
  }
};

// Scan one row of approximate squared distances (Gram block row) into the
// state. tol_j bounds the rounding error of each entry.
template <typename Scalar, typename Row, typename Norms>
void scan_row(RowState<Scalar>& st, const Row& g, Scalar qn, const Norms& rn, Scalar kappa,
              std::size_t j0, std::ptrdiff_t skip) {
  const Eigen::Index n = g.size();
  Scalar hi_min = st.upper;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (k == skip) continue;
    const Scalar a = qn + rn[k] - Scalar(2) * g[k];
    const Scalar tol = kappa * (qn + rn[k]);
    hi_min = std::min(hi_min, a + tol);
  }
  st.upper = hi_min;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (k == skip) continue;
    const Scalar a = qn + rn[k] - Scalar(2) * g[k];
    const Scalar lo = a - kappa * (qn + rn[k]);
    if (lo <= st.upper) st.cand.emplace_back(j0 + static_cast<std::size_t>(k), lo);
  }
  if (st.cand.size() > 64) st.prune();
}

// Blocked Gram-matrix screening in Scalar precision followed by an exact
// double-precision recompute over the surviving candidates. Data is centered
// on the reference mean first so that the norms stay close to the distances.
template <typename Scalar>
void euclidean_kernel(const DataMatrix& query, const DataMatrix& reference, bool self,
                      Neighbors& out) {
  using Mat = RowMatrix<Scalar>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  constexpr Eigen::Index kQB = 256, kRB = 1024;

  const RowMatrixXd& Qd = query.values();
  const RowMatrixXd& Rd = reference.values();
  const Eigen::RowVectorXd mean = Rd.colwise().mean();
  const Mat R = (Rd.rowwise() - mean).template cast<Scalar>();
  Mat q_own;
  if (!self) q_own = (Qd.rowwise() - mean).template cast<Scalar>();
  const Mat& Q = self ? R : q_own;
  const Vec rn = R.rowwise().squaredNorm();
  Vec qn_own;
  if (!self) qn_own = Q.rowwise().squaredNorm();
  const Vec& qn = self ? rn : qn_own;

  const Eigen::Index nq = Q.rows(), nr = R.rows(), d = Q.cols();
  // Deterministic bound on the rounding error of ||q||^2 + ||r||^2 - 2<q,r>
  // relative to ||q||^2 + ||r||^2, including the cast of the inputs.
  const Scalar u = std::numeric_limits<Scalar>::epsilon() / 2;
  const Scalar kappa = Scalar(2 * d + 16) * u;

  const Eigen::Index nqb = (nq + kQB - 1) / kQB, nrb = (nr + kRB - 1) / kRB;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> tasks;
  if (self) {
    // Square blocks so that each unordered block pair is visited once.
    const Eigen::Index nb = (nq + kRB - 1) / kRB;
    for (Eigen::Index I = 0; I < nb; ++I)
      for (Eigen::Index J = I; J < nb; ++J) tasks.emplace_back(I, J);
  } else {
    for (Eigen::Index I = 0; I < nqb; ++I) tasks.emplace_back(I, -1);
  }

  const int nt = thread_count();
  std::vector<std::vector<RowState<Scalar>>> states(
      static_cast<std::size_t>(nt), std::vector<RowState<Scalar>>(static_cast<std::size_t>(nq)));

#pragma omp parallel
  {
    auto& st = states[static_cast<std::size_t>(thread_id())];
    Mat G;
    Mat Gt;
#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(tasks.size()); ++t) {
      const auto [I, J] = tasks[static_cast<std::size_t>(t)];
      if (self) {
        const Eigen::Index i0 = I * kRB, ni = std::min(kRB, nq - i0);
        const Eigen::Index j0 = J * kRB, nj = std::min(kRB, nr - j0);
        G.noalias() = R.middleRows(i0, ni) * R.middleRows(j0, nj).transpose();
        for (Eigen::Index a = 0; a < ni; ++a)
          scan_row(st[static_cast<std::size_t>(i0 + a)], G.row(a), rn[i0 + a],
                   rn.segment(j0, nj), kappa, static_cast<std::size_t>(j0),
                   I == J ? static_cast<std::ptrdiff_t>(a) : -1);
        if (J != I) {
          Gt = G.transpose();
          for (Eigen::Index b = 0; b < nj; ++b)
            scan_row(st[static_cast<std::size_t>(j0 + b)], Gt.row(b), rn[j0 + b],
                     rn.segment(i0, ni), kappa, static_cast<std::size_t>(i0), -1);
        }
      } else {
        const Eigen::Index i0 = I * kQB, ni = std::min(kQB, nq - i0);
        for (Eigen::Index Jb = 0; Jb < nrb; ++Jb) {
          const Eigen::Index j0 = Jb * kRB, nj = std::min(kRB, nr - j0);
          G.noalias() = Q.middleRows(i0, ni) * R.middleRows(j0, nj).transpose();
          for (Eigen::Index a = 0; a < ni; ++a)
            scan_row(st[static_cast<std::size_t>(i0 + a)], G.row(a), qn[i0 + a],
                     rn.segment(j0, nj), kappa, static_cast<std::size_t>(j0), -1);
        }
      }
    }
  }

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(nq); ++i) {
    const auto row = static_cast<std::size_t>(i);
    Scalar upper = std::numeric_limits<Scalar>::infinity();
    for (const auto& s : states) upper = std::min(upper, s[row].upper);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = std::numeric_limits<std::size_t>::max();
    for (const auto& s : states)
      for (const auto& [j, lo] : s[row].cand) {
        if (lo > upper) continue;
        const double dist = euclidean_direct(Qd, row, Rd, j);
        if (dist < best || (dist == best && j < arg)) {
          best = dist;
          arg = j;
        }
      }
    out.index[row] = arg;
    out.distance[i] = best;
  }
}

}  // namespace

const char* to_string(Metric m) { return m == Metric::hamming ? "hamming" : "euclidean"; }

Metric metric_from_string(const std::string& s) {
  if (s == "hamming") return Metric::hamming;
  if (s == "euclidean") return Metric::euclidean;
  throw ValidationError("unknown metric '" + s + "' (expected hamming or euclidean)");
}

NNDistanceSet make_distance_set(const Eigen::VectorXd& per_row, std::string query_label,
                                std::string reference_label, bool exclude_self,
                                std::size_t n_reference) {
  NNDistanceSet s;
  const auto n = static_cast<std::size_t>(per_row.size());
  s.permutation.resize(n);
  std::iota(s.permutation.begin(), s.permutation.end(), std::size_t{0});
  std::stable_sort(s.permutation.begin(), s.permutation.end(),
                   [&](std::size_t a, std::size_t b) { return per_row[a] < per_row[b]; });
  s.rank_of.resize(n);
  s.distances.resize(per_row.size());
  for (std::size_t k = 0; k < n; ++k) {
    s.rank_of[s.permutation[k]] = k;
    s.distances[static_cast<Eigen::Index>(k)] = per_row[s.permutation[k]];
  }
  s.query_label = std::move(query_label);
  s.reference_label = std::move(reference_label);
  s.exclude_self = exclude_self;
  s.n_query = n;
  s.n_reference = n_reference;
  return s;
}

NNDistanceSet subset(const NNDistanceSet& set, const std::vector<bool>& keep) {
  if (keep.size() != set.n_query) throw ValidationError("subset mask length mismatch");
  Eigen::VectorXd per_row(static_cast<Eigen::Index>(std::count(keep.begin(), keep.end(), true)));
  Eigen::Index k = 0;
  for (std::size_t row = 0; row < set.n_query; ++row)
    if (keep[row]) per_row[k++] = set.of_row(row);
  return make_distance_set(per_row, set.query_label, set.reference_label, set.exclude_self,
                           set.n_reference);
}

Neighbors nearest_neighbors(const DataMatrix& query, const DataMatrix& reference, Metric metric,
                            bool exclude_self) {
  validate(query, reference, metric, exclude_self);
  Neighbors out;
  out.index.assign(query.rows(), 0);
  out.distance.resize(static_cast<Eigen::Index>(query.rows()));
  if (metric == Metric::hamming)
    hamming_kernel(query, reference, exclude_self, out);
  else
    euclidean_kernel<float>(query, reference, exclude_self, out);
  return out;
}

NNDistanceSet nn_distances(const DataMatrix& query, const DataMatrix& reference, Metric metric,
                           bool exclude_self, std::string query_label,
                           std::string reference_label) {
  const Neighbors nb = nearest_neighbors(query, reference, metric, exclude_self);
  return make_distance_set(nb.distance, std::move(query_label), std::move(reference_label),
                           exclude_self, reference.rows());
}

NNDistanceSet pairwise_min_profile(const DataMatrix& set, Metric metric, std::string label) {
  std::string ref = label;
  return nn_distances(set, set, metric, true, std::move(label), std::move(ref));
}

double row_distance(const DataMatrix& a, std::size_t i, const DataMatrix& b, std::size_t j,
                    Metric metric) {
  if (metric == Metric::hamming) {
    const auto x = a.packed_row(i), y = b.packed_row(j);
    return static_cast<double>(popcount_xor(x.data(), y.data(), x.size()));
  }
  return euclidean_direct(a.values(), i, b.values(), j);
}

}  // namespace privet
