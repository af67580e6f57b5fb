#include <gtest/gtest.h>
#include <omp.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "privet/error.hpp"
#include "privet/knn.hpp"

using namespace privet;

namespace {

std::vector<double> per_row(const NNDistanceSet& d) {
  std::vector<double> out(d.size());
  for (std::size_t row = 0; row < d.size(); ++row) out[row] = d.of_row(row);
  return out;
}

}  // namespace

TEST(Knn, HandCheckedTwoByTwo) {
  const std::vector<std::uint8_t> q = {0, 0, 1, 1}, r = {0, 0, 0, 1};
  const NNDistanceSet d = nn_distances(DataMatrix::from_bits(2, 2, q), DataMatrix::from_bits(2, 2, r),
                                       Metric::hamming);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.distances[0], 0.0);
  EXPECT_EQ(d.distances[1], 1.0);
  EXPECT_EQ(d.permutation, (std::vector<std::size_t>{0, 1}));
}

TEST(Knn, DuplicatePairGivesZero) {
  DataMatrix m = testing_util::random_binary(20, 100, 4);
  for (std::size_t j = 0; j < 100; ++j) m.set_bit(7, j, m.bit(3, j));
  const NNDistanceSet d = nn_distances(m, m, Metric::hamming, true);
  EXPECT_EQ(d.distances[0], 0.0);
  EXPECT_EQ(d.distances[1], 0.0);
  EXPECT_GT(d.distances[2], 0.0);
}

TEST(Knn, MatchesNaiveOracleOnBinary200x64) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DataMatrix q = testing_util::random_binary(200, 64, seed),
                     r = testing_util::random_binary(200, 64, seed + 100);
    EXPECT_EQ(per_row(nn_distances(q, r, Metric::hamming)), oracle::nn_min(q, r, Metric::hamming, false));
    EXPECT_EQ(per_row(nn_distances(q, q, Metric::hamming, true)),
              oracle::nn_min(q, q, Metric::hamming, true));
  }
}

TEST(Knn, MatchesNaiveOracleOnRandomShapes) {
  Xoshiro256 rng(77);
  for (int t = 0; t < 12; ++t) {
    const std::size_t nq = 2 + rng.below(150), nr = 2 + rng.below(150), d = 1 + rng.below(512);
    const bool self = t % 3 == 0;
    const DataMatrix qb = testing_util::random_binary(nq, d, 10 + t, 0.3);
    const DataMatrix rb = self ? qb : testing_util::random_binary(nr, d, 20 + t, 0.3);
    EXPECT_EQ(per_row(nn_distances(qb, rb, Metric::hamming, self)),
              oracle::nn_min(qb, rb, Metric::hamming, self));
    const DataMatrix qf = testing_util::random_float(nq, d, 30 + t);
    const DataMatrix rf = self ? qf : testing_util::random_float(nr, d, 40 + t);
    const auto got = per_row(nn_distances(qf, rf, Metric::euclidean, self));
    const auto want = oracle::nn_min(qf, rf, Metric::euclidean, self);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12 * want[i]);
  }
}

TEST(Knn, NearDuplicateFloatsAreExact) {
  // the norm expansion would cancel here; the recompute step must not
  RowMatrixXd v = RowMatrixXd::Constant(4, 16, 1e4);
  v(1, 3) += 1e-7;
  v(2, 5) -= 3e-6;
  v(3, 0) = -1e4;
  const DataMatrix m = DataMatrix::from_dense(v);
  const auto got = per_row(nn_distances(m, m, Metric::euclidean, true));
  const auto want = oracle::nn_min(m, m, Metric::euclidean, true);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12 * want[i] + 1e-18);
}

TEST(Knn, PairwiseProfile) {
  const std::vector<std::uint8_t> same = {1, 0, 1, 1, 0, 1, 1, 0, 1};
  const NNDistanceSet a = pairwise_min_profile(DataMatrix::from_bits(3, 3, same), Metric::hamming);
  EXPECT_EQ(a.distances, Eigen::Vector3d::Zero());
  std::vector<std::uint8_t> two(20, 0);
  for (int j = 0; j < 5; ++j) two[10 + j] = 1;
  const NNDistanceSet b = pairwise_min_profile(DataMatrix::from_bits(2, 10, two), Metric::hamming);
  EXPECT_EQ(b.distances, Eigen::Vector2d(5, 5));

  const DataMatrix m = testing_util::random_binary(80, 300, 9);
  const NNDistanceSet p = pairwise_min_profile(m, Metric::hamming);
  const NNDistanceSet n = nn_distances(m, m, Metric::hamming, true);
  EXPECT_EQ(p.distances, n.distances);
  EXPECT_EQ(p.permutation, n.permutation);
}

TEST(Knn, StructuralInvariants) {
  const DataMatrix q = testing_util::random_float(90, 20, 1), r = testing_util::random_float(70, 20, 2);
  const NNDistanceSet d = nn_distances(q, r, Metric::euclidean);
  EXPECT_EQ(d.size(), 90u);
  std::vector<std::size_t> sorted_perm = d.permutation;
  std::sort(sorted_perm.begin(), sorted_perm.end());
  for (std::size_t k = 0; k < sorted_perm.size(); ++k) EXPECT_EQ(sorted_perm[k], k);
  for (std::size_t k = 0; k < d.size(); ++k) {
    EXPECT_EQ(d.rank_of[d.permutation[k]], k);
    EXPECT_TRUE(std::isfinite(d.distances[k]));
    EXPECT_GE(d.distances[k], 0.0);
    if (k) EXPECT_LE(d.distances[k - 1], d.distances[k]);
  }
  // no row is closer to a fixed reference row than its reported NN
  for (std::size_t row = 0; row < 90; ++row)
    EXPECT_LE(d.of_row(row), row_distance(q, row, r, 17, Metric::euclidean));
}

TEST(Knn, HammingDistancesAreIntegers) {
  const DataMatrix m = testing_util::random_binary(60, 1000, 5);
  const NNDistanceSet d = nn_distances(m, m, Metric::hamming, true);
  for (Eigen::Index k = 0; k < d.distances.size(); ++k)
    EXPECT_EQ(d.distances[k], std::round(d.distances[k]));
}

TEST(Knn, ThreadCountDoesNotChangeOutput) {
  const DataMatrix q = testing_util::random_binary(300, 700, 6), r = testing_util::random_binary(250, 700, 7);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const NNDistanceSet one = nn_distances(q, r, Metric::hamming);
  omp_set_num_threads(4);
  const NNDistanceSet four = nn_distances(q, r, Metric::hamming);
  omp_set_num_threads(saved);
  EXPECT_EQ(one.distances, four.distances);
  EXPECT_EQ(one.permutation, four.permutation);
}

TEST(Knn, InvalidInputsRejected) {
  const DataMatrix b = testing_util::random_binary(5, 8, 1), b2 = testing_util::random_binary(5, 9, 1);
  const DataMatrix f = testing_util::random_float(5, 8, 1);
  EXPECT_THROW(nn_distances(b, b2, Metric::hamming), ValidationError);
  EXPECT_THROW(nn_distances(b, f, Metric::hamming), ValidationError);
  EXPECT_THROW(nn_distances(f, f, Metric::hamming), ValidationError);
  EXPECT_THROW(nn_distances(b, b, Metric::euclidean), ValidationError);
  const DataMatrix other = testing_util::random_binary(5, 8, 2);
  EXPECT_THROW(nn_distances(b, other, Metric::hamming, true), ValidationError);
  EXPECT_THROW(metric_from_string("cosine"), ValidationError);
}
