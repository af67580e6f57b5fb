#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "privet/error.hpp"
#include "privet/experiments.hpp"
#include "privet/pipeline.hpp"
#include "privet/rng.hpp"

using namespace privet;
using testing_util::TempDir;

namespace {

std::size_t row_diff(const DataMatrix& a, std::size_t i, const DataMatrix& b, std::size_t j) {
  std::size_t n = 0;
  for (std::size_t c = 0; c < a.cols(); ++c) n += a.bit(i, c) != b.bit(j, c);
  return n;
}

Scorer privet_scorer(bool decimate) {
  PrivetConfig cfg;
  cfg.decimate = decimate;
  return [cfg](const GridCellInput& in) {
    const PrivacyReport r = run_privet(in.train, in.test, in.synth, cfg);
    ScorerOutput o;
    for (const auto& s : r.samples) o.flags.push_back(s.leak);
    return o;
  };
}

DataMatrix fixture(std::size_t rows, std::uint64_t seed) {
  return generate_population(testing_util::fixture_population(rows), seed);
}

}  // namespace

TEST(Population, DeterministicAndShaped) {
  PopulationSpec s = testing_util::fixture_population(50, 300);
  const DataMatrix a = generate_population(s, 3), b = generate_population(s, 3);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rows(), 50u);
  EXPECT_EQ(a.cols(), 300u);
  EXPECT_TRUE(a.is_binary());
  EXPECT_FALSE(a == generate_population(s, 4));
}

TEST(Population, InvalidSpecRejected) {
  PopulationSpec s = testing_util::fixture_population(10, 64);
  s.founders = 0;
  EXPECT_THROW(generate_population(s, 1), ValidationError);
  s = testing_util::fixture_population(10, 64);
  s.mutation = 1.5;
  EXPECT_THROW(generate_population(s, 1), ValidationError);
}

TEST(Injection, ZeroFakeIsIdentity) {
  const DataMatrix train = testing_util::random_binary(50, 200, 1);
  const DataMatrix synth = testing_util::random_binary(40, 200, 2);
  const Injection inj = inject_leaks(train, synth, {0.0, 0.5, 3});
  EXPECT_EQ(inj.synth, synth);
  EXPECT_EQ(inj.truth.positives(), 0u);
  EXPECT_FALSE(inj.no_op_warning);
}

TEST(Injection, FullCopyMatchesNearestNeighbour) {
  const DataMatrix train = testing_util::random_binary(50, 200, 1);
  const DataMatrix synth = testing_util::random_binary(40, 200, 2);
  const Neighbors nb = nearest_neighbors(synth, train, Metric::hamming);
  const Injection inj = inject_leaks(train, synth, {1.0, 1.0, 3});
  EXPECT_EQ(inj.truth.positives(), 40u);
  for (std::size_t i = 0; i < 40; ++i) {
    ASSERT_TRUE(inj.truth.source[i].has_value());
    EXPECT_EQ(*inj.truth.source[i], nb.index[i]);
    EXPECT_EQ(row_diff(inj.synth, i, train, nb.index[i]), 0u);
  }
  const Neighbors after = nearest_neighbors(inj.synth, train, Metric::hamming);
  EXPECT_EQ(after.distance.maxCoeff(), 0.0);
}

TEST(Injection, ChangesOnlySelectedRowsAndPositions) {
  const DataMatrix train = testing_util::random_binary(80, 500, 5);
  const DataMatrix synth = testing_util::random_binary(100, 500, 6);
  const LeakSpec spec{0.37, 0.13, 7};
  const Injection inj = inject_leaks(train, synth, spec);
  EXPECT_EQ(inj.truth.positives(), 37u);
  const std::size_t c = 65;  // floor(0.13 * 500)
  for (std::size_t i = 0; i < 100; ++i) {
    if (!inj.truth.leak[i]) {
      EXPECT_EQ(row_diff(inj.synth, i, synth, i), 0u) << i;
      EXPECT_FALSE(inj.truth.source[i].has_value());
      continue;
    }
    const std::size_t src = *inj.truth.source[i];
    // every changed bit now agrees with the source; positions where the
    // source already agreed count as copied but unchanged
    std::size_t changed = 0, agree_new = 0, agree_old = 0;
    for (std::size_t j = 0; j < 500; ++j) {
      const bool moved = inj.synth.bit(i, j) != synth.bit(i, j);
      changed += moved;
      if (moved) EXPECT_EQ(inj.synth.bit(i, j), train.bit(src, j));
      agree_new += inj.synth.bit(i, j) == train.bit(src, j);
      agree_old += synth.bit(i, j) == train.bit(src, j);
    }
    EXPECT_LE(changed, c);
    EXPECT_EQ(agree_new - agree_old, changed);
  }
}

TEST(Injection, CopiedPositionCountIsExact) {
  // source and synth disagree everywhere, so every copied position changes
  const DataMatrix train = DataMatrix::zeros_binary(1, 300);
  DataMatrix synth = DataMatrix::zeros_binary(20, 300);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 300; ++j) synth.set_bit(i, j, true);
  const Injection inj = inject_leaks(train, synth, {0.5, 0.1, 11});
  EXPECT_EQ(inj.truth.positives(), 10u);
  for (std::size_t i = 0; i < 20; ++i)
    EXPECT_EQ(row_diff(inj.synth, i, synth, i), inj.truth.leak[i] ? 30u : 0u);
}

TEST(Injection, Deterministic) {
  const DataMatrix train = testing_util::random_binary(60, 128, 1);
  const DataMatrix synth = testing_util::random_binary(60, 128, 2);
  EXPECT_EQ(inject_leaks(train, synth, {0.2, 0.3, 9}).synth, inject_leaks(train, synth, {0.2, 0.3, 9}).synth);
  EXPECT_FALSE(inject_leaks(train, synth, {0.2, 0.3, 9}).synth ==
               inject_leaks(train, synth, {0.2, 0.3, 10}).synth);
}

TEST(Injection, Errors) {
  const DataMatrix train = testing_util::random_binary(20, 100, 1);
  const DataMatrix synth = testing_util::random_binary(20, 100, 2);
  EXPECT_THROW(inject_leaks(testing_util::random_float(20, 100, 1), synth, {0.1, 0.1, 1}),
               ValidationError);
  EXPECT_THROW(inject_leaks(train, testing_util::random_binary(20, 99, 2), {0.1, 0.1, 1}),
               ValidationError);
  EXPECT_THROW(inject_leaks(train, synth, {1.5, 0.1, 1}), ValidationError);
  const Injection noop = inject_leaks(train, synth, {0.5, 0.005, 1});
  EXPECT_TRUE(noop.no_op_warning);
  EXPECT_EQ(noop.synth, synth);
}

TEST(Copycat, Endpoints) {
  const DataMatrix train = testing_util::random_binary(30, 64, 1);
  const DataMatrix synth = testing_util::random_binary(20, 64, 2);
  const Mixture zero = copycat_mix(train, synth, 0.0);
  EXPECT_EQ(zero.mixed, synth);
  EXPECT_EQ(zero.truth.positives(), 0u);
  const Mixture one = copycat_mix(train, synth, 1.0);
  EXPECT_EQ(one.mixed, train.head(20));
  EXPECT_EQ(one.truth.positives(), 20u);
}

TEST(Copycat, PrefixMixing) {
  const DataMatrix train = testing_util::random_binary(30, 64, 1);
  const DataMatrix synth = testing_util::random_binary(20, 64, 2);
  for (double beta : {0.001, 0.01, 0.1, 0.2, 0.5}) {
    const Mixture m = copycat_mix(train, synth, beta);
    const auto k = static_cast<std::size_t>(std::floor(beta * 20 + 1e-9));
    ASSERT_EQ(m.mixed.rows(), 20u);
    EXPECT_EQ(m.truth.positives(), k);
    for (std::size_t i = 0; i < 20; ++i) {
      if (i < k)
        EXPECT_EQ(row_diff(m.mixed, i, train, i), 0u);
      else
        EXPECT_EQ(row_diff(m.mixed, i, synth, i - k), 0u);
    }
  }
  EXPECT_THROW(copycat_mix(train.head(5), synth, 0.5), ValidationError);
  EXPECT_THROW(copycat_mix(train, synth, -0.1), ValidationError);
}

TEST(Confusion, UndefinedStatuses) {
  const Confusion none = confusion({false, false, false}, {false, false, false});
  EXPECT_FALSE(none.precision().has_value());
  EXPECT_FALSE(none.recall().has_value());
  EXPECT_FALSE(none.f1().has_value());
  const Confusion some = confusion({true, true, false, false}, {true, false, true, false});
  EXPECT_DOUBLE_EQ(*some.precision(), 0.5);
  EXPECT_DOUBLE_EQ(*some.recall(), 0.5);
  EXPECT_DOUBLE_EQ(*some.f1(), 0.5);
  EXPECT_EQ(some.tp + some.fp + some.tn + some.fn, 4u);
}

TEST(PrCurve, PerfectScoresGiveUnitAuc) {
  std::vector<double> s;
  std::vector<bool> t;
  for (int i = 0; i < 50; ++i) {
    s.push_back(i);
    t.push_back(i < 15);
  }
  const PrCurve c = pr_curve(s, t);
  ASSERT_TRUE(c.auc);
  EXPECT_DOUBLE_EQ(*c.auc, 1.0);
}

TEST(PrCurve, RandomScoresMatchPrevalence) {
  const std::size_t n = 1000;
  std::vector<bool> t(n, false);
  std::fill(t.begin(), t.begin() + 300, true);
  std::vector<double> aucs;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Xoshiro256 rng(derive_seed(seed, "pr"));
    std::vector<double> s(n);
    for (auto& x : s) x = rng.uniform();
    aucs.push_back(*pr_curve(s, t).auc);
  }
  const double mean = std::accumulate(aucs.begin(), aucs.end(), 0.0) / 40.0;
  double var = 0;
  for (double a : aucs) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / 39.0);
  EXPECT_NEAR(mean, 0.3, 3.0 * sd);
}

TEST(PrCurve, OneClassTruthUndefined) {
  EXPECT_FALSE(pr_curve({0.1, 0.2, 0.3}, {false, false, false}).auc.has_value());
  EXPECT_FALSE(pr_curve({0.1, 0.2, 0.3}, {true, true, true}).auc.has_value());
  EXPECT_THROW(pr_curve({0.1}, {true, false}), ValidationError);
}

TEST(PrCurve, TiesEnterTogetherAndPointsSorted) {
  const PrCurve c = pr_curve({1, 1, 2, 2, 3}, {true, false, true, false, true});
  ASSERT_EQ(c.points.size(), 3u);
  EXPECT_DOUBLE_EQ(c.points[0].precision, 0.5);
  for (std::size_t k = 1; k < c.points.size(); ++k) {
    EXPECT_LT(c.points[k - 1].threshold, c.points[k].threshold);
    EXPECT_LE(c.points[k - 1].recall, c.points[k].recall);
  }
  EXPECT_DOUBLE_EQ(c.points.back().recall, 1.0);
}

TEST(PrCurve, IdealOverlay) {
  const auto ideal = ideal_pr_curve(100, 400, 0.3, 101);
  ASSERT_EQ(ideal.size(), 101u);
  // perfect precision until the memorized rows are found, random after
  for (const auto& p : ideal) {
    if (p.threshold <= 30.0) EXPECT_NEAR(p.precision, 1.0, 1e-12);
    EXPECT_GE(p.recall, 0.0);
    EXPECT_LE(p.recall, 1.0 + 1e-12);
  }
  EXPECT_NEAR(ideal.back().recall, 1.0, 1e-12);
  EXPECT_NEAR(ideal.back().precision, 0.25, 1e-12);
  const PrCurve c = pr_curve({0, 1, 2, 3}, {true, false, true, false}, 0.5);
  EXPECT_FALSE(c.ideal.empty());
}

TEST(Grid, ZeroFakeCellHasUndefinedPrecision) {
  const DataMatrix src = fixture(900, 1);
  const GridSpec g{{0.0}, {0.1, 0.3}, 5, Metric::hamming};
  const GridResult r = run_grid(src, g, SplitSpec{2, 300, 300, 300}, {{"privet", privet_scorer(false)}});
  ASSERT_EQ(r.cells.size(), 2u);
  for (const auto& c : r.cells) {
    ASSERT_TRUE(c.error.empty()) << c.error;
    const Confusion& cf = c.confusion.at("privet");
    EXPECT_FALSE(cf.recall().has_value());
    if (cf.tp + cf.fp == 0) EXPECT_FALSE(cf.precision().has_value());
    EXPECT_EQ(cf.tp, 0u);
  }
}

TEST(Grid, StrongLeakSmokeCell) {
  const DataMatrix src = fixture(1500, 2);
  const GridSpec g{{0.4}, {1.0}, 6, Metric::hamming};
  const GridResult r = run_grid(src, g, SplitSpec{3, 500, 500, 500}, {{"privet", privet_scorer(false)}});
  ASSERT_TRUE(r.cells[0].error.empty()) << r.cells[0].error;
  EXPECT_GE(*r.cells[0].confusion.at("privet").recall(), 0.95);
}

TEST(Grid, DeterministicAndEmitsMaps) {
  const DataMatrix src = fixture(600, 3);
  const GridSpec g{{0.1, 0.3}, {0.1, 0.3}, 7, Metric::hamming};
  const SplitSpec sp{4, 200, 200, 200};
  const std::vector<std::pair<std::string, Scorer>> scorers{{"privet", privet_scorer(false)}};
  const GridResult a = run_grid(src, g, sp, scorers);
  const GridResult b = run_grid(src, g, sp, scorers);
  ASSERT_EQ(a.cells.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(a.cells[k].n_flagged, b.cells[k].n_flagged);
    EXPECT_EQ(a.cells[k].confusion.at("privet").tp, b.cells[k].confusion.at("privet").tp);
  }
  TempDir d1, d2;
  emit_grid(a, d1.path());
  emit_grid(b, d2.path());
  const std::string m = testing_util::slurp(d1.path() / "map.csv");
  EXPECT_EQ(m, testing_util::slurp(d2.path() / "map.csv"));
  EXPECT_EQ(m.rfind("f_fake,f_copy,metric,value\n", 0), 0u);
  const std::string npl = testing_util::slurp(d1.path() / "privet_npl.csv");
  EXPECT_EQ(std::count(npl.begin(), npl.end(), '\n'), 5);
  EXPECT_TRUE(std::filesystem::exists(d1.path() / "privet_f1.svg"));
}

TEST(Grid, FailedCellsAreRecorded) {
  const DataMatrix src = fixture(300, 4);
  Scorer boom = [](const GridCellInput& in) -> ScorerOutput {
    if (in.f_copy > 0.2) throw NumericalError("boom");
    return {std::vector<bool>(in.synth.rows(), false), std::nullopt};
  };
  const GridResult r = run_grid(src, {{0.1}, {0.1, 0.3}, 1, Metric::hamming},
                                SplitSpec{1, 100, 100, 100}, {{"x", boom}});
  EXPECT_TRUE(r.cells[0].error.empty());
  EXPECT_EQ(r.cells[1].error, "boom");
}

TEST(Grid, NplNondecreasingInCopyFraction) {
  const std::vector<double> fakes{0.1, 0.2, 0.3}, copies{0.02, 0.05, 0.1, 0.2, 0.3};
  std::vector<double> npl(fakes.size() * copies.size(), 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DataMatrix src = fixture(1800, 100 + seed);
    const GridResult r = run_grid(src, {fakes, copies, seed, Metric::hamming},
                                  SplitSpec{seed, 600, 600, 600}, {{"privet", privet_scorer(false)}});
    for (std::size_t k = 0; k < r.cells.size(); ++k) {
      ASSERT_TRUE(r.cells[k].error.empty()) << r.cells[k].error;
      npl[k] += static_cast<double>(r.cells[k].n_flagged.at("privet")) / 5.0;
    }
  }
  for (std::size_t i = 0; i < fakes.size(); ++i) {
    int inversions = 0;
    for (std::size_t j = 1; j < copies.size(); ++j)
      inversions += npl[i * copies.size() + j] < npl[i * copies.size() + j - 1];
    EXPECT_LE(inversions, 1) << "f_fake " << fakes[i];
  }
}

TEST(ExternalScores, LoadAndValidate) {
  TempDir d;
  testing_util::write_file(d.path() / "s.csv", "synth_row,score\n1,0.5\n0,-2\n2,3\n");
  const auto s = load_external_scores(d.path() / "s.csv", 3);
  EXPECT_EQ(s, (std::vector<double>{-2, 0.5, 3}));
  EXPECT_THROW(load_external_scores(d.path() / "s.csv", 4), ValidationError);
  EXPECT_THROW(load_external_scores(d.path() / "s.csv", 2), ValidationError);
  EXPECT_THROW(load_external_scores(d.path() / "missing.csv", 2), IoError);
}
