#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gmmdecomp/bridge.hpp"
#include "gmmdecomp/eval.hpp"
#include "gmmdecomp/presets.hpp"
#include "gmmdecomp/rng.hpp"
#include "test_support.hpp"

using namespace gmmdecomp;
using gmmdecomp::testing::rel_err;

namespace {

PointCloud cloud_1d(std::initializer_list<double> xs) {
  Mat p(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p(0, i++) = x;
  return PointCloud(1, p);
}

Gmm pair_1d() {
  return Gmm({GaussianComponent(0.3, Vec::Constant(1, -4.0), Mat::Constant(1, 1, 1.0)),
              GaussianComponent(0.7, Vec::Constant(1, 3.0), Mat::Constant(1, 1, 0.5))});
}

}  // namespace

TEST(Histogram, EmptyCloud) {
  const Histogram h = histogram(PointCloud(2), presets::grid_2d());
  EXPECT_EQ(h.counts.values().sum(), 0.0);
  EXPECT_EQ(h.dropped, 0u);
}

TEST(Histogram, NodesAndOutliers) {
  const Grid g = make_uniform_grid(Vec::Zero(1), Vec::Ones(1), {5});
  const Histogram h = histogram(cloud_1d({2.0, 2.4, 3.6, -0.5, 4.5, 4.6, -3.0}), g);
  EXPECT_EQ(h.counts[2], 2.0);
  EXPECT_EQ(h.counts[4], 2.0);  // 3.6 and the boundary point 4.5
  EXPECT_EQ(h.counts[0], 1.0);
  EXPECT_EQ(h.dropped, 2u);
  EXPECT_THROW(histogram(PointCloud(2), g), std::invalid_argument);
}

TEST(Histogram, SampledRingPeaksNearHeavyAtom) {
  const Gmm g = presets::experiment3();
  const Histogram h = histogram(sample_gmm(g, 100000, 5), presets::grid_2d());
  EXPECT_EQ(h.counts.values().sum() + static_cast<double>(h.dropped), 100000.0);
  const auto [idx, x] = [&] {
    Eigen::Index i = 0;
    h.counts.values().maxCoeff(&i);
    return std::pair{i, presets::grid_2d().point(static_cast<Index>(i))};
  }();
  (void)idx;
  double nearest = std::numeric_limits<double>::infinity();
  for (const auto& c : g) {
    if (c.weight() == 5.0) nearest = std::min(nearest, (c.mean() - x).norm());
  }
  EXPECT_LT(nearest, 1.0);
}

TEST(SignalToPoints, SingleNode) {
  const Grid g = make_uniform_grid(Vec::Zero(1), Vec::Ones(1), {3});
  const PointCloud p = signal_to_points(Signal(g, Vec{{0.0, 2.5, 0.0}}), 100);
  ASSERT_EQ(p.size(), 100u);
  EXPECT_TRUE((p.points().array() == 1.0).all());
}

TEST(SignalToPoints, UniformAndNegativeValues) {
  const Grid g = make_uniform_grid(Vec::Zero(1), Vec::Ones(1), {10});
  const PointCloud p = signal_to_points(Signal(g, Vec::Ones(10)), 100);
  ASSERT_EQ(p.size(), 100u);
  for (Index i = 0; i < 10; ++i) EXPECT_EQ(p.point(10 * i)[0], static_cast<double>(i));

  Vec v = Vec::Ones(10);
  v[3] = -5.0;
  const PointCloud q = signal_to_points(Signal(g, v), 90);
  EXPECT_EQ(q.size(), 90u);
  EXPECT_FALSE((q.points().array() == 3.0).any());

  EXPECT_THROW(signal_to_points(Signal(g, -Vec::Ones(10)), 10), std::domain_error);
  EXPECT_THROW(signal_to_points(Signal(g, Vec::Ones(10)), 0), std::invalid_argument);
}

TEST(SignalToPoints, NoisyRingCount) {
  const Signal clean = rasterize(presets::experiment3(), presets::grid_2d());
  const Signal noisy = add_white_noise(clean, noise_sigma_for_snr(clean, 20.0), 3);
  const Index n = signal_to_points(noisy, 100000).size();
  EXPECT_GE(n, 90000u);
  EXPECT_LE(n, 100000u);
  EXPECT_GE(signal_to_points(clean, 100000).size(), 100000u - clean.size());
}

TEST(Normalize, RingWeights) {
  const Gmm g = normalize_gmm(presets::experiment3());
  EXPECT_NEAR(g.total_weight(), 1.0, 1e-15);
  EXPECT_NEAR(g[0].weight(), 5.0 / 33.0, 1e-15);
  EXPECT_NEAR(g[1].weight(), 1.0 / 33.0, 1e-15);
  EXPECT_THROW(normalize_gmm(Gmm{}), std::domain_error);
}

TEST(Normalize, CommutesWithRasterize) {
  const Gmm g = presets::experiment2();
  const Grid grid = presets::grid_2d();
  const Vec a = rasterize(normalize_gmm(g), grid).values();
  const Vec b = rasterize(g, grid).values() / g.total_weight();
  EXPECT_LT(rel_err(a, b), 1e-14);
}

TEST(LogLikelihood, StandardNormal) {
  const Gmm g({GaussianComponent(1.0, Vec::Zero(1), Mat::Identity(1, 1))});
  const double one = log_likelihood(cloud_1d({0.0}), g);
  EXPECT_NEAR(one, -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(one, -0.918939, 1e-6);
  EXPECT_NEAR(log_likelihood(cloud_1d({1.0, -2.0, 1.0, -2.0}), g),
              2.0 * log_likelihood(cloud_1d({1.0, -2.0}), g), 1e-13);
  EXPECT_EQ(log_likelihood(cloud_1d({1e200}), g), -std::numeric_limits<double>::infinity());
  EXPECT_THROW(log_likelihood(cloud_1d({0.0}), presets::experiment1()), std::invalid_argument);
}

TEST(LogLikelihood, MatchesDirectMixture) {
  const Gmm g = pair_1d();
  const PointCloud p = cloud_1d({-4.2, 0.0, 2.9, 3.3});
  double expect = 0.0;
  for (Index i = 0; i < p.size(); ++i) expect += std::log(gmm_value(g, p.point(i)));
  EXPECT_NEAR(log_likelihood(p, g), expect, 1e-12 * std::abs(expect));
}

TEST(Sample, DeterministicWithRightMoments) {
  const Gmm g = pair_1d();
  const PointCloud a = sample_gmm(g, 50000, 4);
  EXPECT_EQ(a.points(), sample_gmm(g, 50000, 4).points());
  EXPECT_NE(a.points(), sample_gmm(g, 50000, 5).points());
  const double mean = a.points().mean();
  const double expect = 0.3 * -4.0 + 0.7 * 3.0;
  // Mixture variance 0.3*1 + 0.7*0.25 + 0.3*0.7*49 = 10.765.
  EXPECT_NEAR(mean, expect, 4.0 * std::sqrt(10.765 / 50000.0));
}

TEST(Em, SingleComponentIsSampleMoments) {
  std::mt19937_64 rng(1);
  Mat pts(2, 500);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    pts(0, i) = normal(rng);
    pts(1, i) = 0.5 * pts(0, i) + 2.0 * normal(rng);
  }
  EmConfig cfg;
  const EmResult r = em_fit(PointCloud(2, pts), cfg);
  const Vec mean = pts.rowwise().mean();
  const Mat centred = pts.colwise() - mean;
  const Mat cov = centred * centred.transpose() / 500.0;
  ASSERT_EQ(r.gmm.size(), 1u);
  EXPECT_NEAR(r.gmm[0].weight(), 1.0, 1e-15);
  EXPECT_LT((r.gmm[0].mean() - mean).norm(), 1e-12);
  EXPECT_LT(rel_err(r.gmm[0].covariance(), cov), 1e-10);
}

TEST(Em, RecoversSeparatedPairWithinStandardError) {
  const Gmm truth = pair_1d();
  const Index n = 20000;
  EmConfig cfg;
  cfg.k = 2;
  cfg.restarts = 3;
  cfg.seed = 11;
  const EmResult r = em_fit(sample_gmm(truth, n, 8), cfg);
  ASSERT_EQ(r.gmm.size(), 2u);
  const bool swapped = r.gmm[0].mean()[0] > r.gmm[1].mean()[0];
  for (Index m = 0; m < 2; ++m) {
    const auto& est = r.gmm[swapped ? 1 - m : m];
    const double se = truth[m].sigma()(0, 0) / std::sqrt(truth[m].weight() * double(n));
    EXPECT_NEAR(est.mean()[0], truth[m].mean()[0], 4.0 * se);
    EXPECT_NEAR(est.weight(), truth[m].weight(), 0.02);
  }
  EXPECT_NEAR(r.gmm.total_weight(), 1.0, 1e-12);
  EXPECT_EQ(r.runs.size(), 3u);
  EXPECT_EQ(r.log_likelihood, r.runs[r.best_restart].history.back());
}

TEST(Em, LogLikelihoodNeverDecreases) {
  const PointCloud p = sample_gmm(presets::experiment3(), 5000, 2);
  EmConfig cfg;
  cfg.k = 8;
  cfg.restarts = 2;
  const EmResult r = em_fit(p, cfg);
  for (const EmRun& run : r.runs) {
    ASSERT_GE(run.history.size(), 2u);
    for (std::size_t i = 1; i < run.history.size(); ++i) {
      EXPECT_GE(run.history[i], run.history[i - 1] - 1e-9 * std::abs(run.history[i - 1]));
    }
  }
  EXPECT_NEAR(log_likelihood(p, r.gmm), r.log_likelihood, 1e-9 * std::abs(r.log_likelihood));
}

TEST(Em, RejectsBadConfig) {
  EmConfig cfg;
  cfg.k = 3;
  EXPECT_THROW(em_fit(cloud_1d({1.0, 2.0}), cfg), std::invalid_argument);
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.k = 1;
  cfg.restarts = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.restarts = 1;
  cfg.cov_floor = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
