#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mfcce/metrics.hpp"
#include "oracles.hpp"

using namespace mfcce;

namespace {

Empirical1D sample(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = z(rng);
  return Empirical1D(v);
}

}  // namespace

TEST(Empirical1D, SortsAndRejectsNonFinite) {
  const Empirical1D e({3.0, -1.0, 2.0});
  EXPECT_EQ(e[0], -1.0);
  EXPECT_EQ(e[2], 3.0);
  EXPECT_THROW(Empirical1D({1.0, NAN}), std::invalid_argument);
}

TEST(W2Empirical, SmallCases) {
  EXPECT_EQ(w2_empirical_1d(Empirical1D({0, 1}), Empirical1D({0, 1})).distance, 0.0);
  EXPECT_DOUBLE_EQ(w2_empirical_1d(Empirical1D({0, 2}), Empirical1D({1, 3})).distance, 1.0);
  EXPECT_DOUBLE_EQ(w2_empirical_1d(Empirical1D({0, 1, 5}), Empirical1D({2, 2, 2})).distance, std::sqrt(14.0 / 3.0));
  EXPECT_NEAR(oracle::w2_squared_bruteforce({0, 1, 5}, {2, 2, 2}), 14.0 / 3.0, 1e-15);
}

TEST(W2Empirical, MatchesAssignmentBruteForce) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> size(1, 6);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = size(rng);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    const double w2 = w2_empirical_1d(Empirical1D(x), Empirical1D(y)).distance;
    EXPECT_NEAR(w2 * w2, oracle::w2_squared_bruteforce(x, y), 1e-12);
  }
}

TEST(W2Empirical, TriangleInequality) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto x = sample(rng, 20), y = sample(rng, 20, 2.0), z = sample(rng, 20, 0.5);
    const double xy = w2_empirical_1d(x, y).distance, yz = w2_empirical_1d(y, z).distance,
                 xz = w2_empirical_1d(x, z).distance;
    EXPECT_LE(xz, xy + yz + 1e-12);
  }
}

TEST(W2Empirical, ScaleEquivariance) {
  std::mt19937_64 rng(23);
  const auto x = sample(rng, 64), y = sample(rng, 64);
  for (double alpha : {2.0, -0.5, 4.0}) {
    std::vector<double> ax(x.values().begin(), x.values().end()), ay(y.values().begin(), y.values().end());
    for (auto& v : ax) v *= alpha;
    for (auto& v : ay) v *= alpha;
    EXPECT_NEAR(w2_empirical_1d(Empirical1D(ax), Empirical1D(ay)).distance,
                std::abs(alpha) * w2_empirical_1d(x, y).distance, 1e-12);
  }
}

TEST(W2Empirical, UnequalCountsAreFlaggedAndExact) {
  // {0, 1} against {0, 0, 1, 1}: identical quantile functions.
  const auto r = w2_empirical_1d(Empirical1D({0, 1}), Empirical1D({0, 0, 1, 1}));
  EXPECT_TRUE(r.unequal_counts);
  EXPECT_EQ(r.distance, 0.0);
  // {0} against {0, 2}: (Q difference)^2 is 0 on [0, 1/2] and 4 on [1/2, 1].
  EXPECT_DOUBLE_EQ(w2_empirical_1d(Empirical1D({0}), Empirical1D({0, 2})).distance, std::sqrt(2.0));
}

TEST(Moments, SmallCases) {
  const auto m = moments(Empirical1D({-1, 1}));
  EXPECT_EQ(m.mean, 0.0);
  EXPECT_EQ(m.second_moment, 1.0);
  EXPECT_EQ(m.variance, 1.0);
  const auto c = moments(Empirical1D({3.5}));
  EXPECT_EQ(c.mean, 3.5);
  EXPECT_EQ(c.second_moment, 12.25);
  EXPECT_EQ(c.variance, 0.0);
}

TEST(Moments, LargeNormalSample) {
  CounterStream s(99, 0, 0, StreamPurpose::pilot);
  std::vector<double> v(1000000);
  for (auto& x : v) x = 3.0 + 2.0 * s.next_normal();
  const auto m = moments(v);
  EXPECT_NEAR(m.mean, 3.0, 0.006);
  EXPECT_NEAR(m.variance, 4.0, 0.08);
}

TEST(GaussianMixture, MomentsAndCdf) {
  const GaussianMixture1D mix({{0.3, -1.0, 0.25}, {0.7, 2.0, 1.0}});
  EXPECT_NEAR(mix.mean(), 0.3 * -1.0 + 0.7 * 2.0, 1e-15);
  EXPECT_NEAR(mix.second_moment(), 0.3 * 1.25 + 0.7 * 5.0, 1e-15);
  EXPECT_NEAR(mix.cdf(2.0), 0.3 * 0.5 * std::erfc(-3.0 * 2.0 / std::sqrt(2.0)) + 0.7 * 0.5, 1e-15);
  const double q = mix.quantile(0.4);
  EXPECT_NEAR(mix.cdf(q), 0.4, 1e-9);
}

TEST(GaussianMixture, RejectsBadWeights) {
  EXPECT_THROW(GaussianMixture1D({{0.5, 0, 1}, {0.4, 0, 1}}), std::invalid_argument);
  EXPECT_THROW(GaussianMixture1D({{1.0, 0, -1}}), std::invalid_argument);
}

TEST(GaussianMixture, PartialMomentsIntegrateToMoments) {
  const GaussianMixture1D mix({{0.5, -2.0, 0.5}, {0.5, 1.0, 2.0}});
  const auto pm = mix.partial_moments(-INFINITY, INFINITY);
  EXPECT_NEAR(pm.mass, 1.0, 1e-15);
  EXPECT_NEAR(pm.first, mix.mean(), 1e-14);
  EXPECT_NEAR(pm.second, mix.second_moment(), 1e-14);
}

namespace {

// Cell means of N(0, 1) over the n equiprobable quantile cells.
std::vector<double> unit_cell_means(std::size_t n) {
  const auto unit = GaussianMixture1D::normal(0.0, 1.0);
  std::vector<double> x(n);
  double prev = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    const double hi = i + 1 == n ? INFINITY : unit.quantile((i + 1.0) / n);
    x[i] = unit.partial_moments(prev, hi).first * static_cast<double>(n);
    prev = hi;
  }
  return x;
}

}  // namespace

// For cell means x of N(0,1), W2^2(x, N(mu, s^2)) = mu^2 + s^2 + (1 - 2 s) mean(x^2)
// because the target quantile is affine in the unit quantile.
TEST(W2VsMixture, AffineQuantileIdentity) {
  const auto x = unit_cell_means(512);
  double m2 = 0.0;
  for (double v : x) m2 += v * v / 512.0;
  for (double sigma : {0.5, 1.0, 1.7, 2.0})
    for (double mu : {-1.0, 0.0, 0.7}) {
      const MixtureCoupling c(GaussianMixture1D::normal(mu, sigma * sigma), 512);
      EXPECT_NEAR(c.w2_squared(x), mu * mu + sigma * sigma + (1.0 - 2.0 * sigma) * m2, 1e-9);
    }
}

TEST(W2VsMixture, GaussianClosedForm) {
  const auto x = unit_cell_means(4096);
  for (double sigma : {0.5, 0.8, 1.0, 1.5, 2.0})
    for (double mu : {-1.0, 0.0, 0.7}) {
      const MixtureCoupling c(GaussianMixture1D::normal(mu, sigma * sigma), x.size());
      EXPECT_NEAR(c.w2_squared(x), oracle::gaussian_w2_squared(0.0, 1.0, mu, sigma), 1e-3) << mu << ' ' << sigma;
    }
}

TEST(W2VsMixture, AgreesWithSortedCouplingInTheLimit) {
  // W2(sample, N(mu, s^2)) vs sample drawn from N(0,1): converges to the closed form.
  CounterStream s(5, 0, 0, StreamPurpose::pilot);
  std::vector<double> v(100000);
  for (auto& x : v) x = s.next_normal();
  const Empirical1D e(v);
  for (double sigma : {0.5, 1.0, 2.0}) {
    const auto r = w2_vs_gaussian_mixture_1d(e, GaussianMixture1D::normal(0.3, sigma * sigma));
    EXPECT_NEAR(r.distance * r.distance, oracle::gaussian_w2_squared(0.0, 1.0, 0.3, sigma), 2e-2);
    EXPECT_LT(r.error_bound, 1e-12);
  }
}

TEST(W2VsMixture, SampleFromMixtureIsClose) {
  const GaussianMixture1D mix({{0.4, -2.0, 2.0}, {0.6, 2.0, 2.0}});
  CounterStream s(6, 0, 0, StreamPurpose::pilot);
  std::vector<double> v(100000);
  for (auto& x : v) x = mix.sample(s);
  EXPECT_LT(w2_vs_gaussian_mixture_1d(Empirical1D(v), mix).distance, 0.05);
}

TEST(W2VsMixture, PointMass) {
  const auto r = w2_vs_gaussian_mixture_1d(Empirical1D(std::vector<double>(50, 1.5)), GaussianMixture1D::normal(1.5, 0.0));
  EXPECT_NEAR(r.distance, 0.0, 1e-12);
}

TEST(W2VsMixture, MatchesEmpiricalCouplingAgainstAtoms) {
  // Mixture of two atoms vs a sample: equals the empirical W2 against the atoms replicated.
  const GaussianMixture1D mix({{0.5, -1.0, 0.0}, {0.5, 3.0, 0.0}});
  const Empirical1D x({-2.0, 0.0, 1.0, 4.0});
  const double direct = w2_empirical_1d(x, Empirical1D({-1.0, -1.0, 3.0, 3.0})).distance;
  EXPECT_NEAR(w2_vs_gaussian_mixture_1d(x, mix).distance, direct, 1e-9);
}
