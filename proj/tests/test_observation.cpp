// Copyright 2026, The hmmrange Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "hmmrange/observation.hpp"

namespace hmmrange {
namespace {

SampleSet column_set(std::vector<double> values) {
  SampleSet s;
  for (double v : values) s.samples.push_back({v});
  return s;
}

// D(p||q) + D(q||p) for two Gaussians by trapezoidal quadrature of
// (p - q)(ln p - ln q) over +-14 standard deviations of the wider density.
double kl_by_quadrature(double mp, double vp, double mq, double vq) {
  const double sd = std::sqrt(std::max(vp, vq));
  const double lo = std::min(mp, mq) - 14.0 * sd;
  const double hi = std::max(mp, mq) + 14.0 * sd;
  const double s_min = std::sqrt(std::min(vp, vq));
  const std::size_t steps = std::max<std::size_t>(200000, static_cast<std::size_t>(40.0 * (hi - lo) / s_min));
  const double h = (hi - lo) / static_cast<double>(steps);
  auto log_pdf = [](double x, double m, double v) {
    return -0.5 * std::log(2.0 * M_PI * v) - 0.5 * (x - m) * (x - m) / v;
  };
  double acc = 0.0;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double x = lo + h * static_cast<double>(i);
    const double lp = log_pdf(x, mp, vp), lq = log_pdf(x, mq, vq);
    const double f = (std::exp(lp) - std::exp(lq)) * (lp - lq);
    acc += (i == 0 || i == steps) ? 0.5 * f : f;
  }
  return acc * h;
}

TEST(BinStats, ConstantBinIsFloored) {
  const auto s = bin_stats(column_set({5, 5, 5}));
  EXPECT_DOUBLE_EQ(s.mu[0], 5.0);
  EXPECT_DOUBLE_EQ(s.sigma2[0], 1e-12 * 25.0);
  EXPECT_DOUBLE_EQ(s.sigma2[0], variance_floor(column_set({5, 5, 5})));
}

TEST(BinStats, TwoPointUnbiasedVariance) {
  const auto s = bin_stats(column_set({1, 3}));
  EXPECT_DOUBLE_EQ(s.mu[0], 2.0);
  EXPECT_DOUBLE_EQ(s.sigma2[0], 2.0);
}

TEST(BinStats, GaussianDrawsWithinSamplingBounds) {
  // mean within 3 standard errors; (n-1) s^2 / 4 inside the chi-square(9)
  // 99% interval [1.7349, 23.589].
  std::mt19937_64 rng(2026);
  std::normal_distribution<double> n(10.0, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> v(10);
    for (auto &x : v) x = n(rng);
    const auto s = bin_stats(column_set(v));
    EXPECT_NEAR(s.mu[0], 10.0, 3.0 * 2.0 / std::sqrt(10.0));
    const double chi = 9.0 * s.sigma2[0] / 4.0;
    EXPECT_GT(chi, 1.7349);
    EXPECT_LT(chi, 23.589);
  }
}

TEST(BinStats, Errors) {
  EXPECT_THROW(bin_stats(column_set({1.0})), Error);
  EXPECT_THROW(bin_stats(column_set({1.0, -1.0})), Error);
  EXPECT_THROW(bin_stats(column_set({1.0, NAN})), Error);
  SampleSet ragged;
  ragged.samples = {{1.0, 2.0}, {1.0}};
  EXPECT_THROW(bin_stats(ragged), Error);
}

TEST(SymmetricKl, Examples) {
  EXPECT_EQ(symmetric_kl(3.0, 2.0, 3.0, 2.0), 0.0);
  EXPECT_NEAR(symmetric_kl(1.0, 4.0, 4.0, 4.0), 9.0 / 4.0, 1e-15);  // delta^2 / sigma^2
  EXPECT_NEAR(symmetric_kl(0.0, 1.0, 0.0, 4.0), 1.125, 1e-15);
}

TEST(SymmetricKl, LengthMismatchIsAnError) {
  BinStats p{{1.0, 2.0}, {1.0, 1.0}}, q{{1.0}, {1.0}};
  EXPECT_THROW(symmetric_kl(p, q), Error);
}

TEST(SymmetricKl, SymmetricNonnegativeZeroOnlyAtEqualMoments) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mu(-5, 5), var(0.01, 10);
  for (int i = 0; i < 1000; ++i) {
    const double a = mu(rng), b = var(rng), c = mu(rng), d = var(rng);
    const double o = symmetric_kl(a, b, c, d);
    EXPECT_EQ(o, symmetric_kl(c, d, a, b));
    EXPECT_GT(o, 0.0);
    EXPECT_EQ(symmetric_kl(a, b, a, b), 0.0);
  }
}

TEST(SymmetricKl, MatchesNumericalIntegration) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> mu(-3, 3), var(0.25, 4);
  for (int i = 0; i < 100; ++i) {
    const double mp = mu(rng), vp = var(rng), mq = mu(rng), vq = var(rng);
    const double closed = symmetric_kl(mp, vp, mq, vq);
    const double numeric = kl_by_quadrature(mp, vp, mq, vq);
    EXPECT_NEAR(closed, numeric, 1e-9 * std::max(1.0, closed)) << mp << ' ' << vp << ' ' << mq << ' ' << vq;
  }
}

TEST(SymmetricKl, InvariantUnderPermutingRealizations) {
  std::mt19937_64 rng(8);
  std::gamma_distribution<double> g(2.0, 3.0);
  SampleSet cal, test;
  for (int r = 0; r < 12; ++r) {
    std::vector<double> a(6), b(6);
    for (auto &x : a) x = g(rng);
    for (auto &x : b) x = g(rng);
    cal.samples.push_back(a);
    test.samples.push_back(b);
  }
  const auto base = observe(cal, test);
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(cal.samples.begin(), cal.samples.end(), rng);
    std::shuffle(test.samples.begin(), test.samples.end(), rng);
    const auto o = observe(cal, test);
    for (std::size_t k = 0; k < o.size(); ++k) EXPECT_NEAR(o.values[k], base.values[k], 1e-12 * (1 + base.values[k]));
  }
}

TEST(Ks, StandardNormalRejectsAtNominalRate) {
  int rejections = 0;
  const int seeds = 200;
  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(derive_seed(1234, seed));
    std::normal_distribution<double> n(0.0, 1.0);
    SampleSet s;
    s.samples.assign(540, std::vector<double>(10));
    for (auto &row : s.samples)
      for (auto &x : row) x = 50.0 + n(rng);
    const auto r = ks_normality_stat({s});
    EXPECT_EQ(r.sample_count, 5400u);
    if (r.p_value < 0.05) ++rejections;
  }
  // Binomial(200, 0.05): mean 10, sd 3.1.
  EXPECT_LE(rejections, 20);
}

TEST(Ks, HeavyTailsAreRejected) {
  std::mt19937_64 rng(99);
  std::student_t_distribution<double> t3(3.0);
  SampleSet s;
  s.samples.assign(500, std::vector<double>(10));
  for (auto &row : s.samples)
    for (auto &x : row) x = 100.0 + 5.0 * t3(rng);
  EXPECT_LT(ks_normality_stat({s}).p_value, 0.01);
}

TEST(Ks, DegenerateAndEmptyInputsAreErrors) {
  EXPECT_THROW(ks_normality_stat({column_set({2, 2, 2})}), Error);
  EXPECT_THROW(ks_normality_stat({}), Error);
}

TEST(Ks, KolmogorovTail) {
  EXPECT_NEAR(kolmogorov_q(1.3581), 0.05, 1e-4);
  EXPECT_NEAR(kolmogorov_q(1.6276), 0.01, 1e-4);
  EXPECT_EQ(kolmogorov_q(0.0), 1.0);
}

TEST(Background, Examples) {
  const auto u = zetik_background_update({2.0}, {4.0}, 0.5);
  EXPECT_DOUBLE_EQ(u.background[0], 3.0);
  EXPECT_DOUBLE_EQ(u.signal[0], 1.0);
  const auto same = zetik_background_update({1.0, -2.0}, {1.0, -2.0}, 0.9);
  EXPECT_EQ(same.signal, (std::vector<double>{0.0, 0.0}));
}

TEST(Background, GeometricConvergence) {
  const double a = 0.8;
  std::vector<double> b{0.0};
  for (int i = 1; i <= 30; ++i) {
    b = zetik_background_update(b, {1.0}, a).background;
    EXPECT_NEAR(1.0 - b[0], std::pow(a, i), 1e-12);
  }
}

TEST(Background, Errors) {
  EXPECT_THROW(zetik_background_update({1.0}, {1.0}, 1.0), Error);
  EXPECT_THROW(zetik_background_update({1.0}, {1.0}, 0.0), Error);
  EXPECT_THROW(zetik_background_update({1.0}, {1.0, 2.0}, 0.5), Error);
}

TEST(ObservationCsv, RoundTrip) {
  std::vector<ObservationVector> obs(2);
  obs[0] = {{0.5, 1e-13, 3.25}, 1, 0};
  obs[1] = {{7.0, 8.0, 9.0}, 0, 2};
  std::stringstream ss;
  write_observations_csv(ss, obs);
  const auto back = read_observations_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].point, 0u);
  EXPECT_EQ(back[0].link, 1u);
  EXPECT_EQ(back[0].values, obs[0].values);
  EXPECT_EQ(back[1].values, obs[1].values);
}

TEST(ObservationCsv, MalformedInputIsAnError) {
  std::stringstream bad_header("a,b,c,d\n");
  EXPECT_THROW(read_observations_csv(bad_header), Error);
  std::stringstream gap("point,link,bin,value\n0,0,1,1.0\n0,0,3,1.0\n");
  EXPECT_THROW(read_observations_csv(gap), Error);
  std::stringstream junk("point,link,bin,value\n0,0,x,1.0\n");
  EXPECT_THROW(read_observations_csv(junk), Error);
}

TEST(Floors, ObservationFloor) {
  EXPECT_EQ(floored_observation(0.0), 1e-12);
  EXPECT_EQ(floored_observation(2.0), 2.0);
}

}  // namespace
}  // namespace hmmrange
