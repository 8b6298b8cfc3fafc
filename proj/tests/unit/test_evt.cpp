// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "relubound/bounding.hpp"
#include "relubound/error.hpp"
#include "relubound/evt.hpp"

using namespace relubound;
using fixtures::summarize;
using fixtures::vec;

namespace {

ErrorCode error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an exception";
  return ErrorCode::InvalidArgument;
}

// Draw n values of f over the box [lo, hi]^d.
std::vector<double> draw(std::mt19937_64& gen, std::size_t n, int d, double lo, double hi,
                         const std::function<double(const std::vector<double>&)>& f) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> x(static_cast<std::size_t>(d)), out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& xi : x) xi = u(gen);
    out[i] = f(x);
  }
  return out;
}

struct Coverage {
  int lower = 0;
  int both = 0;
  int trials = 0;
};

Coverage evt_coverage(int trials, std::size_t n, int d, double lo, double hi, double fmin, double fmax,
                      const EvtConfig& cfg, const std::function<double(const std::vector<double>&)>& f,
                      std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const std::size_t retain = order_statistic_count(n, cfg.xi) + 2;
  Coverage c;
  c.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const auto adj = adjust_bounds(summarize(draw(gen, n, d, lo, hi, f), retain), cfg);
    const bool low_ok = adj.l_hat <= fmin;
    c.lower += low_ok ? 1 : 0;
    c.both += (low_ok && adj.u_hat >= fmax) ? 1 : 0;
  }
  return c;
}

double three_sigma_floor(double target, int trials) {
  return target - 3.0 * std::sqrt(target * (1.0 - target) / trials);
}

}  // namespace

TEST(OrderStatisticCount, FloorOfPower) {
  EXPECT_EQ(order_statistic_count(10000, 0.5), 100u);
  EXPECT_EQ(order_statistic_count(10000, 0.85), 2511u);
  EXPECT_EQ(order_statistic_count(1000000, 0.5), 1000u);
  EXPECT_EQ(error_of([] { order_statistic_count(10, 1.0); }), ErrorCode::InvalidArgument);
}

TEST(OrderStatisticCount, MinimumSampleCount) {
  for (double xi : {0.5, 0.7, 0.85, 0.9}) {
    const std::size_t n = minimum_sample_count(xi);
    EXPECT_GE(n, 2 * order_statistic_count(n, xi) + 6) << xi;
    EXPECT_GE(order_statistic_count(n, xi), 4u) << xi;
    const std::size_t prev = order_statistic_count(n - 1, xi);
    EXPECT_TRUE(prev < 4 || n - 1 < 2 * prev + 6) << xi;
  }
}

TEST(TailIndex, FormulaValue) {
  const auto a = tail_index(0.1, 0.2, 1.0, 100);
  ASSERT_TRUE(a.has_value());
  EXPECT_NEAR(*a, std::log(100.0) / std::log(8.0), 1e-12);
  EXPECT_NEAR(*a, 2.2146, 1e-4);
}

TEST(TailIndex, DegenerateCases) {
  EXPECT_FALSE(tail_index(0.1, 0.1, 1.0, 100).has_value());  // Y3 = Y2
  EXPECT_FALSE(tail_index(0.1, 0.5, 0.5, 100).has_value());  // Y_nu = Y3
  EXPECT_FALSE(tail_index(0.0, 0.5, 0.9, 100).has_value());  // ratio < 1
  EXPECT_FALSE(tail_index(0.0, 0.5, 1.0, 100).has_value());  // ratio = 1
  EXPECT_EQ(error_of([] { tail_index(0.0, 1.0, 2.0, 3); }), ErrorCode::InvalidArgument);
}

TEST(TailIndex, UniformSamplesEstimateOne) {
  const std::size_t n = 100000;
  const std::size_t nu = order_statistic_count(n, 0.85);
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 gen(seed);
    const auto s = summarize(draw(gen, n, 1, 0.0, 1.0, [](const auto& x) { return x[0]; }), nu + 2);
    const auto a = lower_tail_index(s, nu);
    ASSERT_TRUE(a.has_value());
    total += *a;
  }
  const double mean = total / 50.0;
  EXPECT_GE(mean, 0.7);
  EXPECT_LE(mean, 1.4);
}

TEST(TailIndex, UpperUsesMirroredStatistics) {
  std::mt19937_64 gen(3);
  const auto values = draw(gen, 5000, 1, 0.0, 1.0, [](const auto& x) { return x[0] * x[0]; });
  const std::size_t n = values.size();
  const std::size_t nu = order_statistic_count(n, 0.85);
  std::vector<double> y = values;  // y[k - 1] = Y_k
  std::sort(y.begin(), y.end());
  const double near = y[n - 2] - y[n - 3];    // Y_{n-1} - Y_{n-2}
  const double far = y[n - 3] - y[n - nu - 1];  // Y_{n-2} - Y_{n-nu}
  const auto up = upper_tail_index(summarize(values, nu + 2), nu);
  ASSERT_TRUE(up.has_value());
  EXPECT_NEAR(*up, std::log(static_cast<double>(nu)) / std::log(far / near), 1e-12);
}

TEST(EvtError, FormulaValue) {
  EXPECT_NEAR(evt_error(0.0, 0.01, 0.01, 1.0), 0.99, 1e-12);
  EXPECT_EQ(evt_error(0.3, 0.3, 0.01, 2.0), 0.0);
  EXPECT_EQ(evt_error(0.3, 0.3, 0.5, 0.1), 0.0);
}

TEST(EvtError, Preconditions) {
  EXPECT_EQ(error_of([] { evt_error(0.0, 0.1, 0.0, 1.0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(error_of([] { evt_error(0.0, 0.1, 0.01, 0.0); }), ErrorCode::DegenerateTail);
  EXPECT_EQ(error_of([] { evt_error(0.0, 0.1, 0.01, -1.0); }), ErrorCode::DegenerateTail);
  EXPECT_EQ(error_of([] { evt_error(0.2, 0.1, 0.01, 1.0); }), ErrorCode::InvalidArgument);
}

TEST(EvtError, Monotonicity) {
  double prev = std::numeric_limits<double>::infinity();
  for (double a = 0.1; a < 5.0; a += 0.1) {
    const double e = evt_error(0.0, 0.05, 0.01, a);
    EXPECT_LT(e, prev);
    EXPECT_GE(e, 0.0);
    prev = e;
  }
  prev = 0.0;
  for (double s = 0.01; s < 1.0; s += 0.01) {
    const double e = evt_error(1.0, 1.0 + s, 0.01, 1.3);
    EXPECT_GT(e, prev);
    prev = e;
  }
}

TEST(EvtError, OneDimensionalCoverage) {
  EvtConfig cfg;
  cfg.p = 0.01;
  const int trials = 500;
  const auto c = evt_coverage(trials, 10000, 1, 0.0, 1.0, -1.0, 2.0, cfg, [](const auto& x) { return 3 * x[0] - 1; }, 17);
  EXPECT_GE(c.lower / static_cast<double>(trials), three_sigma_floor(1 - cfg.p, trials));
}

// Both sides at the default p: the event {l_hat <= min, u_hat >= max} should
// hold with frequency 1 - 2p.
TEST(AdjustBounds, TwoSidedSoundnessAffine1d) {
  EvtConfig cfg;
  const int trials = 300;
  const auto c = evt_coverage(trials, 10000, 1, 0.0, 1.0, -1.0, 2.0, cfg, [](const auto& x) { return 3 * x[0] - 1; }, 23);
  EXPECT_GE(c.both / static_cast<double>(trials), three_sigma_floor(1 - 2 * cfg.p, trials));
}

TEST(AdjustBounds, TwoSidedSoundnessQuadratic1d) {
  EvtConfig cfg;
  const int trials = 300;
  const auto f = [](const auto& x) { return (x[0] - 0.3) * (x[0] - 0.3); };
  const auto c = evt_coverage(trials, 10000, 1, -1.0, 1.0, 0.0, 1.69, cfg, f, 29);
  EXPECT_GE(c.both / static_cast<double>(trials), three_sigma_floor(1 - 2 * cfg.p, trials));
}

TEST(AdjustBounds, LowerSoundnessQuadratic2d) {
  EvtConfig cfg;
  const int trials = 300;
  const auto f = [](const auto& x) { return (x[0] - 0.3) * (x[0] - 0.3) + (x[1] - 0.1) * (x[1] - 0.1); };
  const auto c = evt_coverage(trials, 10000, 2, -1.0, 1.0, 0.0, 2.9, cfg, f, 31);
  EXPECT_GE(c.lower / static_cast<double>(trials), three_sigma_floor(1 - cfg.p, trials));
}

TEST(AdjustBounds, WidensSampledInterval) {
  std::mt19937_64 gen(41);
  for (int t = 0; t < 50; ++t) {
    const auto values = draw(gen, 2000, 2, -1.0, 1.0, [](const auto& x) { return std::sin(3 * x[0]) + x[1] * x[1]; });
    const std::size_t nu = order_statistic_count(values.size(), 0.85);
    const auto s = summarize(values, nu + 2);
    const auto adj = adjust_bounds(s, EvtConfig{});
    EXPECT_LE(adj.l_hat, s.min());
    EXPECT_GE(adj.u_hat, s.max());
    EXPECT_GE(adj.err_lower, 0.0);
    EXPECT_GE(adj.err_upper, 0.0);
    EXPECT_EQ(adj.nu, nu);
  }
}

TEST(AdjustBounds, ConstantNeuronIsUnchanged) {
  const std::size_t n = 1000;
  const std::size_t nu = order_statistic_count(n, 0.85);
  const auto s = summarize(std::vector<double>(n, 2.5), nu + 2);
  for (TailFallback fb : {TailFallback::Conservative, TailFallback::None}) {
    EvtConfig cfg;
    cfg.fallback = fb;
    const auto adj = adjust_bounds(s, cfg);
    EXPECT_EQ(adj.l_hat, 2.5);
    EXPECT_EQ(adj.u_hat, 2.5);
    EXPECT_FALSE(adj.a_lower.has_value());
  }
  EvtConfig fail;
  fail.fallback = TailFallback::Fail;
  EXPECT_EQ(error_of([&] { adjust_bounds(s, fail); }), ErrorCode::DegenerateTail);
}

TEST(AdjustBounds, ConservativeFallbackUsesNuSpacing) {
  // Lower tail: Y1 = 0, Y2 = 0.1, Y3 = 1, then a flat run at 1.5, so the
  // spacing ratio (Y_nu - Y3)/(Y3 - Y2) is below 1.
  const std::size_t n = 200;
  const std::size_t nu = order_statistic_count(n, 0.85);
  std::vector<double> values{0.0, 0.1, 1.0};
  for (std::size_t i = 3; i < n - 10; ++i) values.push_back(1.5);
  for (int i = 0; i < 10; ++i) values.push_back(1.5 + 0.01 * i);
  const auto s = summarize(values, nu + 2);

  EvtConfig cfg;
  const auto adj = adjust_bounds(s, cfg);
  EXPECT_FALSE(adj.a_lower.has_value());
  EXPECT_DOUBLE_EQ(adj.err_lower, s.smallest(nu) - s.smallest(1));
  EXPECT_DOUBLE_EQ(adj.l_hat, -1.5);

  cfg.fallback = TailFallback::None;
  EXPECT_DOUBLE_EQ(adjust_bounds(s, cfg).l_hat, 0.0);
}

TEST(AdjustBounds, RejectsSmallSamples) {
  const auto s = summarize(std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 10);
  EXPECT_EQ(error_of([&] { adjust_bounds(s, EvtConfig{}); }), ErrorCode::InvalidArgument);
  // Enough samples but too few retained statistics.
  std::vector<double> big(1000);
  std::iota(big.begin(), big.end(), 0.0);
  EXPECT_EQ(error_of([&] { adjust_bounds(summarize(big, 10), EvtConfig{}); }), ErrorCode::InvalidArgument);
}

TEST(AdjustBounds, ToyLayerOneFollowsFormula) {
  const Network net = fixtures::toy_network();
  PtLirpaOptions opt;
  opt.samples = 10000;
  opt.evt = EvtConfig::for_network(net);
  opt.seed = 2024;
  const DomainBounds b = pt_lirpa_bounds(net, fixtures::toy_region(), {}, opt);
  ASSERT_FALSE(b.adjusted.empty());
  // Recompute the first neuron's adjusted interval with plain pow.
  const SampleSummary& s = b.estimate->summaries[0][0];
  const std::size_t nu = order_statistic_count(10000, 0.85);
  const double p = opt.evt.p;
  const double al = std::log(double(nu)) / std::log((s.smallest(nu) - s.smallest(3)) / (s.smallest(3) - s.smallest(2)));
  const double au = std::log(double(nu)) / std::log((s.largest(3) - s.largest(nu + 1)) / (s.largest(2) - s.largest(3)));
  const double lo = s.smallest(1) - (s.smallest(2) - s.smallest(1)) / (std::pow(1 - p, -al) - 1);
  const double hi = s.largest(1) + (s.largest(1) - s.largest(2)) / (std::pow(1 - p, -au) - 1);
  EXPECT_NEAR(b.adjusted[0].lo(0), lo, 1e-9 * std::abs(lo));
  EXPECT_NEAR(b.adjusted[0].hi(0), hi, 1e-9 * std::abs(hi));
  // The sampled interval sits near the annotated [-4.96, 6.97].
  EXPECT_NEAR(s.min(), -4.96, 0.1);
  EXPECT_NEAR(s.max(), 6.97, 0.1);
  for (std::size_t i = 0; i < b.adjusted.size(); ++i) {
    EXPECT_TRUE((b.adjusted[i].lo.array() <= b.estimate->pre[i].lo.array()).all());
    EXPECT_TRUE((b.adjusted[i].hi.array() >= b.estimate->pre[i].hi.array()).all());
  }
}

TEST(EvtConfig, NetworkDefaults) {
  const EvtConfig cfg = EvtConfig::for_network(fixtures::toy_network());
  EXPECT_DOUBLE_EQ(cfg.p, 0.00125);
  EXPECT_DOUBLE_EQ(cfg.xi, 0.85);
  EXPECT_NEAR(network_confidence(4, cfg.p), 0.99, 1e-12);
  EvtConfig bad;
  bad.p = 1.0;
  EXPECT_EQ(error_of([&] { bad.validate(); }), ErrorCode::InvalidArgument);
}

TEST(WorstCase, OneDimensionalClosedForm) {
  for (std::size_t n : {1, 10, 1000, 100000}) {
    for (double r : {1e-6, 1e-3, 0.01, 0.3, 0.9}) {
      const double expected = 1.0 - std::exp(-2.0 * static_cast<double>(n) * r);
      EXPECT_NEAR(worst_case_probability(n, r * 3.0, 3.0, 1), expected, 1e-10);
    }
  }
}

TEST(WorstCase, TwoDimensionalConstantIsPi) {
  const double rate = 1e4 * 0.0025 * std::numbers::pi;
  EXPECT_NEAR(worst_case_probability(10000, 0.05, 1.0, 2), 1.0 - std::exp(-rate), 1e-12);
  EXPECT_NEAR(worst_case_probability(1, 0.05, 1.0, 2), 1.0 - std::exp(-0.0025 * std::numbers::pi), 1e-14);
}

TEST(WorstCase, VanishesWithDelta) {
  EXPECT_LT(worst_case_probability(1000, 1e-12, 1.0, 3), 1e-12);
  EXPECT_EQ(error_of([] { worst_case_probability(10, 0.0, 1.0, 1); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(error_of([] { worst_case_probability(0, 0.1, 1.0, 1); }), ErrorCode::InvalidArgument);
}

TEST(WorstCase, Monotone) {
  // Growth in d needs the ball volume to shrink, which holds for delta/L <= 2/pi.
  const double cap = 2.0 / std::numbers::pi;
  for (double r : {0.001, 0.01, 0.1, 0.3, 0.5, cap}) {
    for (std::size_t d = 1; d < 8; ++d) {
      for (std::size_t n : {10, 100, 1000}) {
        const double base = worst_case_probability(n, r, 1.0, d);
        EXPECT_GE(worst_case_probability(n * 2, r, 1.0, d), base);
        EXPECT_GE(worst_case_probability(n, r * 1.1, 1.0, d), base);
        EXPECT_LE(worst_case_probability(n, r, 1.1, d), base);
        EXPECT_LE(worst_case_probability(n, r, 1.0, d + 1), base + 1e-15);
      }
    }
  }
}

TEST(Lipschitz, KnownValues) {
  EXPECT_DOUBLE_EQ(lipschitz_upper(fixtures::identity_network()), 1.0);
  std::vector<Layer> layers{{fixtures::mat({{3, 4}}), vec({0}), Activation::Identity}};
  EXPECT_NEAR(lipschitz_upper(Network(std::move(layers))), 5.0, 1e-12);
}

TEST(Lipschitz, BoundsEmpiricalSlope) {
  const Network net = fixtures::toy_network();
  const auto region = fixtures::toy_region();
  std::mt19937_64 gen(12);
  double slope = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const Vector x = fixtures::uniform_point(gen, region);
    const Vector y = fixtures::uniform_point(gen, region);
    const double dist = (x - y).norm();
    if (dist > 0.0) slope = std::max(slope, std::abs(net.forward(x) - net.forward(y)) / dist);
  }
  EXPECT_GT(slope, 0.0);
  EXPECT_GE(lipschitz_upper(net), slope);
}

TEST(NetworkConfidence, Values) {
  EXPECT_NEAR(network_confidence(4, 0.00125), 0.99, 1e-12);
  EXPECT_NEAR(network_confidence(1, 0.005), 0.99, 1e-12);
  EXPECT_EQ(network_confidence(4, 0.2), 0.0);
}
