// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "relubound/crown.hpp"
#include "relubound/error.hpp"
#include "relubound/interval.hpp"

using namespace relubound;
using fixtures::vec;

namespace {

std::vector<IntervalVector> toy_ibp_hidden() {
  return ibp(fixtures::toy_network(), fixtures::toy_region()).hidden_pre();
}

// Sampled layer intervals annotated on the toy example (n = 10^4).
std::vector<IntervalVector> toy_sampled_hidden() {
  return {IntervalVector(vec({-4.96, -9.91}), vec({6.97, 17.98}), Provenance::Sampled),
          IntervalVector(vec({-35.96, 0.0}), vec({21.9, 19.91}), Provenance::Sampled)};
}

}  // namespace

TEST(RelaxRelu, UnstableNegativeCoefficientUsesChord) {
  const NeuronRelaxation r = relax_relu(-36, 28, -2, 0.0);
  EXPECT_DOUBLE_EQ(r.lower_slope, 0.4375);
  EXPECT_DOUBLE_EQ(r.lower_bias, 15.75);
  // Upper pass with the same (negative) coefficient takes the alpha line.
  EXPECT_DOUBLE_EQ(r.upper_slope, 0.0);
  EXPECT_DOUBLE_EQ(r.upper_bias, 0.0);
}

TEST(RelaxRelu, UnstableNonNegativeCoefficientUsesAlpha) {
  const NeuronRelaxation r = relax_relu(-10, 18, 2.75, 0.0);
  EXPECT_DOUBLE_EQ(r.lower_slope, 0.0);
  EXPECT_DOUBLE_EQ(r.lower_bias, 0.0);
  EXPECT_DOUBLE_EQ(r.upper_slope, 18.0 / 28.0);
  EXPECT_DOUBLE_EQ(r.upper_bias, 180.0 / 28.0);
  // A zero coefficient takes the same branch as a positive one.
  const NeuronRelaxation tie = relax_relu(-10, 18, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(tie.lower_slope, 0.0);
  EXPECT_DOUBLE_EQ(tie.upper_slope, 18.0 / 28.0);
}

TEST(RelaxRelu, StableCases) {
  const NeuronRelaxation active = relax_relu(1, 5, -3, 0.0);
  EXPECT_EQ(active.lower_slope, 1);
  EXPECT_EQ(active.lower_bias, 0);
  EXPECT_EQ(active.upper_slope, 1);
  EXPECT_EQ(active.upper_bias, 0);
  const NeuronRelaxation inactive = relax_relu(-5, -1, 3, 1.0);
  EXPECT_EQ(inactive.lower_slope, 0);
  EXPECT_EQ(inactive.upper_slope, 0);
  const NeuronRelaxation boundary = relax_relu(0, 4, -1, 0.0);
  EXPECT_EQ(boundary.lower_slope, 1);
}

TEST(RelaxRelu, RejectsInvertedInterval) { EXPECT_THROW(relax_relu(2, 1, 0, 0), Error); }

TEST(RelaxRelu, RelaxationsEncloseRelu) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int k = 0; k < 200; ++k) {
    double l = u(gen), h = u(gen);
    if (l > h) std::swap(l, h);
    for (double coeff : {-1.0, 1.0}) {
      for (double alpha : {0.0, 0.5, 1.0}) {
        const NeuronRelaxation r = relax_relu(l, h, coeff, alpha);
        for (int s = 0; s <= 20; ++s) {
          const double z = l + (h - l) * s / 20.0;
          const double relu = std::max(0.0, z);
          // Whichever side a pass picks, the line must lie on the correct side
          // of ReLU when multiplied by the coefficient.
          const double lower_line = r.lower_slope * z + r.lower_bias;
          const double upper_line = r.upper_slope * z + r.upper_bias;
          EXPECT_LE(coeff * lower_line, coeff * relu + 1e-9);
          EXPECT_GE(coeff * upper_line, coeff * relu - 1e-9);
        }
      }
    }
  }
}

TEST(Crown, AdaptiveAlpha) {
  EXPECT_EQ(choose_alpha(AlphaPolicy::Zero, -1, 5), 0.0);
  EXPECT_EQ(choose_alpha(AlphaPolicy::Adaptive, -1, 5), 1.0);
  EXPECT_EQ(choose_alpha(AlphaPolicy::Adaptive, -5, 1), 0.0);
}

TEST(Crown, ToyLowerPassArtifacts) {
  const Network net = fixtures::toy_network();
  BackwardTrace trace;
  const LinearBounds lb = backward_bounds(net, toy_ibp_hidden(), AlphaPolicy::Zero, &trace);
  EXPECT_NEAR(trace.relaxations[1].d_lower(0), 0.4375, 1e-12);
  EXPECT_NEAR(trace.relaxations[1].d_lower(1), 1.0, 1e-12);
  EXPECT_NEAR(trace.relaxations[1].b_lower(0), 15.75, 1e-12);
  EXPECT_NEAR(trace.relaxations[1].b_lower(1), 0.0, 1e-12);
  // Coefficient on layer-1 post-activations entering the first relaxation.
  EXPECT_NEAR(trace.lower_coeffs[0](0), -1.5, 1e-12);
  EXPECT_NEAR(trace.lower_coeffs[0](1), 2.75, 1e-12);
  EXPECT_NEAR(trace.relaxations[0].d_lower(0), 7.0 / 12.0, 1e-12);
  EXPECT_NEAR(trace.relaxations[0].d_lower(1), 0.0, 1e-12);
  EXPECT_NEAR(lb.a_lower(0), -1.75, 0.01);
  EXPECT_NEAR(lb.a_lower(1), -0.875, 0.01);
  EXPECT_NEAR(lb.c_lower, -35.88, 0.01);
}

TEST(Crown, ToyUpperPassArtifacts) {
  BackwardTrace trace;
  const LinearBounds lb = backward_bounds(fixtures::toy_network(), toy_ibp_hidden(), AlphaPolicy::Zero, &trace);
  EXPECT_NEAR(trace.relaxations[1].d_upper(0), 0.0, 1e-12);
  EXPECT_NEAR(trace.relaxations[1].d_upper(1), 1.0, 1e-12);
  EXPECT_NEAR(lb.a_upper(0), 0.40, 0.01);
  EXPECT_NEAR(lb.a_upper(1), 3.74, 0.01);
  EXPECT_NEAR(lb.c_upper, 12.27, 0.01);
}

TEST(Crown, ToyConcretized) {
  const LinearBounds lb = backward_bounds(fixtures::toy_network(), toy_ibp_hidden());
  const OutputBounds out = concretize(lb, fixtures::toy_region());
  EXPECT_NEAR(out.lower, -42.0, 0.05);
  EXPECT_NEAR(out.upper, 24.3, 0.05);
  // Contained in the IBP output interval.
  EXPECT_GE(out.lower, -56.0);
  EXPECT_LE(out.upper, 32.0);
}

TEST(Crown, ToySampledIntervals) {
  const LinearBounds lb = backward_bounds(fixtures::toy_network(), toy_sampled_hidden());
  EXPECT_NEAR(lb.a_lower(0), -1.2, 0.01);
  EXPECT_NEAR(lb.a_lower(1), -0.6, 0.01);
  EXPECT_NEAR(lb.c_lower, -30.1983, 0.01);
  const OutputBounds out = concretize(lb, fixtures::toy_region());
  EXPECT_NEAR(out.lower, -34.4, 0.1);
  EXPECT_GE(out.lower, -42.0);
}

TEST(Crown, AllStableIsExact) {
  // Biases large enough that every hidden neuron stays active on the box.
  std::mt19937_64 gen(5);
  Network net = fixtures::random_network(gen, {2, 4, 3, 1});
  std::vector<Layer> layers = net.layers();
  layers[0].bias.setConstant(50.0);
  layers[1].weights = layers[1].weights.cwiseAbs();
  layers[1].bias.setConstant(1.0);
  net = Network(layers);
  const auto region = PerturbationSet::linf_ball(vec({0.2, -0.1}), 0.5);
  const LayerBounds b = ibp(net, region);
  for (const auto& iv : b.hidden_pre()) ASSERT_TRUE((iv.lo.array() > 0).all());
  const LinearBounds lb = backward_bounds(net, b.hidden_pre());
  EXPECT_TRUE(lb.a_lower.isApprox(lb.a_upper, 1e-12));
  EXPECT_NEAR(lb.c_lower, lb.c_upper, 1e-9);
  const Vector effective = (net.layer(2).weights * net.layer(1).weights * net.layer(0).weights).transpose();
  EXPECT_TRUE(lb.a_lower.isApprox(effective, 1e-12));
  for (int k = 0; k < 50; ++k) {
    const Vector x = fixtures::uniform_point(gen, region);
    EXPECT_NEAR(lb.a_lower.dot(x) + lb.c_lower, net.forward(x), 1e-9);
  }
}

TEST(Crown, SoundOnRandomNets) {
  std::mt19937_64 gen(47);
  for (int trial = 0; trial < 30; ++trial) {
    const Network net = fixtures::random_network(gen, {3, 6, 6, 1});
    const auto region = PerturbationSet::linf_ball(fixtures::uniform_point(gen, PerturbationSet::linf_ball(Vector::Zero(3), 1.0)), 0.5);
    for (AlphaPolicy policy : {AlphaPolicy::Zero, AlphaPolicy::Adaptive}) {
      const LinearBounds lb = backward_bounds(net, ibp(net, region).hidden_pre(), policy);
      for (int k = 0; k < 1000; ++k) {
        const Vector x = fixtures::uniform_point(gen, region);
        const double f = net.forward(x);
        ASSERT_LE(lb.a_lower.dot(x) + lb.c_lower, f + 1e-9);
        ASSERT_GE(lb.a_upper.dot(x) + lb.c_upper, f - 1e-9);
      }
    }
  }
}

TEST(Crown, ConcretizeMonotoneInEpsilon) {
  const LinearBounds lb = backward_bounds(fixtures::toy_network(), toy_ibp_hidden());
  OutputBounds prev = concretize(lb, PerturbationSet::linf_ball(vec({0, 1}), 0.0));
  for (double eps : {0.1, 0.5, 1.0, 2.0, 4.0}) {
    const OutputBounds cur = concretize(lb, PerturbationSet::linf_ball(vec({0, 1}), eps));
    EXPECT_LE(cur.lower, prev.lower);
    EXPECT_GE(cur.upper, prev.upper);
    prev = cur;
  }
}

TEST(Crown, ConcretizeAtZeroRadiusEvaluatesAffineForms) {
  const LinearBounds lb = backward_bounds(fixtures::toy_network(), toy_ibp_hidden());
  const Vector x0 = vec({0, 1});
  const OutputBounds out = concretize(lb, PerturbationSet::linf_ball(x0, 0.0));
  EXPECT_DOUBLE_EQ(out.lower, lb.a_lower.dot(x0) + lb.c_lower);
  EXPECT_DOUBLE_EQ(out.upper, lb.a_upper.dot(x0) + lb.c_upper);
}

TEST(Crown, GeneralBoxUsesCenterAndRadius) {
  LinearBounds lb{vec({1, -2}), 0.5, vec({1, -2}), 0.5};
  const auto box = PerturbationSet::box(vec({0, 0}), vec({2, 1}));
  const OutputBounds out = concretize(lb, box);
  // Exact min/max of x1 - 2 x2 + 0.5 over the box.
  EXPECT_DOUBLE_EQ(out.lower, 0 - 2 + 0.5);
  EXPECT_DOUBLE_EQ(out.upper, 2 - 0 + 0.5);
}

TEST(Crown, Preconditions) {
  const Network net = fixtures::toy_network();
  auto hidden = toy_ibp_hidden();
  hidden.pop_back();
  EXPECT_THROW(backward_bounds(net, hidden), Error);
  std::mt19937_64 gen(1);
  const Network multi = fixtures::random_network(gen, {2, 3, 2});
  EXPECT_THROW(backward_bounds(multi, ibp(multi, PerturbationSet::linf_ball(vec({0, 0}), 1.0)).hidden_pre()), Error);
}
