// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "relubound/interval.hpp"
#include "relubound/network.hpp"

namespace relubound {

enum class AlphaPolicy {
  Zero,      // alpha = 0 on every unstable neuron
  Adaptive,  // alpha = 1 when u >= |l|, else 0
};

double choose_alpha(AlphaPolicy policy, double l, double u);

// Linear relaxation of one ReLU neuron. The lower pair is what the lower
// (minimising) pass uses when its accumulated coefficient on this neuron is
// `coeff`; the upper pair is what the upper pass uses for the same coefficient.
struct NeuronRelaxation {
  double lower_slope = 0.0;
  double lower_bias = 0.0;
  double upper_slope = 0.0;
  double upper_bias = 0.0;
};

NeuronRelaxation relax_relu(double l, double u, double coeff, double alpha);

// Diagonals of the relaxation matrices for one hidden layer.
struct Relaxation {
  Vector d_lower, b_lower;
  Vector d_upper, b_upper;
};

struct LinearBounds {
  Vector a_lower;
  double c_lower = 0.0;
  Vector a_upper;
  double c_upper = 0.0;
};

// Intermediate artifacts of one backward pass, indexed by hidden layer.
struct BackwardTrace {
  std::vector<Relaxation> relaxations;
  // Accumulated coefficients on each hidden layer's post-activation, as seen
  // by the lower and upper passes just before that layer is relaxed.
  std::vector<Vector> lower_coeffs;
  std::vector<Vector> upper_coeffs;
};

// `hidden_pre` holds one pre-activation interval per hidden layer. The
// provenance of the intervals does not matter to the pass itself.
LinearBounds backward_bounds(const Network& net, std::span<const IntervalVector> hidden_pre,
                             AlphaPolicy alpha_policy = AlphaPolicy::Zero, BackwardTrace* trace = nullptr);

struct OutputBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Hölder concretization over the box, using its center and per-coordinate radius.
OutputBounds concretize(const LinearBounds& lb, const PerturbationSet& region);

}  // namespace relubound
