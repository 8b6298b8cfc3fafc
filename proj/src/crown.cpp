// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#include "relubound/crown.hpp"

#include <cmath>

#include "relubound/error.hpp"

namespace relubound {

double choose_alpha(AlphaPolicy policy, double l, double u) {
  switch (policy) {
    case AlphaPolicy::Zero: return 0.0;
    case AlphaPolicy::Adaptive: return u >= std::fabs(l) ? 1.0 : 0.0;
  }
  return 0.0;
}

NeuronRelaxation relax_relu(double l, double u, double coeff, double alpha) {
  if (!(l <= u)) throw Error(ErrorCode::InvalidArgument, "relax_relu: l > u");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "relax_relu: alpha outside [0, 1]");
  if (l >= 0.0) return {1.0, 0.0, 1.0, 0.0};
  if (u <= 0.0) return {0.0, 0.0, 0.0, 0.0};
  const double slope = u / (u - l);
  const double intercept = -u * l / (u - l);
  NeuronRelaxation r;
  if (coeff >= 0.0) {
    r.lower_slope = alpha;
    r.lower_bias = 0.0;
    r.upper_slope = slope;
    r.upper_bias = intercept;
  } else {
    r.lower_slope = slope;
    r.lower_bias = intercept;
    r.upper_slope = alpha;
    r.upper_bias = 0.0;
  }
  return r;
}

namespace {

// Runs one side of the backward pass. `lower_side` picks which half of each
// NeuronRelaxation is used.
void backward_side(const Network& net, std::span<const IntervalVector> hidden_pre, AlphaPolicy policy,
                   bool lower_side, Vector& a_out, double& c_out, BackwardTrace* trace) {
  const std::size_t n_hidden = net.num_hidden_layers();
  const Layer& last = net.layers().back();
  Eigen::RowVectorXd a = last.weights.row(0);
  double c = last.bias(0);
  for (std::size_t i = n_hidden; i-- > 0;) {
    const IntervalVector& iv = hidden_pre[i];
    const Eigen::Index width = a.size();
    Vector slope(width), bias(width);
    if (trace) (lower_side ? trace->lower_coeffs : trace->upper_coeffs)[i] = a.transpose();
    for (Eigen::Index j = 0; j < width; ++j) {
      const double l = iv.lo(j), u = iv.hi(j);
      const NeuronRelaxation r = relax_relu(l, u, a(j), choose_alpha(policy, l, u));
      slope(j) = lower_side ? r.lower_slope : r.upper_slope;
      bias(j) = lower_side ? r.lower_bias : r.upper_bias;
    }
    if (trace) {
      Relaxation& rel = trace->relaxations[i];
      (lower_side ? rel.d_lower : rel.d_upper) = slope;
      (lower_side ? rel.b_lower : rel.b_upper) = bias;
    }
    c += a.dot(bias.transpose());
    const Eigen::RowVectorXd on_pre = a.cwiseProduct(slope.transpose());
    const Layer& layer = net.layer(i);
    c += on_pre.dot(layer.bias.transpose());
    a = on_pre * layer.weights;
  }
  a_out = a.transpose();
  c_out = c;
}

}  // namespace

LinearBounds backward_bounds(const Network& net, std::span<const IntervalVector> hidden_pre, AlphaPolicy alpha_policy,
                             BackwardTrace* trace) {
  net.require_single_output();
  const std::size_t n_hidden = net.num_hidden_layers();
  if (hidden_pre.size() != n_hidden) {
    throw Error(ErrorCode::InvalidArgument, "backward_bounds: expected " + std::to_string(n_hidden) +
                                                " hidden intervals, got " + std::to_string(hidden_pre.size()));
  }
  for (std::size_t i = 0; i < n_hidden; ++i) {
    if (hidden_pre[i].size() != net.hidden_width(i)) {
      throw Error(ErrorCode::DimensionMismatch, "backward_bounds: interval for hidden layer " + std::to_string(i) +
                                                    " has the wrong width");
    }
  }
  if (trace) {
    trace->relaxations.assign(n_hidden, {});
    trace->lower_coeffs.assign(n_hidden, {});
    trace->upper_coeffs.assign(n_hidden, {});
  }
  LinearBounds lb;
  backward_side(net, hidden_pre, alpha_policy, true, lb.a_lower, lb.c_lower, trace);
  backward_side(net, hidden_pre, alpha_policy, false, lb.a_upper, lb.c_upper, trace);
  return lb;
}

OutputBounds concretize(const LinearBounds& lb, const PerturbationSet& region) {
  if (static_cast<std::size_t>(lb.a_lower.size()) != region.dim() ||
      static_cast<std::size_t>(lb.a_upper.size()) != region.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "concretize: coefficient and region dimensions differ");
  }
  const Vector center = region.center();
  const Vector radius = region.radius();
  OutputBounds out;
  out.lower = lb.a_lower.dot(center) - lb.a_lower.cwiseAbs().dot(radius) + lb.c_lower;
  out.upper = lb.a_upper.dot(center) + lb.a_upper.cwiseAbs().dot(radius) + lb.c_upper;
  return out;
}

}  // namespace relubound
