// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#include "relubound/interval.hpp"

#include <algorithm>

#include "relubound/error.hpp"

namespace relubound {

const char* to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::Ibp: return "ibp";
    case Provenance::Sampled: return "sampled";
    case Provenance::EvtAdjusted: return "evt-adjusted";
  }
  return "unknown";
}

IntervalVector::IntervalVector(Vector lo_, Vector hi_, Provenance prov)
    : lo(std::move(lo_)), hi(std::move(hi_)), provenance(prov) {
  if (lo.size() != hi.size()) throw Error(ErrorCode::DimensionMismatch, "interval bounds differ in size");
  if (!lo.allFinite() || !hi.allFinite()) throw Error(ErrorCode::NonFinite, "non-finite interval bound");
  if ((lo.array() > hi.array()).any()) throw Error(ErrorCode::InvalidArgument, "interval with lo > hi");
}

bool IntervalVector::contains(const Vector& v, double tol) const {
  if (v.size() != lo.size()) return false;
  return ((v.array() >= lo.array() - tol) && (v.array() <= hi.array() + tol)).all();
}

IntervalVector IntervalVector::intersect(const IntervalVector& other) const {
  if (other.size() != size()) throw Error(ErrorCode::DimensionMismatch, "intersecting intervals of different size");
  Vector l = lo.cwiseMax(other.lo);
  Vector h = hi.cwiseMin(other.hi);
  // Disjoint inputs should not happen for nested sound sets; collapse onto the
  // nearer endpoint rather than produce an invalid interval.
  for (Eigen::Index j = 0; j < l.size(); ++j) {
    if (l(j) > h(j)) l(j) = h(j) = 0.5 * (l(j) + h(j));
  }
  return {std::move(l), std::move(h), provenance};
}

IntervalVector interval_affine(const Matrix& w, const Vector& b, const IntervalVector& in) {
  if (w.cols() != static_cast<Eigen::Index>(in.size()) || b.size() != w.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "interval_affine: shape mismatch");
  }
  const Matrix pos = w.cwiseMax(0.0);
  const Matrix neg = w.cwiseMin(0.0);
  Vector lo = pos * in.lo + neg * in.hi + b;
  Vector hi = pos * in.hi + neg * in.lo + b;
  return {std::move(lo), std::move(hi), Provenance::Ibp};
}

void apply_constraints(std::vector<IntervalVector>& hidden, std::span<const SplitConstraint> constraints) {
  for (const SplitConstraint& c : constraints) {
    if (c.layer >= hidden.size() || c.neuron >= hidden[c.layer].size()) {
      throw Error(ErrorCode::InvalidArgument, "split constraint refers to a missing neuron");
    }
    auto& iv = hidden[c.layer];
    const auto j = static_cast<Eigen::Index>(c.neuron);
    if (c.phase == ReluPhase::Active) {
      iv.lo(j) = std::max(iv.lo(j), 0.0);
      iv.hi(j) = std::max(iv.hi(j), iv.lo(j));
    } else {
      iv.hi(j) = std::min(iv.hi(j), 0.0);
      iv.lo(j) = std::min(iv.lo(j), iv.hi(j));
    }
  }
}

LayerBounds ibp(const Network& net, const PerturbationSet& region, std::span<const SplitConstraint> constraints) {
  if (region.dim() != net.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "region has dimension " + std::to_string(region.dim()) +
                                                  ", network expects " + std::to_string(net.input_dim()));
  }
  for (const SplitConstraint& c : constraints) {
    if (c.layer >= net.num_hidden_layers() || c.neuron >= net.hidden_width(c.layer)) {
      throw Error(ErrorCode::InvalidArgument, "split constraint refers to a missing neuron");
    }
  }
  LayerBounds out;
  IntervalVector current(region.lower(), region.upper());
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const Layer& l = net.layer(i);
    IntervalVector pre = interval_affine(l.weights, l.bias, current);
    for (const SplitConstraint& c : constraints) {
      if (c.layer != i) continue;
      std::vector<IntervalVector> one{pre};
      SplitConstraint local = c;
      local.layer = 0;
      apply_constraints(one, std::span<const SplitConstraint>(&local, 1));
      pre = std::move(one.front());
    }
    IntervalVector post = pre;
    if (l.activation == Activation::Relu) {
      post.lo = pre.lo.cwiseMax(0.0);
      post.hi = pre.hi.cwiseMax(0.0);
    }
    out.pre.push_back(std::move(pre));
    out.post.push_back(post);
    current = std::move(post);
  }
  return out;
}

}  // namespace relubound
