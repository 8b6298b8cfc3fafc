// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "relubound/network.hpp"

namespace relubound {

enum class Provenance { Ibp, Sampled, EvtAdjusted };

const char* to_string(Provenance p) noexcept;

struct IntervalVector {
  Vector lo;
  Vector hi;
  Provenance provenance = Provenance::Ibp;

  IntervalVector() = default;
  IntervalVector(Vector lo_, Vector hi_, Provenance prov = Provenance::Ibp);

  std::size_t size() const { return static_cast<std::size_t>(lo.size()); }
  double width(std::size_t j) const {
    return hi(static_cast<Eigen::Index>(j)) - lo(static_cast<Eigen::Index>(j));
  }
  bool contains(const Vector& v, double tol = 0.0) const;
  // Componentwise intersection; keeps this->provenance.
  IntervalVector intersect(const IntervalVector& other) const;
};

struct LayerBounds {
  // One entry per layer, the last being the output layer.
  std::vector<IntervalVector> pre;
  std::vector<IntervalVector> post;

  const IntervalVector& output() const { return pre.back(); }
  std::vector<IntervalVector> hidden_pre() const {
    return {pre.begin(), pre.end() - 1};
  }
};

IntervalVector interval_affine(const Matrix& w, const Vector& b, const IntervalVector& in);

// Interval bound propagation. Constrained neurons have their pre-activation
// interval clipped to the constrained half-line before the ReLU is applied.
LayerBounds ibp(const Network& net, const PerturbationSet& region,
                std::span<const SplitConstraint> constraints = {});

// Clip `hidden` (one interval per hidden layer) to the half-lines in `constraints`.
void apply_constraints(std::vector<IntervalVector>& hidden, std::span<const SplitConstraint> constraints);

}  // namespace relubound
