// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "relubound/network.hpp"

namespace relubound {

// Phase of every IBP-unstable hidden neuron, in layer-major order. Stable
// neurons are implied by IBP and are not listed.
struct ActivationPattern {
  std::vector<SplitConstraint> phases;
};

struct ExactRange {
  double lower = 0.0;
  double upper = 0.0;
  Vector argmin;
  Vector argmax;
  std::size_t unstable = 0;          // IBP-unstable neurons
  std::size_t patterns_solved = 0;   // leaf patterns that reached the min/max LPs
  std::size_t patterns_feasible = 0;
  std::size_t lp_solves = 0;         // includes feasibility checks at layer boundaries
};

// Exact min and max of a single-output net over the box (optionally under
// split constraints). Throws ErrorCode::TooManyUnstable above max_unstable.
ExactRange exact_range(const Network& net, const PerturbationSet& region,
                       std::span<const SplitConstraint> constraints = {}, std::size_t max_unstable = 20);

// Every activation pattern whose region inside the box is nonempty.
std::vector<ActivationPattern> feasible_patterns(const Network& net, const PerturbationSet& region,
                                                 std::size_t max_unstable = 20);

}  // namespace relubound
