// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "relubound/crown.hpp"
#include "relubound/evt.hpp"
#include "relubound/interval.hpp"
#include "relubound/sampling.hpp"

namespace relubound {

struct PtLirpaOptions {
  std::size_t samples = 10000;
  EvtConfig evt;
  bool apply_evt = true;
  // Intersect the adjusted sets with IBP. Both are valid enclosures of the
  // same reachable set, so this can only tighten.
  bool clip_to_ibp = true;
  AlphaPolicy alpha = AlphaPolicy::Zero;
  SamplingMode mode = SamplingMode::Shared;
  std::uint64_t seed = 0;
  RejectionBudget budget;
};

struct NeuronDiagnostic {
  std::size_t layer = 0;
  std::size_t neuron = 0;
  double sampled_lo = 0.0;
  double sampled_hi = 0.0;
  EvtAdjustedBounds adjusted;
  // Some upstream neuron is unstable and unsplit, so the pre-activation is
  // not differentiable on the region and the EVT guarantee is heuristic.
  bool heuristic = false;
};

struct DomainBounds {
  std::vector<IntervalVector> hidden;  // intervals used by the backward pass
  LinearBounds linear;
  OutputBounds output;
  // PT-LiRPA only.
  std::optional<ReachableEstimate> estimate;
  std::vector<IntervalVector> adjusted;  // every layer, before clipping
  std::vector<NeuronDiagnostic> diagnostics;
  std::optional<Vector> violation;
  double violation_value = 0.0;
};

// EVT-adjust every neuron of an estimate (hidden layers and output).
std::vector<IntervalVector> adjust_reachable_sets(const ReachableEstimate& estimate, const EvtConfig& cfg,
                                                  std::span<const SplitConstraint> constraints = {},
                                                  std::vector<NeuronDiagnostic>* diagnostics = nullptr);

DomainBounds crown_bounds(const Network& net, const PerturbationSet& region,
                          std::span<const SplitConstraint> constraints = {}, AlphaPolicy alpha = AlphaPolicy::Zero);

DomainBounds pt_lirpa_bounds(const Network& net, const PerturbationSet& region,
                             std::span<const SplitConstraint> constraints, const PtLirpaOptions& options);

}  // namespace relubound
