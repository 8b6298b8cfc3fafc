// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "relubound/interval.hpp"
#include "relubound/network.hpp"

namespace relubound {

// Smallest n with R^n <= 1 - psi.
std::size_t wilks_sample_size(double psi, double coverage);

// Per-neuron sample size that makes all m estimated sets cover a fraction
// `coverage` jointly with confidence psi.
std::size_t union_sample_size(double psi, double coverage, std::size_t neurons);

struct SamplePlan {
  double psi = 0.99;
  double coverage = 0.999;
  std::size_t neurons = 1;
  std::size_t samples = 1;
  std::uint64_t seed = 0;

  // Plan sized by union_sample_size.
  static SamplePlan for_confidence(double psi, double coverage, std::size_t neurons, std::uint64_t seed);
};

struct RejectionBudget {
  double max_draw_factor = 50.0;  // give up after this many draws per requested sample
};

// n i.i.d. uniform points (as columns) from the box restricted to the split
// constraints. Throws ErrorCode::RejectionBudgetExceeded when the constraints
// accept too few draws.
Matrix sample_region(const Network& net, const PerturbationSet& region,
                     std::span<const SplitConstraint> constraints, std::size_t n, std::uint64_t seed,
                     const RejectionBudget& budget = {});

// Order statistics of one neuron: the smallest and largest values seen,
// without the middle of the sample.
class SampleSummary {
 public:
  SampleSummary() = default;
  SampleSummary(std::vector<double> head, std::vector<double> tail, std::size_t count);

  std::size_t count() const { return count_; }
  std::size_t retained() const { return head_.size(); }
  double min() const { return head_.front(); }
  double max() const { return tail_.front(); }
  // Y_k for k = 1..retained(), ascending.
  double smallest(std::size_t k) const { return head_.at(k - 1); }
  // Y_{n+1-k} for k = 1..retained(), so largest(1) = Y_n.
  double largest(std::size_t k) const { return tail_.at(k - 1); }
  const std::vector<double>& head() const { return head_; }
  const std::vector<double>& tail() const { return tail_; }

 private:
  std::vector<double> head_;  // ascending
  std::vector<double> tail_;  // descending
  std::size_t count_ = 0;
};

nlohmann::json to_json(const SampleSummary& s, std::size_t max_entries = 8);

enum class SamplingMode {
  Shared,     // one batch feeds every neuron
  PerNeuron,  // fresh independent batch per neuron
};

struct EstimateOptions {
  std::size_t samples = 10000;
  std::size_t retain = 5;  // order statistics kept per side
  SamplingMode mode = SamplingMode::Shared;
  std::uint64_t seed = 0;
  RejectionBudget budget;
};

struct ReachableEstimate {
  // One entry per layer (hidden layers, then output).
  std::vector<IntervalVector> pre;
  std::vector<std::vector<SampleSummary>> summaries;
  // Lowest-output sampled point when that output is <= 0 (single-output nets).
  std::optional<Vector> violation;
  double violation_value = 0.0;
  std::size_t accepted = 0;
  std::size_t drawn = 0;
};

ReachableEstimate estimate_reachable_sets(const Network& net, const PerturbationSet& region,
                                          std::span<const SplitConstraint> constraints,
                                          const EstimateOptions& options);

}  // namespace relubound
