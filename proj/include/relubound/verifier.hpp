// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "relubound/bounding.hpp"

namespace relubound {

enum class SplitStrategy { Auto, Input, Relu };
enum class BoundMethod { Crown, PtLirpa };
enum class VerdictStatus { Robust, NotRobust, Unknown };

const char* to_string(VerdictStatus s) noexcept;
const char* to_string(BoundMethod m) noexcept;
const char* to_string(SplitStrategy s) noexcept;

struct PgdConfig {
  std::size_t steps = 50;
  std::size_t restarts = 10;
  double step_fraction = 0.25;  // first step as a fraction of the box width
};

struct VerifierConfig {
  BoundMethod method = BoundMethod::PtLirpa;
  std::size_t samples = 10000;  // per domain
  std::optional<double> p;      // defaults to 0.005 / m
  double xi = 0.85;
  TailFallback fallback = TailFallback::Conservative;
  AlphaPolicy alpha = AlphaPolicy::Zero;
  SamplingMode sampling = SamplingMode::Shared;
  std::size_t batch = 8;
  double timeout_seconds = 30.0;
  std::size_t max_depth = 40;
  SplitStrategy split = SplitStrategy::Auto;
  PgdConfig pgd;
  PgdConfig domain_pgd{10, 1, 0.25};  // cheap attack inside each open subdomain
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool decay = false;  // halve samples per depth
  bool clip_to_ibp = true;

  void validate() const;
  double failure_probability(const Network& net) const;
};

struct Domain {
  PerturbationSet region;
  std::vector<SplitConstraint> constraints;
  double f_lower = 0.0;
  double f_upper = 0.0;
  std::size_t depth = 0;
  std::uint64_t id = 0;
  std::vector<IntervalVector> hidden;  // intervals the last bound used
};

struct RoundStats {
  std::size_t round = 0;
  std::size_t processed = 0;
  std::size_t pruned = 0;
  std::size_t open = 0;
  double best_lower = 0.0;
};

struct VerifierStats {
  std::size_t domains_explored = 0;
  std::size_t rounds = 0;
  std::size_t resample_rounds = 0;  // bound computations that drew fresh samples
  std::size_t bound_only_violations = 0;
  std::size_t rejection_fallbacks = 0;
  std::size_t max_depth_reached = 0;
  double final_lower_bound = 0.0;
  double wall_seconds = 0.0;
  std::vector<RoundStats> per_round;
};

struct Verdict {
  VerdictStatus status = VerdictStatus::Unknown;
  double confidence = 0.0;
  std::optional<Vector> counterexample;
  double counterexample_value = 0.0;
  std::string reason;
  VerifierStats stats;
};

// Signed gradient descent on f with projection onto the box and random
// restarts. Any returned point has been re-evaluated: f(x) <= 0 and x in box.
std::optional<Vector> pgd_attack(const Network& net, const PerturbationSet& region, const PgdConfig& cfg,
                                 std::uint64_t seed);

// Children of `dom` with depth + 1 and no bounds yet. Ids are left at 0.
std::vector<Domain> split_domain(const Network& net, const Domain& dom, SplitStrategy strategy);

Verdict verify(const Network& net, const PerturbationSet& region, const VerifierConfig& cfg);

// Conjunction over the per-competitor nets from encode_margin.
Verdict verify_all(const std::vector<Network>& nets, const PerturbationSet& region, const VerifierConfig& cfg);

struct Certification {
  double epsilon = 0.0;
  std::size_t verifier_calls = 0;
};

// Largest radius (to 1e-4 * eps_hi) at which verify returns Robust. Unknown
// counts as not certified.
Certification certify_epsilon(const Network& net, const Vector& x0, const VerifierConfig& cfg, double eps_hi);

nlohmann::json to_json(const Verdict& v, bool include_timing = true);

}  // namespace relubound
