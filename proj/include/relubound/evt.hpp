// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>

#include "relubound/network.hpp"
#include "relubound/sampling.hpp"

namespace relubound {

// What to do when the tail-index estimate is undefined (tied order
// statistics, or a spacing ratio <= 1).
enum class TailFallback {
  Conservative,  // widen by the nu-spacing on that side and flag the neuron
  None,          // no widening
  Fail,          // throw ErrorCode::DegenerateTail
};

struct EvtConfig {
  double p = 0.005;  // per-side, per-neuron failure probability
  double xi = 0.85;  // nu = floor(n^xi)
  TailFallback fallback = TailFallback::Conservative;

  // p = 0.005 / m so that the network-level confidence is 0.99.
  static EvtConfig for_network(const Network& net);
  void validate() const;
};

// nu = floor(n^xi).
std::size_t order_statistic_count(std::size_t n, double xi);

// Smallest n with nu(n) >= 4 and n >= 2 nu(n) + 6, the minimum sample size
// adjust_bounds accepts.
std::size_t minimum_sample_count(double xi);

// log(nu) / log((Y_nu - Y_3) / (Y_3 - Y_2)); nullopt when undefined.
std::optional<double> tail_index(double y2, double y3, double y_nu, std::size_t nu);

// Tail index of the lower tail from the ascending order statistics.
std::optional<double> lower_tail_index(const SampleSummary& s, std::size_t nu);
// log(nu) / log((Y_{n-2} - Y_{n-nu}) / (Y_{n-1} - Y_{n-2})).
std::optional<double> upper_tail_index(const SampleSummary& s, std::size_t nu);

// (y2 - y1) / ((1 - p)^(-a) - 1).
double evt_error(double y1, double y2, double p, double a);

struct EvtAdjustedBounds {
  double l_hat = 0.0;
  double u_hat = 0.0;
  double err_lower = 0.0;
  double err_upper = 0.0;
  std::optional<double> a_lower;  // nullopt when the fallback was used
  std::optional<double> a_upper;
  std::size_t nu = 0;
};

EvtAdjustedBounds adjust_bounds(const SampleSummary& summary, const EvtConfig& cfg);

// Lower bound on the probability that the sampled minimum lies within delta of
// the true minimum, for an L-Lipschitz function on a d-dimensional region.
double worst_case_probability(std::size_t n, double delta, double lipschitz, std::size_t d);

// Product of layer spectral norms.
double lipschitz_upper(const Network& net);

// max(0, 1 - 2 m p).
double network_confidence(std::size_t neurons, double p);

}  // namespace relubound
