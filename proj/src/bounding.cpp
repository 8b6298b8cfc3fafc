// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#include "relubound/bounding.hpp"

#include <algorithm>

#include "relubound/error.hpp"

namespace relubound {

namespace {

bool constrained(std::span<const SplitConstraint> constraints, std::size_t layer, std::size_t neuron) {
  return std::any_of(constraints.begin(), constraints.end(),
                     [&](const SplitConstraint& c) { return c.layer == layer && c.neuron == neuron; });
}

}  // namespace

std::vector<IntervalVector> adjust_reachable_sets(const ReachableEstimate& estimate, const EvtConfig& cfg,
                                                  std::span<const SplitConstraint> constraints,
                                                  std::vector<NeuronDiagnostic>* diagnostics) {
  std::vector<IntervalVector> out;
  bool upstream_kink = false;
  for (std::size_t i = 0; i < estimate.summaries.size(); ++i) {
    const auto& layer = estimate.summaries[i];
    const auto width = static_cast<Eigen::Index>(layer.size());
    Vector lo(width), hi(width);
    bool kink_here = false;
    for (Eigen::Index j = 0; j < width; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const SampleSummary& s = layer[jj];
      const EvtAdjustedBounds adj = adjust_bounds(s, cfg);
      lo(j) = adj.l_hat;
      hi(j) = adj.u_hat;
      if (diagnostics) {
        diagnostics->push_back({i, jj, s.min(), s.max(), adj, upstream_kink});
      }
      if (s.min() < 0.0 && s.max() > 0.0 && !constrained(constraints, i, jj)) kink_here = true;
    }
    upstream_kink = upstream_kink || kink_here;
    out.emplace_back(std::move(lo), std::move(hi), Provenance::EvtAdjusted);
  }
  return out;
}

DomainBounds crown_bounds(const Network& net, const PerturbationSet& region,
                          std::span<const SplitConstraint> constraints, AlphaPolicy alpha) {
  DomainBounds out;
  const LayerBounds b = ibp(net, region, constraints);
  out.hidden = b.hidden_pre();
  out.linear = backward_bounds(net, out.hidden, alpha);
  out.output = concretize(out.linear, region);
  return out;
}

DomainBounds pt_lirpa_bounds(const Network& net, const PerturbationSet& region,
                             std::span<const SplitConstraint> constraints, const PtLirpaOptions& options) {
  net.require_single_output();
  options.evt.validate();
  const std::size_t nu = order_statistic_count(options.samples, options.evt.xi);
  EstimateOptions est_opt;
  est_opt.samples = options.samples;
  est_opt.retain = nu + 2;
  est_opt.mode = options.mode;
  est_opt.seed = options.seed;
  est_opt.budget = options.budget;

  DomainBounds out;
  out.estimate = estimate_reachable_sets(net, region, constraints, est_opt);
  const ReachableEstimate& est = *out.estimate;
  out.violation = est.violation;
  out.violation_value = est.violation_value;

  if (options.apply_evt) {
    out.adjusted = adjust_reachable_sets(est, options.evt, constraints, &out.diagnostics);
  } else {
    out.adjusted = est.pre;
  }

  const LayerBounds b = ibp(net, region, constraints);
  const std::size_t hidden = net.num_hidden_layers();
  out.hidden.assign(out.adjusted.begin(), out.adjusted.begin() + static_cast<std::ptrdiff_t>(hidden));
  if (options.clip_to_ibp) {
    for (std::size_t i = 0; i < hidden; ++i) out.hidden[i] = out.hidden[i].intersect(b.pre[i]);
  }
  apply_constraints(out.hidden, constraints);
  out.linear = backward_bounds(net, out.hidden, options.alpha);
  out.output = concretize(out.linear, region);
  return out;
}

}  // namespace relubound
