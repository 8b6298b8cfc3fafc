// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#include "relubound/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <nlohmann/json.hpp>

#include "relubound/error.hpp"
#include "relubound/rng.hpp"

namespace relubound {

namespace {

void check_probability(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " must lie in (0, 1)");
  }
}

std::size_t ceil_count(double v) {
  if (!std::isfinite(v) || v > 1e18) throw Error(ErrorCode::InvalidArgument, "sample size overflow");
  const double c = std::ceil(v);
  return c < 1.0 ? 1 : static_cast<std::size_t>(c);
}

bool satisfies(const std::vector<Vector>& pre, std::span<const SplitConstraint> constraints) {
  for (const SplitConstraint& c : constraints) {
    const double z = pre[c.layer](static_cast<Eigen::Index>(c.neuron));
    if (c.phase == ReluPhase::Active ? !(z >= 0.0) : !(z <= 0.0)) return false;
  }
  return true;
}

// Keeps the k smallest and k largest values of a stream, merged chunk by chunk.
class ExtremeBuffer {
 public:
  explicit ExtremeBuffer(std::size_t k) : k_(k) {}

  void add(const double* values, std::size_t count) {
    low_.insert(low_.end(), values, values + count);
    high_.insert(high_.end(), values, values + count);
    seen_ += count;
    trim();
  }

  SampleSummary finish() {
    std::sort(low_.begin(), low_.end());
    std::sort(high_.begin(), high_.end(), std::greater<>());
    return {std::move(low_), std::move(high_), seen_};
  }

 private:
  void trim() {
    if (low_.size() > k_) {
      std::nth_element(low_.begin(), low_.begin() + static_cast<std::ptrdiff_t>(k_) - 1, low_.end());
      low_.resize(k_);
    }
    if (high_.size() > k_) {
      std::nth_element(high_.begin(), high_.begin() + static_cast<std::ptrdiff_t>(k_) - 1, high_.end(),
                       std::greater<>());
      high_.resize(k_);
    }
  }

  std::size_t k_;
  std::size_t seen_ = 0;
  std::vector<double> low_, high_;
};

}  // namespace

std::size_t wilks_sample_size(double psi, double coverage) {
  check_probability(psi, "psi");
  check_probability(coverage, "coverage");
  return ceil_count(std::log1p(-psi) / std::log(coverage));
}

std::size_t union_sample_size(double psi, double coverage, std::size_t neurons) {
  check_probability(psi, "psi");
  check_probability(coverage, "coverage");
  if (neurons == 0) throw Error(ErrorCode::InvalidArgument, "neuron count must be >= 1");
  const double m = static_cast<double>(neurons);
  // 1 - psi^(1/m) computed as -expm1(log(psi)/m) to keep precision for large m.
  const double num = std::log(-std::expm1(std::log(psi) / m));
  const double den = std::log1p(-(1.0 - coverage) / m);
  return ceil_count(num / den);
}

SamplePlan SamplePlan::for_confidence(double psi, double coverage, std::size_t neurons, std::uint64_t seed) {
  SamplePlan plan;
  plan.psi = psi;
  plan.coverage = coverage;
  plan.neurons = neurons;
  plan.samples = union_sample_size(psi, coverage, neurons);
  plan.seed = seed;
  return plan;
}

SampleSummary::SampleSummary(std::vector<double> head, std::vector<double> tail, std::size_t count)
    : head_(std::move(head)), tail_(std::move(tail)), count_(count) {
  if (head_.empty() || tail_.empty()) throw Error(ErrorCode::InvalidArgument, "empty sample summary");
  if (!std::is_sorted(head_.begin(), head_.end()) || !std::is_sorted(tail_.begin(), tail_.end(), std::greater<>())) {
    throw Error(ErrorCode::InvalidArgument, "sample summary is not sorted");
  }
}

nlohmann::json to_json(const SampleSummary& s, std::size_t max_entries) {
  nlohmann::json doc;
  doc["count"] = s.count();
  doc["min"] = s.min();
  doc["max"] = s.max();
  const auto take = [&](const std::vector<double>& v) {
    return std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(max_entries, v.size())));
  };
  doc["head"] = take(s.head());
  doc["tail"] = take(s.tail());
  return doc;
}

namespace {

Matrix draw_points(const Network& net, const PerturbationSet& region, std::span<const SplitConstraint> constraints,
                   std::size_t n, std::uint64_t seed, const RejectionBudget& budget, std::size_t& drawn) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "sample count must be >= 1");
  if (region.dim() != net.input_dim()) throw Error(ErrorCode::DimensionMismatch, "region does not match network input");
  const auto d = static_cast<Eigen::Index>(region.dim());
  const Vector& lo = region.lower();
  const Vector& hi = region.upper();
  Rng rng(seed);
  Matrix out(d, static_cast<Eigen::Index>(n));
  const auto max_draws = static_cast<std::size_t>(budget.max_draw_factor * static_cast<double>(n));
  std::size_t accepted = 0;
  drawn = 0;
  Vector x(d);
  while (accepted < n) {
    if (drawn >= max_draws) {
      throw Error(ErrorCode::RejectionBudgetExceeded,
                  "rejection sampling accepted " + std::to_string(accepted) + " of " + std::to_string(drawn) +
                      " draws; split this domain by input instead");
    }
    for (Eigen::Index i = 0; i < d; ++i) x(i) = rng.uniform(lo(i), hi(i));
    ++drawn;
    if (!constraints.empty() && !satisfies(net.pre_activations(x), constraints)) continue;
    out.col(static_cast<Eigen::Index>(accepted++)) = x;
  }
  return out;
}

}  // namespace

Matrix sample_region(const Network& net, const PerturbationSet& region, std::span<const SplitConstraint> constraints,
                     std::size_t n, std::uint64_t seed, const RejectionBudget& budget) {
  std::size_t drawn = 0;
  return draw_points(net, region, constraints, n, seed, budget, drawn);
}

namespace {

std::size_t chunk_size(std::size_t retain) { return std::max<std::size_t>(8192, 2 * retain); }

ReachableEstimate estimate_shared(const Network& net, const PerturbationSet& region,
                                  std::span<const SplitConstraint> constraints, const EstimateOptions& opt) {
  const std::size_t n = opt.samples;
  const std::size_t k = std::min(opt.retain, n);
  const std::size_t n_layers = net.num_layers();
  std::vector<std::vector<ExtremeBuffer>> buffers(n_layers);
  for (std::size_t i = 0; i < n_layers; ++i) {
    buffers[i].assign(static_cast<std::size_t>(net.layer(i).weights.rows()), ExtremeBuffer(k));
  }

  ReachableEstimate est;
  double best = std::numeric_limits<double>::infinity();
  Vector best_point;
  const bool single = net.output_dim() == 1;

  const Matrix points = draw_points(net, region, constraints, n, opt.seed, opt.budget, est.drawn);
  est.accepted = n;
  const std::size_t step = chunk_size(k);
  std::vector<double> row;
  for (std::size_t start = 0; start < n; start += step) {
    const auto cols = static_cast<Eigen::Index>(std::min(step, n - start));
    Matrix h = points.middleCols(static_cast<Eigen::Index>(start), cols);
    for (std::size_t i = 0; i < n_layers; ++i) {
      const Layer& l = net.layer(i);
      Matrix z = l.weights * h;
      z.colwise() += l.bias;
      row.resize(static_cast<std::size_t>(cols));
      for (Eigen::Index j = 0; j < z.rows(); ++j) {
        for (Eigen::Index c = 0; c < cols; ++c) row[static_cast<std::size_t>(c)] = z(j, c);
        buffers[i][static_cast<std::size_t>(j)].add(row.data(), row.size());
      }
      if (i + 1 == n_layers && single) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          if (z(0, c) < best) {
            best = z(0, c);
            best_point = points.col(static_cast<Eigen::Index>(start) + c);
          }
        }
      }
      h = l.activation == Activation::Relu ? Matrix(z.cwiseMax(0.0)) : std::move(z);
    }
  }

  for (std::size_t i = 0; i < n_layers; ++i) {
    std::vector<SampleSummary> layer;
    const auto width = static_cast<Eigen::Index>(buffers[i].size());
    Vector lo(width), hi(width);
    for (Eigen::Index j = 0; j < width; ++j) {
      layer.push_back(buffers[i][static_cast<std::size_t>(j)].finish());
      lo(j) = layer.back().min();
      hi(j) = layer.back().max();
    }
    est.pre.emplace_back(std::move(lo), std::move(hi), Provenance::Sampled);
    est.summaries.push_back(std::move(layer));
  }
  if (single && best <= 0.0) {
    est.violation = best_point;
    est.violation_value = best;
  }
  return est;
}

ReachableEstimate estimate_per_neuron(const Network& net, const PerturbationSet& region,
                                      std::span<const SplitConstraint> constraints, const EstimateOptions& opt) {
  const std::size_t n = opt.samples;
  const std::size_t k = std::min(opt.retain, n);
  ReachableEstimate est;
  double best = std::numeric_limits<double>::infinity();
  Vector best_point;
  const bool single = net.output_dim() == 1;
  std::uint64_t stream = 0;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const auto width = net.layer(i).weights.rows();
    Vector lo(width), hi(width);
    std::vector<SampleSummary> layer;
    for (Eigen::Index j = 0; j < width; ++j, ++stream) {
      std::size_t drawn = 0;
      const Matrix points =
          draw_points(net, region, constraints, n, derive_seed(opt.seed, stream), opt.budget, drawn);
      est.accepted += n;
      est.drawn += drawn;
      // Propagate only as far as layer i.
      Matrix h = points;
      for (std::size_t q = 0; q < i; ++q) {
        Matrix z = net.layer(q).weights * h;
        z.colwise() += net.layer(q).bias;
        h = z.cwiseMax(0.0);
      }
      const Eigen::RowVectorXd zj = (net.layer(i).weights.row(j) * h).array() + net.layer(i).bias(j);
      ExtremeBuffer buf(k);
      buf.add(zj.data(), static_cast<std::size_t>(zj.size()));
      layer.push_back(buf.finish());
      lo(j) = layer.back().min();
      hi(j) = layer.back().max();
      if (i + 1 == net.num_layers() && single) {
        for (Eigen::Index c = 0; c < zj.size(); ++c) {
          if (zj(c) < best) {
            best = zj(c);
            best_point = points.col(c);
          }
        }
      }
    }
    est.pre.emplace_back(std::move(lo), std::move(hi), Provenance::Sampled);
    est.summaries.push_back(std::move(layer));
  }
  if (single && best <= 0.0) {
    est.violation = best_point;
    est.violation_value = best;
  }
  return est;
}

}  // namespace

ReachableEstimate estimate_reachable_sets(const Network& net, const PerturbationSet& region,
                                          std::span<const SplitConstraint> constraints,
                                          const EstimateOptions& options) {
  if (options.samples == 0) throw Error(ErrorCode::InvalidArgument, "sample count must be >= 1");
  if (options.retain < 1) throw Error(ErrorCode::InvalidArgument, "must retain at least one order statistic");
  if (options.samples < options.retain + 1) {
    throw Error(ErrorCode::InvalidArgument, "sample count " + std::to_string(options.samples) +
                                                " too small for " + std::to_string(options.retain) +
                                                " retained order statistics");
  }
  for (const SplitConstraint& c : constraints) {
    if (c.layer >= net.num_hidden_layers() || c.neuron >= net.hidden_width(c.layer)) {
      throw Error(ErrorCode::InvalidArgument, "split constraint refers to a missing neuron");
    }
  }
  return options.mode == SamplingMode::Shared ? estimate_shared(net, region, constraints, options)
                                              : estimate_per_neuron(net, region, constraints, options);
}

}  // namespace relubound
