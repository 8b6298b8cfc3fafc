// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#include "relubound/evt.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "relubound/error.hpp"

namespace relubound {

EvtConfig EvtConfig::for_network(const Network& net) {
  EvtConfig cfg;
  const std::size_t m = net.hidden_neuron_count();
  cfg.p = m > 0 ? 0.005 / static_cast<double>(m) : 0.005;
  return cfg;
}

void EvtConfig::validate() const {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidArgument, "p must lie in (0, 1)");
  if (!(xi > 0.0 && xi < 1.0)) throw Error(ErrorCode::InvalidArgument, "xi must lie in (0, 1)");
}

std::size_t order_statistic_count(std::size_t n, double xi) {
  if (!(xi > 0.0 && xi < 1.0)) throw Error(ErrorCode::InvalidArgument, "xi must lie in (0, 1)");
  const double v = std::pow(static_cast<double>(n), xi);
  // Nudge so exact powers such as 10000^0.5 do not floor to 99.
  return static_cast<std::size_t>(std::floor(v * (1.0 + 1e-12)));
}

std::size_t minimum_sample_count(double xi) {
  std::size_t n = 6;
  while (order_statistic_count(n, xi) < 4 || n < 2 * order_statistic_count(n, xi) + 6) ++n;
  return n;
}

std::optional<double> tail_index(double y2, double y3, double y_nu, std::size_t nu) {
  if (nu < 4) throw Error(ErrorCode::InvalidArgument, "tail_index needs nu >= 4");
  const double near = y3 - y2;
  const double far = y_nu - y3;
  if (!(near > 0.0) || !(far > 0.0)) return std::nullopt;
  const double ratio = far / near;
  if (!(ratio > 1.0) || !std::isfinite(ratio)) return std::nullopt;
  const double a = std::log(static_cast<double>(nu)) / std::log(ratio);
  if (!std::isfinite(a) || !(a > 0.0)) return std::nullopt;
  return a;
}

std::optional<double> lower_tail_index(const SampleSummary& s, std::size_t nu) {
  return tail_index(s.smallest(2), s.smallest(3), s.smallest(nu), nu);
}

std::optional<double> upper_tail_index(const SampleSummary& s, std::size_t nu) {
  // Mirrored: distances measured downward from the top.
  const double y_n1 = s.largest(2);       // Y_{n-1}
  const double y_n2 = s.largest(3);       // Y_{n-2}
  const double y_nnu = s.largest(nu + 1);  // Y_{n-nu}
  return tail_index(-y_n1, -y_n2, -y_nnu, nu);
}

double evt_error(double y1, double y2, double p, double a) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidArgument, "p must lie in (0, 1)");
  if (!(a > 0.0) || !std::isfinite(a)) throw Error(ErrorCode::DegenerateTail, "tail index must be positive");
  if (y2 < y1) throw Error(ErrorCode::InvalidArgument, "evt_error expects Y2 >= Y1");
  const double spacing = y2 - y1;
  if (spacing == 0.0) return 0.0;
  // (1-p)^(-a) - 1 = expm1(-a log1p(-p))
  const double denom = std::expm1(-a * std::log1p(-p));
  return spacing / denom;
}

EvtAdjustedBounds adjust_bounds(const SampleSummary& summary, const EvtConfig& cfg) {
  cfg.validate();
  const std::size_t n = summary.count();
  const std::size_t nu = order_statistic_count(n, cfg.xi);
  if (nu < 4 || n < 2 * nu + 6) {
    throw Error(ErrorCode::InvalidArgument, "adjust_bounds needs n >= 2 nu + 6 with nu >= 4 (n = " +
                                                std::to_string(n) + ", nu = " + std::to_string(nu) + ")");
  }
  if (summary.retained() < nu + 2) {
    throw Error(ErrorCode::InvalidArgument, "summary retains " + std::to_string(summary.retained()) +
                                                " order statistics, need " + std::to_string(nu + 2));
  }
  EvtAdjustedBounds out;
  out.nu = nu;

  out.a_lower = lower_tail_index(summary, nu);
  if (out.a_lower) {
    out.err_lower = evt_error(summary.smallest(1), summary.smallest(2), cfg.p, *out.a_lower);
  } else {
    switch (cfg.fallback) {
      case TailFallback::Conservative: out.err_lower = summary.smallest(nu) - summary.smallest(1); break;
      case TailFallback::None: out.err_lower = 0.0; break;
      case TailFallback::Fail: throw Error(ErrorCode::DegenerateTail, "lower tail index undefined");
    }
  }

  out.a_upper = upper_tail_index(summary, nu);
  if (out.a_upper) {
    out.err_upper = evt_error(-summary.largest(1), -summary.largest(2), cfg.p, *out.a_upper);
  } else {
    switch (cfg.fallback) {
      case TailFallback::Conservative: out.err_upper = summary.largest(1) - summary.largest(nu + 1); break;
      case TailFallback::None: out.err_upper = 0.0; break;
      case TailFallback::Fail: throw Error(ErrorCode::DegenerateTail, "upper tail index undefined");
    }
  }

  out.l_hat = summary.min() - out.err_lower;
  out.u_hat = summary.max() + out.err_upper;
  return out;
}

double worst_case_probability(std::size_t n, double delta, double lipschitz, std::size_t d) {
  if (n == 0 || d == 0) throw Error(ErrorCode::InvalidArgument, "n and d must be >= 1");
  if (!(delta > 0.0) || !(lipschitz > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta and L must be > 0");
  const double dd = static_cast<double>(d);
  // Volume constant of the unit d-ball, in log space.
  const double log_ball = 0.5 * dd * std::log(std::numbers::pi) - std::lgamma(0.5 * dd + 1.0);
  const double log_rate = std::log(static_cast<double>(n)) + dd * std::log(delta / lipschitz) + log_ball;
  const double rate = std::exp(log_rate);
  return std::clamp(-std::expm1(-rate), 0.0, 1.0);
}

double lipschitz_upper(const Network& net) {
  double l = 1.0;
  for (const Layer& layer : net.layers()) {
    Eigen::JacobiSVD<Matrix> svd(layer.weights);
    l *= svd.singularValues()(0);
  }
  return l;
}

double network_confidence(std::size_t neurons, double p) {
  return std::max(0.0, 1.0 - 2.0 * static_cast<double>(neurons) * p);
}

}  // namespace relubound
