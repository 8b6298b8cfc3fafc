// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#include "relubound/report.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "relubound/error.hpp"
#include "relubound/oracle.hpp"

namespace relubound {

const char* to_string(ReportMethod m) noexcept {
  switch (m) {
    case ReportMethod::Ibp: return "ibp";
    case ReportMethod::Crown: return "crown";
    case ReportMethod::PtLirpa: return "pt-lirpa";
    case ReportMethod::Oracle: return "oracle";
  }
  return "unknown";
}

ReportMethod parse_report_method(const std::string& name) {
  if (name == "ibp") return ReportMethod::Ibp;
  if (name == "crown") return ReportMethod::Crown;
  if (name == "pt-lirpa") return ReportMethod::PtLirpa;
  if (name == "oracle") return ReportMethod::Oracle;
  throw Error(ErrorCode::InvalidArgument, "unknown method \"" + name + "\"");
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

nlohmann::json vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json layers_json(const std::vector<IntervalVector>& layers) {
  auto out = nlohmann::json::array();
  for (const auto& iv : layers) out.push_back(to_json(iv));
  return out;
}

nlohmann::json linear_json(const LinearBounds& lb) {
  return {{"a_lower", vec(lb.a_lower)}, {"c_lower", lb.c_lower}, {"a_upper", vec(lb.a_upper)}, {"c_upper", lb.c_upper}};
}

const char* fallback_name(TailFallback f) {
  switch (f) {
    case TailFallback::Conservative: return "conservative";
    case TailFallback::None: return "none";
    case TailFallback::Fail: return "fail";
  }
  return "unknown";
}

}  // namespace

nlohmann::json to_json(const IntervalVector& iv) {
  return {{"lo", vec(iv.lo)}, {"hi", vec(iv.hi)}, {"provenance", to_string(iv.provenance)}};
}

RunReport run_method(ReportMethod method, const Network& net, const PerturbationSet& region,
                     const RunOptions& options) {
  net.require_single_output();
  RunReport r;
  r.method = method;
  r.details = nlohmann::json::object();
  const auto t0 = Clock::now();
  switch (method) {
    case ReportMethod::Ibp: {
      const LayerBounds b = ibp(net, region);
      r.timing_ms.emplace_back("ibp", ms_since(t0));
      r.bounds = {b.output().lo(0), b.output().hi(0)};
      r.details["layers"] = layers_json(b.pre);
      break;
    }
    case ReportMethod::Crown: {
      const DomainBounds b = crown_bounds(net, region, {}, options.alpha);
      r.timing_ms.emplace_back("bound", ms_since(t0));
      r.bounds = b.output;
      r.details["linear"] = linear_json(b.linear);
      r.details["layers"] = layers_json(b.hidden);
      break;
    }
    case ReportMethod::PtLirpa: {
      PtLirpaOptions opt = options.pt;
      opt.alpha = options.alpha;
      const DomainBounds b = pt_lirpa_bounds(net, region, {}, opt);
      r.timing_ms.emplace_back("sample_and_bound", ms_since(t0));
      r.bounds = b.output;
      r.confidence = opt.apply_evt ? network_confidence(net.hidden_neuron_count(), opt.evt.p) : 0.0;
      r.details["linear"] = linear_json(b.linear);
      r.details["sampled"] = layers_json(b.estimate->pre);
      r.details["adjusted"] = layers_json(b.adjusted);
      r.details["layers"] = layers_json(b.hidden);
      const IntervalVector& out = b.estimate->pre.back();
      r.details["sampled_output"] = {out.lo(0), out.hi(0)};
      r.details["adjusted_output"] = {b.adjusted.back().lo(0), b.adjusted.back().hi(0)};
      r.details["samples_drawn"] = b.estimate->drawn;
      if (b.violation) {
        r.details["sampled_violation"] = vec(*b.violation);
        r.details["sampled_violation_value"] = b.violation_value;
      }
      if (options.diagnostics) {
        auto diag = nlohmann::json::array();
        for (const NeuronDiagnostic& d : b.diagnostics) {
          const auto& a = d.adjusted;
          diag.push_back({{"layer", d.layer},
                          {"neuron", d.neuron},
                          {"sampled", {d.sampled_lo, d.sampled_hi}},
                          {"adjusted", {a.l_hat, a.u_hat}},
                          {"err_lower", a.err_lower},
                          {"err_upper", a.err_upper},
                          {"a_lower", a.a_lower ? nlohmann::json(*a.a_lower) : nlohmann::json(nullptr)},
                          {"a_upper", a.a_upper ? nlohmann::json(*a.a_upper) : nlohmann::json(nullptr)},
                          {"nu", a.nu},
                          {"heuristic", d.heuristic}});
        }
        r.details["diagnostics"] = std::move(diag);
      }
      break;
    }
    case ReportMethod::Oracle: {
      const ExactRange e = exact_range(net, region, {}, options.max_unstable);
      r.timing_ms.emplace_back("enumerate", ms_since(t0));
      r.bounds = {e.lower, e.upper};
      r.details["argmin"] = vec(e.argmin);
      r.details["argmax"] = vec(e.argmax);
      r.details["unstable"] = e.unstable;
      r.details["patterns_solved"] = e.patterns_solved;
      r.details["patterns_feasible"] = e.patterns_feasible;
      r.details["lp_solves"] = e.lp_solves;
      break;
    }
  }
  r.timing_ms.emplace_back("total", ms_since(t0));
  return r;
}

std::optional<double> tightness_ratio(const OutputBounds& method, const OutputBounds& crown) {
  const double w = method.upper - method.lower;
  const double wc = crown.upper - crown.lower;
  if (wc == 0.0) return w == 0.0 ? std::optional<double>(1.0) : std::nullopt;
  return w / wc;
}

nlohmann::json config_echo(const Network& net, const PerturbationSet& region, const RunOptions& options) {
  return {{"n", options.pt.samples},
          {"p", options.pt.evt.p},
          {"xi", options.pt.evt.xi},
          {"fallback", fallback_name(options.pt.evt.fallback)},
          {"seed", options.pt.seed},
          {"alpha_policy", options.alpha == AlphaPolicy::Zero ? "zero" : "adaptive"},
          {"sampling", options.pt.mode == SamplingMode::Shared ? "shared" : "per-neuron"},
          {"hidden_neurons", net.hidden_neuron_count()},
          {"region", region.to_json()}};
}

nlohmann::json to_json(const RunReport& r, bool include_timing) {
  nlohmann::json doc;
  doc["method"] = to_string(r.method);
  doc["bounds"] = {{"lower", r.bounds.lower}, {"upper", r.bounds.upper}};
  doc["confidence"] = r.confidence;
  if (include_timing) {
    nlohmann::json t = nlohmann::json::object();
    for (const auto& [phase, ms] : r.timing_ms) t[phase] = ms;
    doc["timing_ms"] = std::move(t);
  }
  doc["details"] = r.details;
  return doc;
}

std::vector<RunReport> compare_methods(const Network& net, const PerturbationSet& region, const RunOptions& options,
                                       bool with_oracle) {
  std::vector<RunReport> rows;
  if (with_oracle) rows.push_back(run_method(ReportMethod::Oracle, net, region, options));
  rows.push_back(run_method(ReportMethod::Ibp, net, region, options));
  rows.push_back(run_method(ReportMethod::Crown, net, region, options));
  rows.push_back(run_method(ReportMethod::PtLirpa, net, region, options));
  return rows;
}

namespace {

const RunReport& crown_row(const std::vector<RunReport>& rows) {
  for (const auto& r : rows) {
    if (r.method == ReportMethod::Crown) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "comparison has no CROWN row");
}

}  // namespace

nlohmann::json compare_to_json(const std::vector<RunReport>& rows, bool include_timing) {
  const RunReport& crown = crown_row(rows);
  auto out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row;
    row["method"] = to_string(r.method);
    row["bounds"] = {{"lower", r.bounds.lower}, {"upper", r.bounds.upper}};
    const auto ratio = tightness_ratio(r.bounds, crown.bounds);
    row["ratio_vs_crown"] = ratio ? nlohmann::json(*ratio) : nlohmann::json(nullptr);
    row["confidence"] = r.confidence;
    if (include_timing) row["time_ms"] = r.timing_ms.back().second;
    out.push_back(std::move(row));
  }
  return out;
}

std::string compare_to_csv(const std::vector<RunReport>& rows, bool include_timing) {
  const RunReport& crown = crown_row(rows);
  std::ostringstream os;
  os << std::setprecision(10);
  os << "method,lower,upper,ratio_vs_crown,confidence";
  if (include_timing) os << ",time_ms";
  os << "\n";
  for (const auto& r : rows) {
    const auto ratio = tightness_ratio(r.bounds, crown.bounds);
    os << to_string(r.method) << "," << r.bounds.lower << "," << r.bounds.upper << ",";
    if (ratio) os << *ratio;
    os << "," << r.confidence;
    if (include_timing) os << "," << r.timing_ms.back().second;
    os << "\n";
  }
  return os.str();
}

}  // namespace relubound
