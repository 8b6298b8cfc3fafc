// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relubound/bounding.hpp"

namespace relubound {

enum class ReportMethod { Ibp, Crown, PtLirpa, Oracle };

const char* to_string(ReportMethod m) noexcept;
ReportMethod parse_report_method(const std::string& name);

struct RunOptions {
  PtLirpaOptions pt;
  AlphaPolicy alpha = AlphaPolicy::Zero;
  std::size_t max_unstable = 20;
  bool diagnostics = false;
};

struct RunReport {
  ReportMethod method = ReportMethod::Ibp;
  OutputBounds bounds;
  double confidence = 1.0;
  std::vector<std::pair<std::string, double>> timing_ms;  // phase, milliseconds
  nlohmann::json details;                                 // method-specific extras
};

RunReport run_method(ReportMethod method, const Network& net, const PerturbationSet& region,
                     const RunOptions& options);

// Width ratio against CROWN; 1 when both widths are zero, nullopt when only
// CROWN's is.
std::optional<double> tightness_ratio(const OutputBounds& method, const OutputBounds& crown);

nlohmann::json config_echo(const Network& net, const PerturbationSet& region, const RunOptions& options);
nlohmann::json to_json(const RunReport& r, bool include_timing = true);
nlohmann::json to_json(const IntervalVector& iv);

// Rows for the compare command, in the order Oracle (when requested), IBP,
// CROWN, PT-LiRPA.
std::vector<RunReport> compare_methods(const Network& net, const PerturbationSet& region, const RunOptions& options,
                                       bool with_oracle);
nlohmann::json compare_to_json(const std::vector<RunReport>& rows, bool include_timing = true);
std::string compare_to_csv(const std::vector<RunReport>& rows, bool include_timing = true);

}  // namespace relubound
