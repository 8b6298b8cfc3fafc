// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
//
// relubound: bounds, comparison reports, verification and certification for
// small ReLU networks.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relubound/error.hpp"
#include "relubound/network.hpp"
#include "relubound/oracle.hpp"
#include "relubound/report.hpp"
#include "relubound/verifier.hpp"

using namespace relubound;

namespace {

constexpr int kExitError = 3;

struct Common {
  std::string model;
  std::string property;
  std::optional<std::size_t> n;
  std::optional<double> p;
  double xi = 0.85;
  std::uint64_t seed = 0;
  bool paper_scale = false;
  std::string fallback = "conservative";
  std::string alpha = "zero";
  std::optional<double> offset;
  std::optional<std::size_t> target;
  std::string json_path;
  bool no_timing = false;
};

struct Flags {
  Common common;
  // bounds / compare
  std::string report_method = "pt-lirpa";
  bool with_oracle = false;
  bool csv = false;
  bool diagnostics = false;
  bool no_evt = false;
  std::size_t max_unstable = 20;
  // verify / certify
  std::string verify_method = "pt-lirpa";
  double timeout = 30.0;
  std::size_t batch = 8;
  std::string split = "auto";
  std::size_t workers = 1;
  std::size_t max_depth = 40;
  bool decay = false;
};

const std::map<std::string, AlphaPolicy> kAlpha{{"zero", AlphaPolicy::Zero}, {"adaptive", AlphaPolicy::Adaptive}};
const std::map<std::string, TailFallback> kFallback{
    {"conservative", TailFallback::Conservative}, {"none", TailFallback::None}, {"fail", TailFallback::Fail}};
const std::map<std::string, SplitStrategy> kSplit{
    {"auto", SplitStrategy::Auto}, {"input", SplitStrategy::Input}, {"relu", SplitStrategy::Relu}};
const std::map<std::string, BoundMethod> kVerifyMethod{{"crown", BoundMethod::Crown},
                                                       {"pt-lirpa", BoundMethod::PtLirpa}};

std::size_t sample_count(const Common& c) {
  if (c.n) return *c.n;
  return c.paper_scale ? 350000 : 10000;
}

struct Problem {
  Network model;
  PerturbationSet region;
  // Single-output nets to bound; one per competitor class for classifiers.
  std::vector<Network> nets;
  std::vector<std::size_t> competitors;
};

Problem load_problem(const Common& c) {
  Network model = load_network(c.model);
  PerturbationSet region = load_property(c.property);
  if (region.dim() != model.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "property has " + std::to_string(region.dim()) +
                                                  " inputs but the model expects " +
                                                  std::to_string(model.input_dim()));
  }
  Problem pr{model, region, {}, {}};
  if (model.output_dim() == 1) {
    if (c.target) throw Error(ErrorCode::InvalidArgument, "--target needs a model with several outputs");
    pr.nets.push_back(c.offset ? model.with_output_offset(*c.offset) : model);
    return pr;
  }
  if (!c.target) {
    throw Error(ErrorCode::InvalidArgument,
                "model has " + std::to_string(model.output_dim()) + " outputs; pass --target <class>");
  }
  pr.nets = encode_margin(model, *c.target);
  for (std::size_t k = 0; k < model.output_dim(); ++k) {
    if (k != *c.target) pr.competitors.push_back(k);
  }
  if (c.offset) {
    for (Network& net : pr.nets) net = net.with_output_offset(*c.offset);
  }
  return pr;
}

RunOptions run_options(const Flags& f, const Network& net) {
  RunOptions opt;
  opt.pt.samples = sample_count(f.common);
  opt.pt.evt = EvtConfig::for_network(net);
  if (f.common.p) opt.pt.evt.p = *f.common.p;
  opt.pt.evt.xi = f.common.xi;
  opt.pt.evt.fallback = kFallback.at(f.common.fallback);
  opt.pt.apply_evt = !f.no_evt;
  opt.pt.alpha = kAlpha.at(f.common.alpha);
  opt.pt.seed = f.common.seed;
  opt.alpha = opt.pt.alpha;
  opt.max_unstable = f.max_unstable;
  opt.diagnostics = f.diagnostics;
  return opt;
}

VerifierConfig verifier_config(const Flags& f) {
  VerifierConfig cfg;
  cfg.method = kVerifyMethod.at(f.verify_method);
  cfg.samples = sample_count(f.common);
  cfg.p = f.common.p;
  cfg.xi = f.common.xi;
  cfg.fallback = kFallback.at(f.common.fallback);
  cfg.alpha = kAlpha.at(f.common.alpha);
  cfg.batch = f.batch;
  cfg.timeout_seconds = f.timeout;
  cfg.max_depth = f.max_depth;
  cfg.split = kSplit.at(f.split);
  cfg.seed = f.common.seed;
  cfg.workers = f.workers;
  cfg.decay = f.decay;
  cfg.validate();
  return cfg;
}

void write_json(const std::string& path, const nlohmann::json& doc) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Parse, "cannot write " + path);
  out << doc.dump(2) << '\n';
}

std::string label(const Problem& pr, std::size_t i) {
  return pr.competitors.empty() ? std::string() : "vs class " + std::to_string(pr.competitors[i]) + ": ";
}

int cmd_bounds(const Flags& f) {
  const Problem pr = load_problem(f.common);
  const ReportMethod method = parse_report_method(f.report_method);
  nlohmann::json reports = nlohmann::json::array();
  for (std::size_t i = 0; i < pr.nets.size(); ++i) {
    const RunOptions opt = run_options(f, pr.nets[i]);
    const RunReport r = run_method(method, pr.nets[i], pr.region, opt);
    std::cout << label(pr, i) << to_string(method) << " [" << r.bounds.lower << ", " << r.bounds.upper << "]";
    if (method == ReportMethod::PtLirpa) std::cout << " confidence " << r.confidence;
    std::cout << '\n';
    nlohmann::json doc = to_json(r, !f.common.no_timing);
    doc["config"] = config_echo(pr.nets[i], pr.region, opt);
    if (!pr.competitors.empty()) doc["competitor"] = pr.competitors[i];
    reports.push_back(std::move(doc));
  }
  write_json(f.common.json_path, reports.size() == 1 ? reports[0] : reports);
  return 0;
}

int cmd_compare(const Flags& f) {
  const Problem pr = load_problem(f.common);
  nlohmann::json reports = nlohmann::json::array();
  for (std::size_t i = 0; i < pr.nets.size(); ++i) {
    const RunOptions opt = run_options(f, pr.nets[i]);
    const auto rows = compare_methods(pr.nets[i], pr.region, opt, f.with_oracle);
    if (!pr.competitors.empty()) std::cout << "# " << label(pr, i) << '\n';
    if (f.csv) {
      std::cout << compare_to_csv(rows, !f.common.no_timing);
    } else {
      const OutputBounds& crown = rows[f.with_oracle ? 2 : 1].bounds;
      std::printf("%-9s %14s %14s %8s %10s\n", "method", "lower", "upper", "ratio", "confidence");
      for (const RunReport& r : rows) {
        const auto ratio = tightness_ratio(r.bounds, crown);
        std::printf("%-9s %14.6g %14.6g %8s %10.4g\n", to_string(r.method), r.bounds.lower, r.bounds.upper,
                    ratio ? std::to_string(*ratio).substr(0, 6).c_str() : "-", r.confidence);
      }
    }
    nlohmann::json doc;
    doc["config"] = config_echo(pr.nets[i], pr.region, opt);
    doc["rows"] = compare_to_json(rows, !f.common.no_timing);
    if (!pr.competitors.empty()) doc["competitor"] = pr.competitors[i];
    reports.push_back(std::move(doc));
  }
  write_json(f.common.json_path, reports.size() == 1 ? reports[0] : reports);
  return 0;
}

int exit_code(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::Robust: return 0;
    case VerdictStatus::NotRobust: return 1;
    case VerdictStatus::Unknown: return 2;
  }
  return kExitError;
}

int cmd_verify(const Flags& f) {
  const Problem pr = load_problem(f.common);
  const VerifierConfig cfg = verifier_config(f);
  const Verdict v = pr.nets.size() == 1 ? verify(pr.nets[0], pr.region, cfg) : verify_all(pr.nets, pr.region, cfg);
  std::cout << "status: " << to_string(v.status) << '\n';
  std::cout << "confidence: " << v.confidence << '\n';
  if (v.counterexample) {
    std::cout << "counterexample: [";
    for (Eigen::Index k = 0; k < v.counterexample->size(); ++k) {
      std::cout << (k ? ", " : "") << (*v.counterexample)(k);
    }
    std::cout << "] value " << v.counterexample_value << '\n';
  }
  if (!v.reason.empty()) std::cout << "reason: " << v.reason << '\n';
  std::cout << "domains: " << v.stats.domains_explored << ", rounds: " << v.stats.rounds
            << ", final lower bound: " << v.stats.final_lower_bound << '\n';
  nlohmann::json doc = to_json(v, !f.common.no_timing);
  doc["epsilon"] = pr.region.epsilon();
  doc["method"] = to_string(cfg.method);
  write_json(f.common.json_path, doc);
  return exit_code(v.status);
}

int cmd_certify(const Flags& f) {
  const Problem pr = load_problem(f.common);
  if (pr.nets.size() != 1) throw Error(ErrorCode::InvalidArgument, "certify needs a single-output model");
  const VerifierConfig cfg = verifier_config(f);
  const double eps_hi = pr.region.epsilon();
  if (!(eps_hi > 0.0)) throw Error(ErrorCode::InvalidArgument, "certify needs a property with epsilon > 0");
  const Certification c = certify_epsilon(pr.nets[0], pr.region.x0(), cfg, eps_hi);
  std::cout << "epsilon: " << c.epsilon << '\n';
  std::cout << "verifier calls: " << c.verifier_calls << '\n';
  nlohmann::json doc{{"method", to_string(cfg.method)},
                     {"epsilon", c.epsilon},
                     {"epsilon_max", eps_hi},
                     {"verifier_calls", c.verifier_calls},
                     {"seed", cfg.seed}};
  write_json(f.common.json_path, doc);
  return 0;
}

int cmd_oracle(const Flags& f) {
  const Problem pr = load_problem(f.common);
  nlohmann::json reports = nlohmann::json::array();
  for (std::size_t i = 0; i < pr.nets.size(); ++i) {
    const ExactRange r = exact_range(pr.nets[i], pr.region, {}, f.max_unstable);
    std::cout << label(pr, i) << "oracle [" << r.lower << ", " << r.upper << "] (" << r.unstable
              << " unstable neurons, " << r.patterns_solved << " patterns, " << r.lp_solves << " LPs)\n";
    nlohmann::json doc{{"lower", r.lower},
                       {"upper", r.upper},
                       {"argmin", std::vector<double>(r.argmin.data(), r.argmin.data() + r.argmin.size())},
                       {"argmax", std::vector<double>(r.argmax.data(), r.argmax.data() + r.argmax.size())},
                       {"unstable", r.unstable},
                       {"patterns_solved", r.patterns_solved},
                       {"lp_solves", r.lp_solves}};
    if (!pr.competitors.empty()) doc["competitor"] = pr.competitors[i];
    reports.push_back(std::move(doc));
  }
  write_json(f.common.json_path, reports.size() == 1 ? reports[0] : reports);
  return 0;
}

void add_common(CLI::App* cmd, Flags& f) {
  Common& c = f.common;
  cmd->add_option("model", c.model, "Network JSON file")->required();
  cmd->add_option("property", c.property, "Property JSON file (x0, epsilon, optional clip)")->required();
  cmd->add_option("--n", c.n, "Samples per bound computation (default 10000)");
  cmd->add_flag("--paper-scale", c.paper_scale, "Use 350000 samples unless --n is given");
  cmd->add_option("--p", c.p, "Per-side, per-neuron failure probability (default 0.005 / neurons)")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--xi", c.xi, "Order-statistic exponent, nu = floor(n^xi)")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--seed", c.seed, "Root seed");
  cmd->add_option("--fallback", c.fallback, "Degenerate-tail policy")
      ->check(CLI::IsMember({"conservative", "none", "fail"}));
  cmd->add_option("--alpha-policy", c.alpha, "Lower ReLU relaxation slope")->check(CLI::IsMember({"zero", "adaptive"}));
  cmd->add_option("--offset", c.offset, "Add a constant to the property output");
  cmd->add_option("--target", c.target, "Target class for multi-output models");
  cmd->add_option("--json", c.json_path, "Write the report as JSON to this path");
  cmd->add_flag("--no-timing", c.no_timing, "Omit timings from JSON output");
}

void add_verifier(CLI::App* cmd, Flags& f) {
  cmd->add_option("--method", f.verify_method, "Bounding method")->check(CLI::IsMember({"crown", "pt-lirpa"}));
  cmd->add_option("--timeout", f.timeout, "Wall-clock budget in seconds")->check(CLI::PositiveNumber);
  cmd->add_option("--batch", f.batch, "Domains bounded per round")->check(CLI::PositiveNumber);
  cmd->add_option("--split", f.split, "Branching strategy")->check(CLI::IsMember({"auto", "input", "relu"}));
  cmd->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--max-depth", f.max_depth, "Maximum split depth (0 = bound only)");
  cmd->add_flag("--decay", f.decay, "Halve the sample count at each depth");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bounds and verification for small ReLU networks"};
  app.require_subcommand(1);
  Flags f;

  auto* bounds = app.add_subcommand("bounds", "Output bounds with one method");
  add_common(bounds, f);
  bounds->add_option("--method", f.report_method, "ibp, crown, pt-lirpa or oracle")
      ->check(CLI::IsMember({"ibp", "crown", "pt-lirpa", "oracle"}));
  bounds->add_flag("--no-evt", f.no_evt, "Use the raw sampled intervals without EVT widening");
  bounds->add_flag("--diagnostics", f.diagnostics, "Include per-neuron EVT diagnostics in the JSON report");
  bounds->add_option("--max-unstable", f.max_unstable, "Oracle refusal threshold");

  auto* compare = app.add_subcommand("compare", "Bounds from every method side by side");
  add_common(compare, f);
  compare->add_flag("--with-oracle", f.with_oracle, "Include the exact range");
  compare->add_flag("--csv", f.csv, "Print CSV instead of a table");
  compare->add_flag("--no-evt", f.no_evt, "Use the raw sampled intervals without EVT widening");
  compare->add_flag("--diagnostics", f.diagnostics, "Include per-neuron EVT diagnostics in the JSON report");
  compare->add_option("--max-unstable", f.max_unstable, "Oracle refusal threshold");

  auto* verify_cmd = app.add_subcommand("verify", "Decide whether the output stays positive on the region");
  add_common(verify_cmd, f);
  add_verifier(verify_cmd, f);

  auto* certify = app.add_subcommand("certify", "Largest certified radius up to the property's epsilon");
  add_common(certify, f);
  add_verifier(certify, f);

  auto* oracle = app.add_subcommand("oracle", "Exact output range by activation-pattern enumeration");
  add_common(oracle, f);
  oracle->add_option("--max-unstable", f.max_unstable, "Refuse nets with more unstable neurons than this");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitError;
  }

  try {
    if (*bounds) return cmd_bounds(f);
    if (*compare) return cmd_compare(f);
    if (*verify_cmd) return cmd_verify(f);
    if (*certify) return cmd_certify(f);
    if (*oracle) return cmd_oracle(f);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << " (" << to_string(e.code()) << ")\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
