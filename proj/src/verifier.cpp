// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#include "relubound/verifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <nlohmann/json.hpp>
#include <queue>
#include <thread>

#include "relubound/error.hpp"
#include "relubound/rng.hpp"

namespace relubound {

const char* to_string(VerdictStatus s) noexcept {
  switch (s) {
    case VerdictStatus::Robust: return "robust";
    case VerdictStatus::NotRobust: return "not-robust";
    case VerdictStatus::Unknown: return "unknown";
  }
  return "unknown";
}

const char* to_string(BoundMethod m) noexcept {
  switch (m) {
    case BoundMethod::Crown: return "crown";
    case BoundMethod::PtLirpa: return "pt-lirpa";
  }
  return "unknown";
}

const char* to_string(SplitStrategy s) noexcept {
  switch (s) {
    case SplitStrategy::Auto: return "auto";
    case SplitStrategy::Input: return "input";
    case SplitStrategy::Relu: return "relu";
  }
  return "unknown";
}

void VerifierConfig::validate() const {
  if (samples == 0) throw Error(ErrorCode::InvalidArgument, "samples must be >= 1");
  if (p && !(*p > 0.0 && *p < 1.0)) throw Error(ErrorCode::InvalidArgument, "p must lie in (0, 1)");
  if (!(xi > 0.0 && xi < 1.0)) throw Error(ErrorCode::InvalidArgument, "xi must lie in (0, 1)");
  if (batch == 0) throw Error(ErrorCode::InvalidArgument, "batch must be >= 1");
  if (!(timeout_seconds > 0.0)) throw Error(ErrorCode::InvalidArgument, "timeout must be > 0");
  if (workers == 0) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
  if (method == BoundMethod::PtLirpa && samples < minimum_sample_count(xi)) {
    throw Error(ErrorCode::InvalidArgument, "samples must be >= " + std::to_string(minimum_sample_count(xi)) +
                                                " (n >= 2 nu + 6) for xi = " + std::to_string(xi));
  }
}

double VerifierConfig::failure_probability(const Network& net) const {
  if (p) return *p;
  return EvtConfig::for_network(net).p;
}

std::optional<Vector> pgd_attack(const Network& net, const PerturbationSet& region, const PgdConfig& cfg,
                                 std::uint64_t seed) {
  net.require_single_output();
  const auto check = [&](const Vector& x) -> std::optional<Vector> {
    if (region.contains(x) && net.forward(x) <= 0.0) return x;
    return std::nullopt;
  };
  const Vector width = region.upper() - region.lower();
  if (width.maxCoeff() <= 0.0) return check(region.center());

  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(region.dim());
  const auto random_point = [&]() {
    Vector x(d);
    for (Eigen::Index i = 0; i < d; ++i) x(i) = rng.uniform(region.lower()(i), region.upper()(i));
    return x;
  };
  const std::size_t restarts = std::max<std::size_t>(1, cfg.restarts);
  for (std::size_t r = 0; r < restarts; ++r) {
    Vector x = r == 0 ? region.project(region.x0()) : random_point();
    double scale = cfg.step_fraction;
    for (std::size_t s = 0; s < cfg.steps; ++s) {
      if (auto hit = check(x)) return hit;
      const Vector g = net.gradient(x);
      if (g.cwiseAbs().maxCoeff() == 0.0) {
        x = random_point();
        continue;
      }
      x = region.project(x - scale * width.cwiseProduct(g.cwiseSign()));
      scale *= 0.9;
    }
    if (auto hit = check(x)) return hit;
  }
  return std::nullopt;
}

namespace {

std::vector<Domain> input_split(const Domain& dom) {
  const Vector width = dom.region.upper() - dom.region.lower();
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < width.size(); ++i) {
    if (width(i) > width(k)) k = i;
  }
  if (!(width(k) >= 1e-12)) throw Error(ErrorCode::Unsplittable, "input box is too narrow to bisect");
  const double mid = 0.5 * (dom.region.lower()(k) + dom.region.upper()(k));
  Vector lo_hi = dom.region.upper();
  lo_hi(k) = mid;
  Vector hi_lo = dom.region.lower();
  hi_lo(k) = mid;
  Domain a{PerturbationSet::box(dom.region.lower(), lo_hi), dom.constraints, 0.0, 0.0, dom.depth + 1, 0, {}};
  Domain b{PerturbationSet::box(hi_lo, dom.region.upper()), dom.constraints, 0.0, 0.0, dom.depth + 1, 0, {}};
  return {std::move(a), std::move(b)};
}

}  // namespace

std::vector<Domain> split_domain(const Network& net, const Domain& dom, SplitStrategy strategy) {
  if (strategy == SplitStrategy::Auto) {
    strategy = net.input_dim() <= 10 ? SplitStrategy::Input : SplitStrategy::Relu;
  }
  if (strategy == SplitStrategy::Input) return input_split(dom);

  std::optional<SplitConstraint> pick;
  double best = 0.0;
  for (std::size_t i = 0; i < dom.hidden.size(); ++i) {
    for (std::size_t j = 0; j < dom.hidden[i].size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double l = dom.hidden[i].lo(jj), u = dom.hidden[i].hi(jj);
      if (!(l < 0.0 && u > 0.0)) continue;
      const bool taken = std::any_of(dom.constraints.begin(), dom.constraints.end(),
                                     [&](const SplitConstraint& c) { return c.layer == i && c.neuron == j; });
      if (taken) continue;
      if (!pick || u - l > best) {
        best = u - l;
        pick = SplitConstraint{i, j, ReluPhase::Active};
      }
    }
  }
  if (!pick) return input_split(dom);
  Domain a{dom.region, dom.constraints, 0.0, 0.0, dom.depth + 1, 0, {}};
  Domain b = a;
  a.constraints.push_back({pick->layer, pick->neuron, ReluPhase::Active});
  b.constraints.push_back({pick->layer, pick->neuron, ReluPhase::Inactive});
  return {std::move(a), std::move(b)};
}

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kRootPgdStream = 0xffffffffffffffffULL;

enum class BoundOutcome { Bounded, Violation, RejectionFailed };

struct BoundResult {
  BoundOutcome outcome = BoundOutcome::Bounded;
  Vector point;
  std::exception_ptr error;
  bool sampled = false;
};

struct DomainOrder {
  bool operator()(const Domain& a, const Domain& b) const {
    if (a.f_lower != b.f_lower) return a.f_lower > b.f_lower;
    return a.id > b.id;
  }
};

class BabRun {
 public:
  BabRun(const Network& net, const VerifierConfig& cfg) : net_(net), cfg_(cfg) {
    evt_.p = cfg.failure_probability(net);
    evt_.xi = cfg.xi;
    evt_.fallback = cfg.fallback;
    min_samples_ = minimum_sample_count(cfg.xi);
  }

  BoundResult bound(Domain& d) const {
    BoundResult r;
    try {
      if (cfg_.method == BoundMethod::Crown || net_.num_hidden_layers() == 0) {
        const DomainBounds b = crown_bounds(net_, d.region, d.constraints, cfg_.alpha);
        d.f_lower = b.output.lower;
        d.f_upper = b.output.upper;
        d.hidden = b.hidden;
        return r;  // with no hidden layer the linear bound is already exact
      }
      PtLirpaOptions opt;
      opt.samples = samples_at(d.depth);
      opt.evt = evt_;
      opt.alpha = cfg_.alpha;
      opt.mode = cfg_.sampling;
      opt.seed = derive_seed(cfg_.seed, 2 * d.id);
      opt.clip_to_ibp = cfg_.clip_to_ibp;
      const DomainBounds b = pt_lirpa_bounds(net_, d.region, d.constraints, opt);
      r.sampled = true;
      d.f_lower = b.output.lower;
      d.f_upper = std::max(b.output.upper, b.output.lower);
      d.hidden = b.hidden;
      if (b.violation) {
        r.outcome = BoundOutcome::Violation;
        r.point = *b.violation;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::RejectionBudgetExceeded) {
        r.outcome = BoundOutcome::RejectionFailed;
      } else {
        r.error = std::current_exception();
      }
    } catch (...) {
      r.error = std::current_exception();
    }
    return r;
  }

  std::size_t samples_at(std::size_t depth) const {
    if (!cfg_.decay) return cfg_.samples;
    std::size_t n = cfg_.samples;
    for (std::size_t k = 0; k < depth && n > min_samples_; ++k) n /= 2;
    return std::max(n, min_samples_);
  }

  std::vector<BoundResult> bound_all(std::vector<Domain>& doms) const {
    std::vector<BoundResult> out(doms.size());
    const std::size_t workers = std::min(cfg_.workers, doms.size());
    if (workers <= 1) {
      for (std::size_t k = 0; k < doms.size(); ++k) out[k] = bound(doms[k]);
      return out;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < doms.size(); k += workers) out[k] = bound(doms[k]);
      });
    }
    for (auto& t : pool) t.join();
    return out;
  }

 private:
  const Network& net_;
  const VerifierConfig& cfg_;
  EvtConfig evt_;
  std::size_t min_samples_ = 0;
};

bool valid_counterexample(const Network& net, const PerturbationSet& region, const Vector& x) {
  return region.contains(x) && net.forward(x) <= 0.0;
}

}  // namespace

Verdict verify(const Network& net, const PerturbationSet& region, const VerifierConfig& cfg) {
  const auto start = Clock::now();
  net.require_single_output();
  if (region.dim() != net.input_dim()) throw Error(ErrorCode::DimensionMismatch, "region does not match network input");
  cfg.validate();

  const std::size_t m = net.hidden_neuron_count();
  const double p = cfg.failure_probability(net);
  const double robust_confidence =
      cfg.method == BoundMethod::PtLirpa ? network_confidence(m, p) : 1.0;
  const auto deadline = start + std::chrono::duration_cast<Clock::duration>(
                                    std::chrono::duration<double>(cfg.timeout_seconds));

  Verdict v;
  const auto finish = [&](VerdictStatus status, std::string reason) {
    v.status = status;
    v.reason = std::move(reason);
    if (status == VerdictStatus::Robust) v.confidence = robust_confidence;
    if (status == VerdictStatus::NotRobust) v.confidence = 1.0;
    if (status == VerdictStatus::Unknown) v.confidence = 0.0;
    v.stats.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return v;
  };
  const auto refute = [&](const Vector& x, const char* source) {
    v.counterexample = x;
    v.counterexample_value = net.forward(x);
    return finish(VerdictStatus::NotRobust, source);
  };

  if (auto cex = pgd_attack(net, region, cfg.pgd, derive_seed(cfg.seed, kRootPgdStream))) {
    return refute(*cex, "pgd counterexample");
  }

  BabRun run(net, cfg);
  std::uint64_t next_id = 0;
  Domain root{region, {}, 0.0, 0.0, 0, next_id++, {}};
  {
    BoundResult r = run.bound(root);
    if (r.error) std::rethrow_exception(r.error);
    ++v.stats.domains_explored;
    if (r.sampled) ++v.stats.resample_rounds;
    if (r.outcome == BoundOutcome::Violation && valid_counterexample(net, region, r.point)) {
      return refute(r.point, "sampled counterexample");
    }
  }
  double pruned_min = std::numeric_limits<double>::infinity();
  v.stats.final_lower_bound = root.f_lower;
  if (root.f_lower > 0.0) {
    return finish(VerdictStatus::Robust, "root bound positive");
  }
  if (root.f_upper < 0.0) ++v.stats.bound_only_violations;

  std::priority_queue<Domain, std::vector<Domain>, DomainOrder> open;
  open.push(std::move(root));
  std::vector<Domain> exhausted;

  const auto global_lower = [&]() {
    double lb = pruned_min;
    if (!open.empty()) lb = std::min(lb, open.top().f_lower);
    for (const Domain& d : exhausted) lb = std::min(lb, d.f_lower);
    return lb;
  };

  while (!open.empty()) {
    if (Clock::now() >= deadline) {
      v.stats.final_lower_bound = global_lower();
      return finish(VerdictStatus::Unknown, "timeout");
    }
    ++v.stats.rounds;
    RoundStats rs;
    rs.round = v.stats.rounds;

    std::vector<Domain> children;
    for (std::size_t k = 0; k < cfg.batch && !open.empty(); ++k) {
      Domain parent = open.top();
      open.pop();
      if (parent.depth >= cfg.max_depth) {
        exhausted.push_back(std::move(parent));
        continue;
      }
      std::vector<Domain> kids;
      try {
        kids = split_domain(net, parent, cfg.split);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Unsplittable) throw;
        exhausted.push_back(std::move(parent));
        continue;
      }
      for (Domain& kid : kids) {
        kid.id = next_id++;
        children.push_back(std::move(kid));
      }
    }

    // Children whose constrained region rejected too many samples are
    // replaced by input splits of the region without their newest constraint.
    while (!children.empty()) {
      std::vector<BoundResult> results = run.bound_all(children);
      std::vector<Domain> retry;
      for (std::size_t k = 0; k < children.size(); ++k) {
        Domain& child = children[k];
        BoundResult& r = results[k];
        if (r.error) std::rethrow_exception(r.error);
        if (r.outcome == BoundOutcome::RejectionFailed) {
          ++v.stats.rejection_fallbacks;
          Domain relaxed = child;
          relaxed.constraints.pop_back();
          relaxed.depth = child.depth - 1;
          std::vector<Domain> kids;
          try {
            kids = split_domain(net, relaxed, SplitStrategy::Input);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::Unsplittable) throw;
            exhausted.push_back(std::move(child));
            continue;
          }
          for (Domain& kid : kids) {
            kid.id = next_id++;
            retry.push_back(std::move(kid));
          }
          continue;
        }
        ++v.stats.domains_explored;
        ++rs.processed;
        if (r.sampled) ++v.stats.resample_rounds;
        v.stats.max_depth_reached = std::max(v.stats.max_depth_reached, child.depth);
        if (r.outcome == BoundOutcome::Violation && valid_counterexample(net, region, r.point)) {
          return refute(r.point, "sampled counterexample");
        }
        if (child.f_upper < 0.0) ++v.stats.bound_only_violations;
        if (child.f_lower > 0.0) {
          ++rs.pruned;
          pruned_min = std::min(pruned_min, child.f_lower);
          continue;
        }
        if (auto cex = pgd_attack(net, child.region, cfg.domain_pgd, derive_seed(cfg.seed, 2 * child.id + 1))) {
          if (valid_counterexample(net, region, *cex)) return refute(*cex, "pgd counterexample in subdomain");
        }
        open.push(std::move(child));
      }
      children = std::move(retry);
    }

    rs.open = open.size();
    rs.best_lower = global_lower();
    v.stats.per_round.push_back(rs);
  }

  v.stats.final_lower_bound = global_lower();
  if (!exhausted.empty()) {
    return finish(VerdictStatus::Unknown, "maximum depth reached");
  }
  return finish(VerdictStatus::Robust, "all subdomains verified");
}

Verdict verify_all(const std::vector<Network>& nets, const PerturbationSet& region, const VerifierConfig& cfg) {
  if (nets.empty()) throw Error(ErrorCode::InvalidArgument, "no properties to verify");
  Verdict combined;
  combined.status = VerdictStatus::Robust;
  double failure = 0.0;
  for (std::size_t k = 0; k < nets.size(); ++k) {
    VerifierConfig sub = cfg;
    sub.seed = derive_seed(cfg.seed, k);
    Verdict v = verify(nets[k], region, sub);
    combined.stats.domains_explored += v.stats.domains_explored;
    combined.stats.rounds += v.stats.rounds;
    combined.stats.resample_rounds += v.stats.resample_rounds;
    combined.stats.bound_only_violations += v.stats.bound_only_violations;
    combined.stats.rejection_fallbacks += v.stats.rejection_fallbacks;
    combined.stats.max_depth_reached = std::max(combined.stats.max_depth_reached, v.stats.max_depth_reached);
    combined.stats.wall_seconds += v.stats.wall_seconds;
    combined.stats.final_lower_bound =
        k == 0 ? v.stats.final_lower_bound : std::min(combined.stats.final_lower_bound, v.stats.final_lower_bound);
    if (v.status == VerdictStatus::NotRobust) {
      v.stats = combined.stats;
      v.reason = "property " + std::to_string(k) + ": " + v.reason;
      return v;
    }
    if (v.status == VerdictStatus::Unknown) {
      combined.status = VerdictStatus::Unknown;
      combined.reason = "property " + std::to_string(k) + ": " + v.reason;
    } else {
      failure += 1.0 - v.confidence;
    }
  }
  if (combined.status == VerdictStatus::Robust) {
    combined.confidence = std::max(0.0, 1.0 - failure);
    combined.reason = "all properties verified";
  }
  return combined;
}

Certification certify_epsilon(const Network& net, const Vector& x0, const VerifierConfig& cfg, double eps_hi) {
  if (!(eps_hi > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps_hi must be > 0");
  if (!(net.forward(x0) > 0.0)) throw Error(ErrorCode::InvalidArgument, "property fails at radius 0");
  Certification out;
  const auto robust = [&](double eps) {
    ++out.verifier_calls;
    return verify(net, PerturbationSet::linf_ball(x0, eps), cfg).status == VerdictStatus::Robust;
  };
  if (robust(eps_hi)) {
    out.epsilon = eps_hi;
    return out;
  }
  double lo = 0.0, hi = eps_hi;
  const double tol = 1e-4 * eps_hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (robust(mid)) lo = mid;
    else hi = mid;
  }
  out.epsilon = lo;
  return out;
}

nlohmann::json to_json(const Verdict& v, bool include_timing) {
  nlohmann::json doc;
  doc["status"] = to_string(v.status);
  doc["confidence"] = v.confidence;
  doc["reason"] = v.reason;
  if (v.counterexample) {
    doc["counterexample"] = std::vector<double>(v.counterexample->data(),
                                                v.counterexample->data() + v.counterexample->size());
    doc["counterexample_value"] = v.counterexample_value;
  } else {
    doc["counterexample"] = nullptr;
  }
  nlohmann::json s;
  s["domains_explored"] = v.stats.domains_explored;
  s["rounds"] = v.stats.rounds;
  s["resample_rounds"] = v.stats.resample_rounds;
  s["bound_only_violations"] = v.stats.bound_only_violations;
  s["rejection_fallbacks"] = v.stats.rejection_fallbacks;
  s["max_depth_reached"] = v.stats.max_depth_reached;
  s["final_lower_bound"] = std::isfinite(v.stats.final_lower_bound) ? nlohmann::json(v.stats.final_lower_bound)
                                                                     : nlohmann::json(nullptr);
  if (include_timing) s["wall_seconds"] = v.stats.wall_seconds;
  s["per_round"] = nlohmann::json::array();
  for (const RoundStats& r : v.stats.per_round) {
    s["per_round"].push_back({{"round", r.round},
                              {"processed", r.processed},
                              {"pruned", r.pruned},
                              {"open", r.open},
                              {"best_lower", std::isfinite(r.best_lower) ? nlohmann::json(r.best_lower)
                                                                         : nlohmann::json(nullptr)}});
  }
  doc["stats"] = std::move(s);
  return doc;
}

}  // namespace relubound
