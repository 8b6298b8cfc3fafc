// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#include "relubound/oracle.hpp"

#include <functional>
#include <limits>
#include <optional>

#include "relubound/error.hpp"
#include "relubound/interval.hpp"
#include "relubound/lp.hpp"

namespace relubound {

namespace {

struct LeafInfo {
  const ActivationPattern& pattern;
  const std::vector<LinearConstraint>& constraints;
  Vector out_coeffs;  // single output row
  double out_offset;
};

// Depth-first enumeration of activation patterns. A neuron branches only when
// its affine form actually changes sign over the box; patterns are pruned by
// a feasibility LP at layer boundaries when enough unstable neurons remain
// below to make that worthwhile.
class PatternWalker {
 public:
  PatternWalker(const Network& net, const PerturbationSet& region, std::span<const SplitConstraint> forced,
                std::size_t max_unstable, std::function<void(const LeafInfo&)> leaf)
      : net_(net), region_(region), forced_(forced.begin(), forced.end()), leaf_(std::move(leaf)) {
    const LayerBounds bounds = ibp(net, region, forced);
    const std::size_t hidden = net.num_hidden_layers();
    unstable_.resize(hidden);
    for (std::size_t i = 0; i < hidden; ++i) {
      const IntervalVector& iv = bounds.pre[i];
      unstable_[i].assign(iv.size(), false);
      for (std::size_t j = 0; j < iv.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (iv.lo(jj) < 0.0 && iv.hi(jj) > 0.0) {
          unstable_[i][j] = true;
          ++unstable_count_;
        }
      }
    }
    if (unstable_count_ > max_unstable) {
      throw Error(ErrorCode::TooManyUnstable, std::to_string(unstable_count_) + " unstable neurons exceed the limit of " +
                                                  std::to_string(max_unstable));
    }
    remaining_after_.assign(hidden, 0);
    std::size_t acc = 0;
    for (std::size_t i = hidden; i-- > 0;) {
      remaining_after_[i] = acc;
      for (bool u : unstable_[i]) acc += u ? 1 : 0;
    }
    ibp_ = bounds;
  }

  void run() {
    Matrix m = Matrix::Identity(static_cast<Eigen::Index>(net_.input_dim()), static_cast<Eigen::Index>(net_.input_dim()));
    Vector c = Vector::Zero(static_cast<Eigen::Index>(net_.input_dim()));
    descend(0, m, c);
  }

  std::size_t unstable_count() const { return unstable_count_; }
  std::size_t lp_solves = 0;

  bool feasible(const std::vector<LinearConstraint>& cons) {
    if (cons.empty()) return true;
    LpProblem lp;
    lp.objective = Vector::Zero(static_cast<Eigen::Index>(net_.input_dim()));
    lp.constraints = cons;
    lp.lower = region_.lower();
    lp.upper = region_.upper();
    ++lp_solves;
    return solve_lp(lp).status == LpStatus::Optimal;
  }

  const Network& net() const { return net_; }
  const PerturbationSet& region() const { return region_; }

 private:
  std::optional<ReluPhase> forced_phase(std::size_t layer, std::size_t neuron) const {
    for (const SplitConstraint& c : forced_) {
      if (c.layer == layer && c.neuron == neuron) return c.phase;
    }
    return std::nullopt;
  }

  void descend(std::size_t layer, const Matrix& m, const Vector& c) {
    if (layer == net_.num_hidden_layers()) {
      const Layer& out = net_.layers().back();
      LeafInfo info{pattern_, cons_, (out.weights.row(0) * m).transpose(), out.weights.row(0).dot(c) + out.bias(0)};
      leaf_(info);
      return;
    }
    const Layer& l = net_.layer(layer);
    const Matrix p = l.weights * m;
    const Vector q = l.weights * c + l.bias;
    std::vector<ReluPhase> phases(static_cast<std::size_t>(p.rows()), ReluPhase::Inactive);
    choose(layer, 0, p, q, phases, false);
  }

  void choose(std::size_t layer, std::size_t j, const Matrix& p, const Vector& q, std::vector<ReluPhase>& phases,
              bool branched) {
    const auto width = static_cast<std::size_t>(p.rows());
    if (j == width) {
      if (branched && remaining_after_[layer] >= 3 && !feasible(cons_)) return;
      Matrix m2 = p;
      Vector c2 = q;
      for (std::size_t k = 0; k < width; ++k) {
        if (phases[k] == ReluPhase::Inactive) {
          m2.row(static_cast<Eigen::Index>(k)).setZero();
          c2(static_cast<Eigen::Index>(k)) = 0.0;
        }
      }
      descend(layer + 1, m2, c2);
      return;
    }
    const auto jj = static_cast<Eigen::Index>(j);
    const Vector row = p.row(jj).transpose();
    const double centre = row.dot(region_.center()) + q(jj);
    const double spread = row.cwiseAbs().dot(region_.radius());
    const double zmin = centre - spread, zmax = centre + spread;

    const auto forced = forced_phase(layer, j);
    const bool listed = unstable_[layer][j];
    std::vector<ReluPhase> options;
    if (forced) {
      options.push_back(*forced);
    } else if (!listed) {
      // IBP-stable, possibly after clipping by a split constraint.
      const double lo = ibp_.pre[layer].lo(jj);
      options.push_back(lo >= 0.0 ? ReluPhase::Active : ReluPhase::Inactive);
    } else if (zmin >= 0.0) {
      options.push_back(ReluPhase::Active);
    } else if (zmax <= 0.0) {
      options.push_back(ReluPhase::Inactive);
    } else {
      options = {ReluPhase::Active, ReluPhase::Inactive};
    }

    for (ReluPhase ph : options) {
      // The sign row is needed whenever the box does not already imply it.
      const bool implied = ph == ReluPhase::Active ? zmin >= 0.0 : zmax <= 0.0;
      if (!implied) {
        LinearConstraint lc;
        lc.coeffs = row;
        lc.relation = ph == ReluPhase::Active ? Relation::GreaterEqual : Relation::LessEqual;
        lc.rhs = -q(jj);
        cons_.push_back(std::move(lc));
      }
      if (listed) pattern_.phases.push_back({layer, j, ph});
      phases[j] = ph;
      choose(layer, j + 1, p, q, phases, branched || options.size() > 1);
      if (listed) pattern_.phases.pop_back();
      if (!implied) cons_.pop_back();
    }
  }

  const Network& net_;
  const PerturbationSet& region_;
  std::vector<SplitConstraint> forced_;
  std::function<void(const LeafInfo&)> leaf_;
  LayerBounds ibp_;
  std::vector<std::vector<bool>> unstable_;
  std::vector<std::size_t> remaining_after_;
  std::size_t unstable_count_ = 0;
  ActivationPattern pattern_;
  std::vector<LinearConstraint> cons_;
};

}  // namespace

ExactRange exact_range(const Network& net, const PerturbationSet& region, std::span<const SplitConstraint> constraints,
                       std::size_t max_unstable) {
  net.require_single_output();
  ExactRange out;
  out.lower = std::numeric_limits<double>::infinity();
  out.upper = -std::numeric_limits<double>::infinity();
  std::size_t solves = 0;
  PatternWalker* self = nullptr;
  PatternWalker walker(net, region, constraints, max_unstable, [&](const LeafInfo& leaf) {
    LpProblem lp;
    lp.objective = leaf.out_coeffs;
    lp.offset = leaf.out_offset;
    lp.constraints = leaf.constraints;
    lp.lower = self->region().lower();
    lp.upper = self->region().upper();
    ++out.patterns_solved;
    ++solves;
    const LpSolution lo = solve_lp(lp);
    if (lo.status == LpStatus::Infeasible) return;
    if (lo.status != LpStatus::Optimal) throw Error(ErrorCode::LpFailure, "pattern LP did not reach an optimum");
    ++out.patterns_feasible;
    lp.objective = -leaf.out_coeffs;
    lp.offset = -leaf.out_offset;
    ++solves;
    const LpSolution hi = solve_lp(lp);
    if (hi.status != LpStatus::Optimal) throw Error(ErrorCode::LpFailure, "pattern LP did not reach an optimum");
    const double vlo = lo.value;
    const double vhi = -hi.value;
    if (vlo < out.lower) {
      out.lower = vlo;
      out.argmin = lo.x;
    }
    if (vhi > out.upper) {
      out.upper = vhi;
      out.argmax = hi.x;
    }
  });
  self = &walker;
  walker.run();
  out.unstable = walker.unstable_count();
  out.lp_solves = solves + walker.lp_solves;
  if (out.patterns_feasible == 0) {
    throw Error(ErrorCode::LpFailure, "no feasible activation pattern (constraints empty the region)");
  }
  return out;
}

std::vector<ActivationPattern> feasible_patterns(const Network& net, const PerturbationSet& region,
                                                 std::size_t max_unstable) {
  std::vector<ActivationPattern> out;
  PatternWalker* self = nullptr;
  PatternWalker walker(net, region, {}, max_unstable, [&](const LeafInfo& leaf) {
    if (self->feasible(leaf.constraints)) out.push_back(leaf.pattern);
  });
  self = &walker;
  walker.run();
  return out;
}

}  // namespace relubound
