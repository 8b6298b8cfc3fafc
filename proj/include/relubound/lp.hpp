// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "relubound/network.hpp"

namespace relubound {

enum class Relation { LessEqual, GreaterEqual, Equal };

struct LinearConstraint {
  Vector coeffs;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
};

// minimize objective . x + offset  subject to constraints and lower <= x <= upper.
struct LpProblem {
  Vector objective;
  double offset = 0.0;
  std::vector<LinearConstraint> constraints;
  Vector lower;
  Vector upper;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus s) noexcept;

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Vector x;
  double value = 0.0;
  std::size_t pivots = 0;
};

// Dense two-phase simplex with Bland's rule. Throws ErrorCode::LpFailure on
// numeric breakdown (a pivot element below 1e-11) or iteration overflow.
LpSolution solve_lp(const LpProblem& problem);

}  // namespace relubound
