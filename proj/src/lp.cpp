// Copyright (c) relubound contributors.
// SPDX-License-Identifier: Apache-2.0
#include "relubound/lp.hpp"

#include <cmath>
#include <limits>

#include "relubound/error.hpp"

namespace relubound {

const char* to_string(LpStatus s) noexcept {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
  }
  return "unknown";
}

namespace {

constexpr double kEps = 1e-9;
constexpr double kPivotFloor = 1e-11;

// Tableau in standard form: rows 0..m-1 are constraints (basic variable value
// in the last column), row m is the objective row holding reduced costs with
// the negated objective value in the last column.
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_((rows + 1) * (cols + 1), 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * (cols_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, cols_); }
  double rhs(std::size_t r) const { return at(r, cols_); }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  void pivot(std::size_t r, std::size_t c) {
    const double p = at(r, c);
    if (std::fabs(p) < kPivotFloor) throw Error(ErrorCode::LpFailure, "simplex pivot below 1e-11");
    for (std::size_t j = 0; j <= cols_; ++j) at(r, j) /= p;
    at(r, c) = 1.0;
    for (std::size_t i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      const double f = at(i, c);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) at(i, j) -= f * at(r, j);
      at(i, c) = 0.0;
    }
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

enum class Outcome { Optimal, Unbounded };

// Bland's rule: lowest-index improving column, lowest-index basic variable
// among ratio ties.
Outcome run_simplex(Tableau& t, std::vector<std::size_t>& basis, const std::vector<bool>& allowed,
                    std::size_t& pivots) {
  const std::size_t m = t.rows();
  const std::size_t limit = 50000 + 100 * (t.rows() + t.cols());
  for (std::size_t iter = 0;; ++iter) {
    if (iter > limit) throw Error(ErrorCode::LpFailure, "simplex iteration limit exceeded");
    std::size_t enter = t.cols();
    for (std::size_t j = 0; j < t.cols(); ++j) {
      if (allowed[j] && t.at(m, j) < -kEps) {
        enter = j;
        break;
      }
    }
    if (enter == t.cols()) return Outcome::Optimal;
    std::size_t leave = m;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      const double a = t.at(i, enter);
      if (a <= kEps) continue;
      const double ratio = t.rhs(i) / a;
      if (leave == m || ratio < best - kEps) {
        best = ratio;
        leave = i;
      } else if (ratio <= best + kEps && basis[i] < basis[leave]) {
        leave = i;
      }
    }
    if (leave == m) return Outcome::Unbounded;
    t.pivot(leave, enter);
    basis[leave] = enter;
    ++pivots;
  }
}

void load_objective(Tableau& t, const std::vector<std::size_t>& basis, const std::vector<double>& cost) {
  const std::size_t m = t.rows();
  for (std::size_t j = 0; j <= t.cols(); ++j) t.at(m, j) = j < cost.size() ? cost[j] : 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double cb = cost[basis[i]];
    if (cb == 0.0) continue;
    for (std::size_t j = 0; j <= t.cols(); ++j) t.at(m, j) -= cb * t.at(i, j);
  }
}

}  // namespace

LpSolution solve_lp(const LpProblem& problem) {
  const auto n = static_cast<std::size_t>(problem.objective.size());
  if (static_cast<std::size_t>(problem.lower.size()) != n || static_cast<std::size_t>(problem.upper.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "LP bounds do not match objective dimension");
  }
  for (const auto& c : problem.constraints) {
    if (static_cast<std::size_t>(c.coeffs.size()) != n) {
      throw Error(ErrorCode::DimensionMismatch, "LP constraint has wrong dimension");
    }
  }
  if (!problem.lower.allFinite() || !problem.upper.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "LP variables must be box-bounded");
  }
  LpSolution sol;
  if ((problem.lower.array() > problem.upper.array()).any()) {
    sol.status = LpStatus::Infeasible;
    return sol;
  }

  // Shift y = x - lower so that y >= 0, then add y_k <= upper_k - lower_k rows.
  struct Row {
    Vector a;
    Relation rel;
    double b;
  };
  std::vector<Row> rows;
  for (const auto& c : problem.constraints) {
    rows.push_back({c.coeffs, c.relation, c.rhs - c.coeffs.dot(problem.lower)});
  }
  for (std::size_t k = 0; k < n; ++k) {
    Vector e = Vector::Zero(static_cast<Eigen::Index>(n));
    e(static_cast<Eigen::Index>(k)) = 1.0;
    rows.push_back({e, Relation::LessEqual, problem.upper(static_cast<Eigen::Index>(k)) - problem.lower(static_cast<Eigen::Index>(k))});
  }
  for (Row& r : rows) {
    if (r.b < 0.0) {
      r.a = -r.a;
      r.b = -r.b;
      if (r.rel == Relation::LessEqual) r.rel = Relation::GreaterEqual;
      else if (r.rel == Relation::GreaterEqual) r.rel = Relation::LessEqual;
    }
  }

  // Column layout: structural | slack/surplus | artificial.
  const std::size_t m = rows.size();
  std::size_t n_slack = 0, n_art = 0;
  for (const Row& r : rows) {
    if (r.rel != Relation::Equal) ++n_slack;
    if (r.rel != Relation::LessEqual) ++n_art;
  }
  const std::size_t cols = n + n_slack + n_art;
  Tableau t(m, cols);
  std::vector<std::size_t> basis(m);
  std::vector<bool> is_art(cols, false);
  std::size_t slack = n, art = n + n_slack;
  for (std::size_t i = 0; i < m; ++i) {
    const Row& r = rows[i];
    for (std::size_t k = 0; k < n; ++k) t.at(i, k) = r.a(static_cast<Eigen::Index>(k));
    t.rhs(i) = r.b;
    if (r.rel == Relation::LessEqual) {
      t.at(i, slack) = 1.0;
      basis[i] = slack++;
    } else {
      if (r.rel == Relation::GreaterEqual) t.at(i, slack++) = -1.0;
      t.at(i, art) = 1.0;
      is_art[art] = true;
      basis[i] = art++;
    }
  }

  std::vector<bool> allowed(cols, true);
  if (n_art > 0) {
    std::vector<double> phase1(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) phase1[j] = is_art[j] ? 1.0 : 0.0;
    load_objective(t, basis, phase1);
    run_simplex(t, basis, allowed, sol.pivots);
    double scale = 1.0;
    for (const Row& r : rows) scale = std::max(scale, std::fabs(r.b));
    if (-t.rhs(m) > 1e-9 * scale) {
      sol.status = LpStatus::Infeasible;
      return sol;
    }
    // Drive remaining artificials out of the basis; rows where that is
    // impossible are redundant and are zeroed.
    for (std::size_t i = 0; i < m; ++i) {
      if (!is_art[basis[i]]) continue;
      std::size_t col = cols;
      double best = kEps;
      for (std::size_t j = 0; j < cols; ++j) {
        if (!is_art[j] && std::fabs(t.at(i, j)) > best) {
          best = std::fabs(t.at(i, j));
          col = j;
        }
      }
      if (col < cols) {
        t.pivot(i, col);
        basis[i] = col;
        ++sol.pivots;
      } else {
        for (std::size_t j = 0; j <= cols; ++j) t.at(i, j) = 0.0;
      }
    }
    for (std::size_t j = 0; j < cols; ++j) allowed[j] = !is_art[j];
  }

  std::vector<double> cost(cols, 0.0);
  for (std::size_t k = 0; k < n; ++k) cost[k] = problem.objective(static_cast<Eigen::Index>(k));
  load_objective(t, basis, cost);
  if (run_simplex(t, basis, allowed, sol.pivots) == Outcome::Unbounded) {
    sol.status = LpStatus::Unbounded;
    return sol;
  }

  Vector y = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < n) y(static_cast<Eigen::Index>(basis[i])) = t.rhs(i);
  }
  sol.x = (y + problem.lower).cwiseMax(problem.lower).cwiseMin(problem.upper);
  sol.value = problem.objective.dot(sol.x) + problem.offset;
  sol.status = LpStatus::Optimal;
  return sol;
}

}  // namespace relubound
