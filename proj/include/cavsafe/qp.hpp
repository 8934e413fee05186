#pragma once

#include <Eigen/Core>
#include <variant>
#include <vector>

namespace cavsafe::qp {

/// a . u >= b
struct LinearConstraint {
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  double b = 0.0;
  int id = -1;  // caller tag, reported back when the constraint is active
};

struct Bound {
  double lo = -1e9;
  double hi = 1e9;
};

/// minimize 1/2 |u - u0|^2  s.t.  constraints, lo <= u <= hi.
struct QpProblem {
  Eigen::Vector2d u0 = Eigen::Vector2d::Zero();
  std::vector<LinearConstraint> constraints;
  Bound bounds[2];
};

struct Feasible {
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  double objective = 0.0;
  std::vector<int> active_ids;  // tagged constraints binding at u
};

struct Infeasible {};

using QpResult = std::variant<Feasible, Infeasible>;

inline constexpr double kFeasibilityTol = 1e-8;
inline constexpr double kDuplicateTol = 1e-12;

/// Exact Euclidean projection of u0 onto the feasible polygon. The optimum lies at
/// u0, on one constraint line, or at the intersection of two, so every candidate
/// active set of size <= 2 is enumerated and the nearest feasible candidate kept.
QpResult solve(const QpProblem& problem);

/// Largest violation max(0, b - a.u) over constraints and bounds.
double max_violation(const QpProblem& problem, const Eigen::Vector2d& u);

inline bool is_feasible(const QpResult& r) { return std::holds_alternative<Feasible>(r); }

}  // namespace cavsafe::qp
