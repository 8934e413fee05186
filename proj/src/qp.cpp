#include "cavsafe/qp.hpp"

#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cavsafe::qp {

namespace {

struct HalfPlane {
  Eigen::Vector2d a;  // unit normal
  double b;
  int id;
};

bool contains(const std::vector<HalfPlane>& planes, const Eigen::Vector2d& u) {
  for (const auto& p : planes)
    if (p.a.dot(u) - p.b < -kFeasibilityTol) return false;
  return true;
}

}  // namespace

double max_violation(const QpProblem& problem, const Eigen::Vector2d& u) {
  double worst = 0.0;
  for (const auto& c : problem.constraints) worst = std::max(worst, c.b - c.a.dot(u));
  for (int k = 0; k < 2; ++k) {
    worst = std::max(worst, problem.bounds[k].lo - u[k]);
    worst = std::max(worst, u[k] - problem.bounds[k].hi);
  }
  return worst;
}

QpResult solve(const QpProblem& problem) {
  std::vector<HalfPlane> planes;
  planes.reserve(problem.constraints.size() + 4);
  const auto add = [&planes](const Eigen::Vector2d& a, double b, int id) {
    const double n = a.norm();
    if (!std::isfinite(n) || !std::isfinite(b)) throw std::invalid_argument("non-finite constraint");
    if (n < kDuplicateTol) return b <= kFeasibilityTol;  // 0 >= b
    const HalfPlane hp{a / n, b / n, id};
    for (const auto& p : planes)
      if ((p.a - hp.a).cwiseAbs().maxCoeff() < kDuplicateTol && std::abs(p.b - hp.b) < kDuplicateTol)
        return true;
    planes.push_back(hp);
    return true;
  };

  for (const auto& c : problem.constraints)
    if (!add(c.a, c.b, c.id)) return Infeasible{};
  for (int k = 0; k < 2; ++k) {
    const Bound& bd = problem.bounds[k];
    if (!(bd.lo <= bd.hi)) throw std::invalid_argument("bound lo must not exceed hi");
    Eigen::Vector2d e = Eigen::Vector2d::Zero();
    e[k] = 1.0;
    add(e, bd.lo, -1);
    add(-e, -bd.hi, -1);
  }

  const Eigen::Vector2d& u0 = problem.u0;
  Eigen::Vector2d best = u0;
  bool found = contains(planes, u0);
  double best_dist = found ? 0.0 : std::numeric_limits<double>::infinity();

  if (!found) {
    const auto consider = [&](const Eigen::Vector2d& u) {
      if (!contains(planes, u)) return;
      const double d = (u - u0).squaredNorm();
      if (d < best_dist) {
        best_dist = d;
        best = u;
        found = true;
      }
    };
    // One active constraint: orthogonal projection onto its line.
    for (const auto& p : planes) consider(u0 + (p.b - p.a.dot(u0)) * p.a);
    // Two active constraints: the vertex where their lines meet.
    for (std::size_t i = 0; i < planes.size(); ++i) {
      for (std::size_t j = i + 1; j < planes.size(); ++j) {
        Eigen::Matrix2d m;
        m.row(0) = planes[i].a.transpose();
        m.row(1) = planes[j].a.transpose();
        const double det = m.determinant();
        if (std::abs(det) < kDuplicateTol) continue;
        consider(m.inverse() * Eigen::Vector2d(planes[i].b, planes[j].b));
      }
    }
  }
  if (!found) return Infeasible{};

  Feasible out;
  out.u = best;
  out.objective = 0.5 * (best - u0).squaredNorm();
  for (const auto& c : problem.constraints) {
    const double n = c.a.norm();
    if (c.id >= 0 && n > kDuplicateTol && std::abs(c.a.dot(best) - c.b) / n <= 1e-9)
      out.active_ids.push_back(c.id);
  }
  return out;
}

}  // namespace cavsafe::qp
