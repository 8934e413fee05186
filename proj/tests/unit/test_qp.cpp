#include <doctest.h>

#include <random>

#include "../support/qp_oracles.hpp"
#include "cavsafe/qp.hpp"

using namespace cavsafe;

namespace {

qp::QpProblem wide(Eigen::Vector2d u0) {
  qp::QpProblem p;
  p.u0 = u0;
  p.bounds[0] = {-100, 100};
  p.bounds[1] = {-100, 100};
  return p;
}

}  // namespace

TEST_CASE("unconstrained projection is the reference point") {
  const auto r = qp::solve(wide({0.3, -2.0}));
  REQUIRE(qp::is_feasible(r));
  const auto& f = std::get<qp::Feasible>(r);
  CHECK(f.u[0] == 0.3);
  CHECK(f.u[1] == -2.0);
  CHECK(f.objective == 0.0);
}

TEST_CASE("projection onto a half-line") {
  auto p = wide({2.0, 0.0});
  p.constraints.push_back({{-1.0, 0.0}, -1.0, 7});
  const auto r = qp::solve(p);
  REQUIRE(qp::is_feasible(r));
  const auto& f = std::get<qp::Feasible>(r);
  CHECK(f.u[0] == doctest::Approx(1.0));
  CHECK(f.u[1] == doctest::Approx(0.0));
  CHECK(f.objective == doctest::Approx(0.5));
  CHECK(f.active_ids == std::vector<int>{7});
}

TEST_CASE("contradictory half-planes are infeasible") {
  auto p = wide({0.0, 0.0});
  p.constraints.push_back({{1.0, 0.0}, 1.0});
  p.constraints.push_back({{-1.0, 0.0}, 0.0});
  CHECK_FALSE(qp::is_feasible(qp::solve(p)));
}

TEST_CASE("box bounds clip the reference") {
  qp::QpProblem p;
  p.u0 = {5.0, -5.0};
  p.bounds[0] = {-1, 1};
  p.bounds[1] = {-2, 2};
  const auto& f = std::get<qp::Feasible>(qp::solve(p));
  CHECK(f.u[0] == doctest::Approx(1.0));
  CHECK(f.u[1] == doctest::Approx(-2.0));
  CHECK(f.active_ids.empty());
}

TEST_CASE("vertex of two constraints") {
  auto p = wide({0.0, 0.0});
  p.constraints.push_back({{1.0, 1.0}, 2.0, 1});
  p.constraints.push_back({{1.0, -1.0}, 2.0, 2});
  const auto& f = std::get<qp::Feasible>(qp::solve(p));
  CHECK(f.u[0] == doctest::Approx(2.0));
  CHECK(f.u[1] == doctest::Approx(0.0));
  CHECK(f.active_ids.size() == 2);
}

TEST_CASE("zero rows and duplicates") {
  auto p = wide({0.0, 0.0});
  p.constraints.push_back({{0.0, 0.0}, -1.0});
  p.constraints.push_back({{0.0, 1.0}, 1.0});
  p.constraints.push_back({{0.0, 2.0}, 2.0});
  const auto& f = std::get<qp::Feasible>(qp::solve(p));
  CHECK(f.u[1] == doctest::Approx(1.0));
  p.constraints.push_back({{0.0, 0.0}, 1.0});
  CHECK_FALSE(qp::is_feasible(qp::solve(p)));
}

TEST_CASE("projection property on random feasible problems") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  int feasible = 0;
  for (int k = 0; k < 10000; ++k) {
    const auto p = oracle::random_problem(rng, 4);
    const auto r = qp::solve(p);
    if (!qp::is_feasible(r)) continue;
    ++feasible;
    const Eigen::Vector2d u = std::get<qp::Feasible>(r).u;
    REQUIRE(qp::max_violation(p, u) <= 1e-8);
    const double du = (u - p.u0).norm();
    int tried = 0;
    for (int w = 0; w < 2000 && tried < 100; ++w) {
      const Eigen::Vector2d cand(box(rng), box(rng));
      if (qp::max_violation(p, cand) > 0.0) continue;
      ++tried;
      REQUIRE(du <= (cand - p.u0).norm() + 1e-6);
    }
  }
  CHECK(feasible > 3000);
}

TEST_CASE("feasibility matches the phase-1 oracle") {
  std::mt19937_64 rng(77);
  int infeasible = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto p = oracle::random_problem(rng, 6);
    const bool ours = qp::is_feasible(qp::solve(p));
    REQUIRE(ours == oracle::phase1_feasible(p));
    infeasible += !ours;
  }
  CHECK(infeasible > 50);
  CHECK(infeasible < 950);
}

TEST_CASE("solution matches the grid oracle") {
  std::mt19937_64 rng(5);
  int compared = 0;
  for (int k = 0; k < 200; ++k) {
    const auto p = oracle::random_problem(rng, 4);
    const auto r = qp::solve(p);
    if (!qp::is_feasible(r)) continue;
    const Eigen::Vector2d u = std::get<qp::Feasible>(r).u;
    const auto coarse = oracle::grid_projection(p, 1e-3);
    if (!coarse) continue;
    ++compared;
    // no grid point is closer to u0 than the solver's answer
    CHECK((u - p.u0).norm() <= (*coarse - p.u0).norm() + 1e-12);
    const auto g = oracle::zoom_grid_projection(p, coarse);
    CHECK((u - *g).norm() <= 2e-3);
  }
  CHECK(compared > 50);
}

TEST_CASE("scaling the constraints leaves the argmin unchanged") {
  std::mt19937_64 rng(19);
  for (int k = 0; k < 500; ++k) {
    auto p = oracle::random_problem(rng, 5);
    const auto r = qp::solve(p);
    for (auto& c : p.constraints) {
      c.a *= 37.5;
      c.b *= 37.5;
    }
    const auto s = qp::solve(p);
    REQUIRE(qp::is_feasible(r) == qp::is_feasible(s));
    if (qp::is_feasible(r))
      CHECK((std::get<qp::Feasible>(r).u - std::get<qp::Feasible>(s).u).norm() <= 1e-9);
  }
}

TEST_CASE("solve is deterministic") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    const auto p = oracle::random_problem(rng, 5);
    const auto a = qp::solve(p), b = qp::solve(p);
    REQUIRE(a.index() == b.index());
    if (qp::is_feasible(a)) CHECK(std::get<qp::Feasible>(a).u == std::get<qp::Feasible>(b).u);
  }
}
