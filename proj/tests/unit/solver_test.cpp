#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/QR>
#include <gtest/gtest.h>

#include "ncdoa/array_model.hpp"
#include "ncdoa/errors.hpp"
#include "ncdoa/solver.hpp"
#include "oracles.hpp"

namespace ncdoa {
namespace {

using testing::BlockSystem;
using testing::Rng;

TEST(ProxRowGroup, ZeroThresholdIsIdentity) {
  Rng rng(1);
  const CMatrix z = testing::random_matrix(rng, 6, 3);
  EXPECT_EQ((prox_row_group(z, 0.0) - z).norm(), 0.0);
}

TEST(ProxRowGroup, RowBelowThresholdVanishes) {
  CMatrix z(1, 2);
  z << cplx(0.3, 0.0), cplx(0.0, 0.4);  // norm 0.5
  EXPECT_EQ(prox_row_group(z, 1.0).norm(), 0.0);
}

TEST(ProxRowGroup, ThreeFourRow) {
  CMatrix z(1, 2);
  z << 3.0, 4.0;
  const CMatrix out = prox_row_group(z, 1.0);
  EXPECT_NEAR(std::abs(out(0, 0) - 2.4), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(out(0, 1) - 3.2), 0.0, 1e-14);
  // Same answer from searching over the scale factor.
  const CVector searched = testing::row_prox_by_search(z.row(0).transpose(), 1.0);
  EXPECT_NEAR((searched - out.row(0).transpose()).norm(), 0.0, 1e-7);
}

TEST(ProxRowGroup, MatchesScalarSearchOnRandomRows) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const CMatrix z = testing::random_matrix(rng, 8, 4);
    const double tau = 0.25 * (trial % 8);
    const CMatrix out = prox_row_group(z, tau);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const CVector r = z.row(i).transpose();
      const CVector v = out.row(i).transpose();
      const CVector ref = testing::row_prox_by_search(r, tau);
      EXPECT_LE(testing::row_prox_objective(v, r, tau),
                testing::row_prox_objective(ref, r, tau) + 1e-12);
    }
  }
}

TEST(ProxNuclear, ZeroThresholdIsIdentity) {
  Rng rng(3);
  const CMatrix z = testing::random_matrix(rng, 7, 4);
  EXPECT_LE((prox_nuclear(z, 0.0) - z).norm(), 1e-10 * z.norm());
}

TEST(ProxNuclear, RankOneShrinks) {
  Rng rng(4);
  const CVector u = testing::random_vector(rng, 5).normalized();
  const CVector v = testing::random_vector(rng, 3).normalized();
  const CMatrix z = 2.0 * u * v.adjoint();
  const CMatrix out = prox_nuclear(z, 0.5);
  EXPECT_NEAR((out - 1.5 * u * v.adjoint()).norm(), 0.0, 1e-12);
}

TEST(ProxNuclear, MatchesFactorizedMinimizer) {
  Rng rng(5);
  const CMatrix z = testing::random_matrix(rng, 5, 3);
  const double tau = 0.3;
  const CMatrix out = prox_nuclear(z, tau);
  const CMatrix ref = testing::nuclear_prox_by_factorization(z, tau);
  const double f_out = testing::nuclear_prox_objective(out, z, tau);
  const double f_ref = testing::nuclear_prox_objective(ref, z, tau);
  EXPECT_LE(f_out, f_ref + 1e-6);
  EXPECT_LE(f_ref, f_out + 1e-6);  // the oracle itself converged
  EXPECT_LE((out - ref).norm(), 2e-3);
}

TEST(ProxNuclear, NormsAgreeWithTheirDefinitions) {
  Rng rng(6);
  const CMatrix z = testing::random_matrix(rng, 6, 3);
  double rows = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) rows += z.row(i).norm();
  EXPECT_NEAR(row_group_norm(z), rows, 1e-12);
  EXPECT_NEAR(nuclear_norm(z),
              testing::nuclear_prox_objective(z, z, 1.0), 1e-10);
  EXPECT_NEAR(lifted_objective(z, 0.7), rows + 0.7 * nuclear_norm(z), 1e-12);
}

BlockSystem scalar_system(double budget) {
  BlockSystem sys;
  sys.a.push_back(CMatrix::Ones(1, 1));
  CVector x(1);
  x << 2.0;
  sys.x.push_back(x);
  sys.budget = budget;
  return sys;
}

TEST(ProjectResidualBall, ScalarGeometry) {
  const BlockSystem sys = scalar_system(1.0);
  const CMatrix out =
      project_residual_ball(CMatrix::Zero(1, 1), testing::as_problem(sys, 1.0));
  EXPECT_NEAR(std::abs(out(0, 0) - 1.0), 0.0, 1e-10);
  const CMatrix ref = testing::project_by_bisection(sys, CMatrix::Zero(1, 1));
  EXPECT_NEAR(std::abs(out(0, 0) - ref(0, 0)), 0.0, 1e-9);
}

TEST(ProjectResidualBall, FeasiblePointUnchanged) {
  Rng rng(7);
  BlockSystem sys = testing::random_block_system(rng, 3, 6, 2, 0.5);
  const LiftedProblem problem = testing::as_problem(sys, 1.0);
  const CMatrix inside = testing::project_by_bisection(
      sys, testing::random_matrix(rng, 6, 2));
  sys.budget *= 1.01;  // strictly inside now
  const CMatrix out = project_residual_ball(inside, testing::as_problem(sys, 1.0));
  EXPECT_EQ((out - inside).norm(), 0.0);
  (void)problem;
}

TEST(ProjectResidualBall, HugeBudgetIsInactive) {
  Rng rng(8);
  BlockSystem sys = testing::random_block_system(rng, 3, 6, 2, 1e12);
  const CMatrix z = testing::random_matrix(rng, 6, 2);
  EXPECT_EQ((project_residual_ball(z, testing::as_problem(sys, 1.0)) - z).norm(), 0.0);
}

TEST(ProjectResidualBall, MatchesDenseBisection) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const BlockSystem sys = testing::random_block_system(rng, 3, 5, 3, 0.1);
    const CMatrix z = testing::random_matrix(rng, 5, 3, 2.0);
    const CMatrix out = project_residual_ball(z, testing::as_problem(sys, 0.0));
    const CMatrix ref = testing::project_by_bisection(sys, z);
    EXPECT_LE(testing::block_residual(sys, out), sys.budget * (1 + 1e-9));
    EXPECT_NEAR((out - z).squaredNorm(), (ref - z).squaredNorm(), 1e-8);
    EXPECT_LE((out - ref).norm(), 1e-6);
  }
}

TEST(ProjectResidualBall, TallBlockWithResidualOutsideRange) {
  // More rows than grid points: part of x is unreachable but the budget
  // still leaves an interior.
  Rng rng(10);
  BlockSystem sys;
  sys.a.push_back(testing::random_matrix(rng, 6, 3));
  sys.x.push_back(testing::random_vector(rng, 6));
  const LiftedProblem problem = testing::as_problem(sys, 1.0);
  // min residual energy: distance of x to range(A).
  const CVector ls = sys.a[0].colPivHouseholderQr().solve(sys.x[0]);
  const double floor = (sys.x[0] - sys.a[0] * ls).squaredNorm();
  sys.budget = floor + 0.1;
  const CMatrix z = testing::random_matrix(rng, 3, 1, 3.0);
  const CMatrix out = project_residual_ball(z, testing::as_problem(sys, 1.0));
  const CMatrix ref = testing::project_by_bisection(sys, z);
  EXPECT_LE((out - ref).norm(), 1e-6);
  (void)problem;
}

ArrayGeometry experiment_geometry() { return make_ula(24, 0.5, {6, 6, 6, 6}); }

TEST(SolveLifted, ZeroObservationsGiveZero) {
  const GridManifold m = build_grid_manifold(experiment_geometry(),
                                             make_uniform_grid(-60, 60, 1));
  std::vector<CVector> x(4, CVector::Zero(6));
  const LiftedProblem problem{m.per_subarray, x, 1.0, 0.1};
  const LiftedSolution sol = solve_lifted(problem);
  EXPECT_EQ(sol.z_hat.norm(), 0.0);
  EXPECT_EQ(sol.diagnostics.status, SolveStatus::kZeroFeasible);
  EXPECT_TRUE(sol.diagnostics.converged());
}

TEST(SolveLifted, SingleCoherentSourceIsOneSparse) {
  const ArrayGeometry g = make_ula(8, 0.5, {8});
  const auto grid = make_uniform_grid(-60, 60, 2);
  const GridManifold m = build_grid_manifold(g, grid);
  const std::size_t truth = 40;  // 20 degrees
  const cplx amp(0.8, -0.6);
  const std::vector<CVector> x{amp * m.per_subarray[0].col(truth)};
  const double budget = 0.2 * x[0].squaredNorm();  // generous
  const LiftedProblem problem{m.per_subarray, x, 1.0, budget};
  const LiftedSolution sol = solve_lifted(problem);

  Eigen::Index dominant = 0;
  sol.z_hat.rowwise().norm().maxCoeff(&dominant);
  EXPECT_EQ(static_cast<std::size_t>(dominant), truth);
  EXPECT_LE(sol.diagnostics.constraint_residual, budget * (1 + 1e-4));

  // One-sparse candidate on the true row, shrunk until the residual meets
  // the budget exactly.
  const double shrink = 1.0 - std::sqrt(budget) / x[0].norm();
  CMatrix candidate = CMatrix::Zero(m.grid_size(), 1);
  candidate(truth, 0) = shrink * amp;
  ASSERT_LE(residual_energy(candidate, problem), budget * (1 + 1e-12));
  EXPECT_LE(sol.diagnostics.objective,
            lifted_objective(candidate, 1.0) * (1 + 1e-5));
}

TEST(SolveLifted, TwoSourcesAtHighSnrHaveDominantRowsOnTheTruth) {
  Scenario s{experiment_geometry(), {0.0, 15.0}, {1.0, 1.0}, 30.0};
  const auto grid = make_uniform_grid(-60, 60, 0.5);
  const GridManifold m = build_grid_manifold(s.geometry, grid);
  const Snapshot snap = generate_snapshot(s, 21);
  const LiftedProblem problem{m.per_subarray, snap.observations, 1.0,
                              2.0 * 24 * s.noise_variance()};
  const LiftedSolution sol = solve_lifted(problem);
  // Two largest local maxima of the row-norm profile.
  const Eigen::VectorXd norms = sol.z_hat.rowwise().norm();
  std::vector<Eigen::Index> maxima;
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    const bool left = i == 0 || norms(i) > norms(i - 1);
    const bool right = i + 1 == norms.size() || norms(i) > norms(i + 1);
    if (left && right) maxima.push_back(i);
  }
  ASSERT_GE(maxima.size(), 2u);
  std::partial_sort(maxima.begin(), maxima.begin() + 2, maxima.end(),
                    [&](auto a, auto b) { return norms(a) > norms(b); });
  std::vector<double> top{grid[maxima[0]], grid[maxima[1]]};
  std::sort(top.begin(), top.end());
  EXPECT_EQ(top, (std::vector<double>{0.0, 15.0}));
}

TEST(SolveLifted, RejectsInconsistentProblems) {
  const std::vector<CMatrix> a{CMatrix::Ones(2, 3), CMatrix::Ones(2, 4)};
  const std::vector<CVector> x{CVector::Ones(2), CVector::Ones(2)};
  EXPECT_THROW(solve_lifted(LiftedProblem{a, x, 1.0, 0.1}), ConfigError);
  const std::vector<CMatrix> a1{CMatrix::Ones(2, 3)};
  const std::vector<CVector> x3{CVector::Ones(3)};
  EXPECT_THROW(solve_lifted(LiftedProblem{a1, x3, 1.0, 0.1}), ConfigError);
  const std::vector<CVector> x1{CVector::Ones(2)};
  EXPECT_THROW(solve_lifted(LiftedProblem{a1, x1, -1.0, 0.1}), ConfigError);
  EXPECT_THROW(solve_lifted(LiftedProblem{a1, x1, 1.0, -0.1}), ConfigError);
}

TEST(SolverOptions, ValidationNamesTheField) {
  SolverOptions o;
  o.primal_tol = 0.0;
  try {
    o.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("primal_tol"), std::string::npos);
  }
  o = {};
  o.relaxation = 2.0;
  EXPECT_THROW(o.validate(), ConfigError);
  o = {};
  o.interior_point_tol = -1.0;
  EXPECT_THROW(o.validate(), ConfigError);
  o = {};
  o.max_iterations = 0;
  EXPECT_THROW(o.validate(), ConfigError);
}

TEST(SolveL1, ZeroObservationGivesZero) {
  const CMatrix a = CMatrix::Ones(4, 7);
  const L1Solution sol = solve_l1(a, CVector::Zero(4), 1e-3);
  EXPECT_EQ(sol.s_hat.norm(), 0.0);
}

TEST(SolveL1, NoiselessSingleSourceMatchesLeastSquaresOnTheSupport) {
  const ArrayGeometry g = experiment_geometry();
  const auto grid = make_uniform_grid(-60, 60, 0.5);
  const GridManifold m = build_grid_manifold(g, grid);
  const std::size_t truth = 150;  // 15 degrees
  const cplx amp(-0.4, 1.1);
  const CVector x = amp * m.stacked.col(truth);
  const L1Solution sol = solve_l1(m.stacked, x, 1e-8);
  Eigen::Index dominant = 0;
  sol.s_hat.cwiseAbs().maxCoeff(&dominant);
  EXPECT_EQ(static_cast<std::size_t>(dominant), truth);
  const cplx ls = m.stacked.col(truth).dot(x) / m.stacked.col(truth).squaredNorm();
  EXPECT_LE(std::abs(sol.s_hat(truth) - ls), 1e-3 * std::abs(ls));
  // Everything else is numerically zero.
  CVector rest = sol.s_hat;
  rest(truth) = 0.0;
  EXPECT_LE(rest.norm(), 1e-3 * std::abs(ls));
}

TEST(SolveL1, FourPhaseCorrectedSourcesGiveFourPeaks) {
  const ArrayGeometry g = experiment_geometry();
  const auto grid = make_uniform_grid(-60, 60, 0.5);
  const GridManifold m = build_grid_manifold(g, grid);
  const std::vector<double> doas{-15.0, 0.0, 15.0, 30.0};
  const std::vector<cplx> amps{{1.0, 0.2}, {-0.7, 0.6}, {0.3, -0.9}, {0.8, 0.8}};
  CVector x = CVector::Zero(24);
  for (std::size_t q = 0; q < 4; ++q) {
    const auto idx = std::find(grid.begin(), grid.end(), doas[q]) - grid.begin();
    x += amps[q] * m.stacked.col(idx);
  }
  const L1Solution sol = solve_l1(m.stacked, x, 1e-8);
  const Eigen::VectorXd mag = sol.s_hat.cwiseAbs();
  std::vector<Eigen::Index> order(mag.size());
  for (Eigen::Index i = 0; i < mag.size(); ++i) order[i] = i;
  std::partial_sort(order.begin(), order.begin() + 4, order.end(),
                    [&](auto a, auto b) { return mag(a) > mag(b); });
  std::vector<double> top;
  for (int k = 0; k < 4; ++k) top.push_back(grid[order[k]]);
  std::sort(top.begin(), top.end());
  EXPECT_EQ(top, doas);
}

TEST(SparseSolvers, InteriorPointMatchesPrimalDualOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    const BlockSystem sys = testing::random_block_system(rng, 4, 10, 3, 0.2);
    const LiftedProblem problem = testing::as_problem(sys, 0.0);
    const LiftedSolution sol = solve_lifted(problem);
    ASSERT_TRUE(sol.diagnostics.converged()) << to_string(sol.diagnostics.status);
    const CMatrix ref = testing::project_by_bisection(
        sys, testing::group_sparse_by_primal_dual(sys, 200000));
    const double f_ref = row_group_norm(ref);
    EXPECT_LE(sol.diagnostics.constraint_residual, sys.budget * (1 + 1e-4));
    EXPECT_LE(sol.diagnostics.objective, f_ref * (1 + 1e-5));
    EXPECT_NEAR(sol.diagnostics.objective, f_ref, 1e-4 * f_ref);
  }
}

TEST(SparseSolvers, InteriorPointAndAdmmAgree) {
  Rng rng(12);
  const BlockSystem sys = testing::random_block_system(rng, 6, 30, 4, 0.1);
  const LiftedProblem problem = testing::as_problem(sys, 0.0);
  const LiftedSolution ip = solve_lifted(problem);
  SolverOptions admm;
  admm.sparse_solver = SparseSolver::kAdmm;
  admm.max_iterations = 200000;
  admm.primal_tol = admm.dual_tol = 1e-9;
  const LiftedSolution reference = solve_lifted(problem, admm);
  EXPECT_EQ(ip.diagnostics.status, SolveStatus::kConverged);
  EXPECT_NEAR(ip.diagnostics.objective, reference.diagnostics.objective,
              1e-5 * reference.diagnostics.objective);
}

TEST(SparseSolvers, UnreachableBudgetFallsBackToAdmm) {
  // Tall block: the residual floor exceeds the budget, the ball is empty.
  Rng rng(13);
  BlockSystem sys;
  sys.a.push_back(testing::random_matrix(rng, 8, 3));
  sys.x.push_back(testing::random_vector(rng, 8));
  sys.budget = 1e-6;
  SolverOptions opts;
  opts.max_iterations = 200;
  const LiftedSolution sol = solve_lifted(testing::as_problem(sys, 0.0), opts);
  EXPECT_FALSE(sol.diagnostics.converged());
  EXPECT_GT(sol.diagnostics.constraint_residual, sys.budget);
}

TEST(SolveStatus, Names) {
  EXPECT_EQ(to_string(SolveStatus::kConverged), "converged");
  EXPECT_EQ(to_string(SolveStatus::kNotConverged), "not_converged");
  EXPECT_EQ(to_string(SparseSolver::kAdmm), "admm");
  EXPECT_EQ(to_string(SparseSolver::kInteriorPoint), "interior_point");
}

}  // namespace
}  // namespace ncdoa
