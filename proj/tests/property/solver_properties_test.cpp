#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ncdoa/solver.hpp"
#include "oracles.hpp"

namespace ncdoa {
namespace {

using testing::BlockSystem;
using testing::Rng;

constexpr int kInstances = 50;
constexpr int kCandidatesPerInstance = 20000;  // 1e6 in total per operator

// Random candidate around `center`, at a random scale in [1e-6, 1].
CMatrix candidate_near(Rng& rng, const CMatrix& center) {
  std::uniform_real_distribution<double> exponent(-6.0, 0.0);
  const double scale = std::pow(10.0, exponent(rng)) * std::max(1.0, center.norm());
  CMatrix d = testing::random_matrix(rng, center.rows(), center.cols());
  return center + (scale / d.norm()) * d;
}

struct Shape {
  Eigen::Index rows;
  Eigen::Index cols;
};

Shape random_shape(Rng& rng) {
  std::uniform_int_distribution<int> rows(1, 8), cols(1, 4);
  return {rows(rng), cols(rng)};
}

TEST(ProxProperties, RowGroupBeatsCandidatesAndSearch) {
  Rng rng(101);
  std::uniform_real_distribution<double> tau_dist(0.0, 2.0);
  for (int inst = 0; inst < kInstances; ++inst) {
    const Shape s = random_shape(rng);
    const CMatrix z = testing::random_matrix(rng, s.rows, s.cols);
    const double tau = tau_dist(rng);
    const CMatrix out = prox_row_group(z, tau);
    auto objective = [&](const CMatrix& x) {
      double f = 0.5 * (x - z).squaredNorm();
      for (Eigen::Index i = 0; i < x.rows(); ++i) f += tau * x.row(i).norm();
      return f;
    };
    const double f_out = objective(out);
    CMatrix searched(s.rows, s.cols);
    for (Eigen::Index i = 0; i < s.rows; ++i)
      searched.row(i) = testing::row_prox_by_search(z.row(i).transpose(), tau).transpose();
    EXPECT_LE(f_out, objective(searched) + 1e-6);
    double best = f_out;
    for (int k = 0; k < kCandidatesPerInstance; ++k)
      best = std::min(best, objective(candidate_near(rng, out)));
    EXPECT_GE(best, f_out - 1e-6) << "instance " << inst;
  }
}

TEST(ProxProperties, NuclearBeatsCandidatesAndFactorizedMinimizer) {
  Rng rng(102);
  std::uniform_real_distribution<double> tau_dist(0.0, 1.5);
  for (int inst = 0; inst < kInstances; ++inst) {
    const Shape s = random_shape(rng);
    const CMatrix z = testing::random_matrix(rng, s.rows, s.cols);
    const double tau = tau_dist(rng);
    const CMatrix out = prox_nuclear(z, tau);
    const double f_out = testing::nuclear_prox_objective(out, z, tau);
    const CMatrix ref = testing::nuclear_prox_by_factorization(z, tau);
    EXPECT_LE(f_out, testing::nuclear_prox_objective(ref, z, tau) + 1e-6);
    double best = f_out;
    for (int k = 0; k < kCandidatesPerInstance; ++k)
      best = std::min(best, testing::nuclear_prox_objective(candidate_near(rng, out), z, tau));
    EXPECT_GE(best, f_out - 1e-6) << "instance " << inst;
  }
}

TEST(ProxProperties, ProjectionBeatsFeasibleCandidatesAndBisection) {
  Rng rng(103);
  std::uniform_int_distribution<int> grid(2, 8), blocks(1, 4);
  std::uniform_real_distribution<double> fraction(0.01, 0.9);
  for (int inst = 0; inst < kInstances; ++inst) {
    const Eigen::Index n = grid(rng);
    const Eigen::Index rows = std::max<Eigen::Index>(1, n - 1);
    const BlockSystem sys =
        testing::random_block_system(rng, rows, n, blocks(rng), fraction(rng));
    const CMatrix z = testing::random_matrix(rng, n, static_cast<Eigen::Index>(sys.a.size()), 2.0);
    const CMatrix out = project_residual_ball(z, testing::as_problem(sys, 1.0));
    ASSERT_LE(testing::block_residual(sys, out), sys.budget * (1 + 1e-9));
    const double f_out = (out - z).squaredNorm();
    const CMatrix ref = testing::project_by_bisection(sys, z);
    EXPECT_LE(f_out, (ref - z).squaredNorm() + 1e-6);
    const CMatrix inside = testing::least_squares_point(sys);
    double best = f_out;
    for (int k = 0; k < kCandidatesPerInstance; ++k) {
      const CMatrix w = testing::pull_into_ball(sys, candidate_near(rng, out), inside);
      best = std::min(best, (w - z).squaredNorm());
    }
    EXPECT_GE(best, f_out - 1e-6) << "instance " << inst;
  }
}

struct Instance {
  BlockSystem sys;
  double mu;
};

Instance random_instance(Rng& rng) {
  std::uniform_int_distribution<int> blocks(1, 4), rows(3, 6), grid(10, 40);
  std::uniform_real_distribution<double> fraction(0.05, 0.5);
  const double mus[] = {0.0, 0.5, 1.0};
  Instance inst{testing::random_block_system(rng, rows(rng), grid(rng), blocks(rng),
                                             fraction(rng)),
                mus[rng() % 3]};
  return inst;
}

TEST(SolverProperties, FinalIterateIsFeasible) {
  Rng rng(104);
  const SolverOptions opts;
  for (int k = 0; k < 15; ++k) {
    const Instance inst = random_instance(rng);
    const LiftedSolution sol = solve_lifted(testing::as_problem(inst.sys, inst.mu));
    EXPECT_LE(sol.diagnostics.constraint_residual,
              inst.sys.budget * (1 + opts.feasibility_tol));
    EXPECT_NEAR(sol.diagnostics.constraint_residual,
                testing::block_residual(inst.sys, sol.z_hat),
                1e-9 * inst.sys.budget);
    EXPECT_NEAR(sol.diagnostics.objective, lifted_objective(sol.z_hat, inst.mu),
                1e-9 * std::max(1.0, sol.diagnostics.objective));
  }
}

TEST(SolverProperties, RandomFeasiblePerturbationsDoNotDescend) {
  Rng rng(105);
  const SolverOptions opts;
  for (int k = 0; k < 6; ++k) {
    const Instance inst = random_instance(rng);
    const LiftedProblem problem = testing::as_problem(inst.sys, inst.mu);
    const LiftedSolution sol = solve_lifted(problem);
    ASSERT_TRUE(sol.diagnostics.converged()) << to_string(sol.diagnostics.status);
    const double f = lifted_objective(sol.z_hat, inst.mu);
    double worst = 0.0;
    for (int p = 0; p < 100; ++p) {
      const double scale = std::pow(10.0, -1.0 - (p % 4)) * sol.z_hat.norm();
      CMatrix d = testing::random_matrix(rng, sol.z_hat.rows(), sol.z_hat.cols());
      const CMatrix moved = project_residual_ball(sol.z_hat + (scale / d.norm()) * d, problem);
      worst = std::min(worst, lifted_objective(moved, inst.mu) - f);
    }
    EXPECT_GE(worst, -10.0 * opts.primal_tol * f) << "instance " << k << " mu " << inst.mu;
  }
}

TEST(SolverProperties, L1MinimizerScalesWithTheData) {
  Rng rng(106);
  for (int k = 0; k < 5; ++k) {
    const CMatrix a = testing::random_matrix(rng, 6, 20);
    const CVector x = testing::random_vector(rng, 6);
    const double budget = 0.1 * x.squaredNorm();
    const double c = 0.5 + 2.5 * static_cast<double>(k) / 4.0;
    SolverOptions tight;
    tight.interior_point_tol = 1e-11;
    const L1Solution base = solve_l1(a, x, budget, tight);
    const L1Solution scaled = solve_l1(a, c * x, c * c * budget, tight);
    EXPECT_EQ(base.diagnostics.status, SolveStatus::kConverged);
    EXPECT_EQ(scaled.diagnostics.status, SolveStatus::kConverged);
    EXPECT_LE((scaled.s_hat - c * base.s_hat).norm(), 1e-6 * c * base.s_hat.norm())
        << "c = " << c;
  }
}

TEST(SolverProperties, MuZeroMatchesThePureGroupProgram) {
  Rng rng(107);
  for (int k = 0; k < 4; ++k) {
    const BlockSystem sys = testing::random_block_system(rng, 5, 25, 3, 0.15);
    const LiftedSolution lifted = solve_lifted(testing::as_problem(sys, 0.0));
    SolverOptions admm;
    admm.sparse_solver = SparseSolver::kAdmm;
    admm.max_iterations = 200000;
    admm.primal_tol = admm.dual_tol = 1e-9;
    const LiftedSolution group = solve_lifted(testing::as_problem(sys, 0.0), admm);
    EXPECT_NEAR(lifted.diagnostics.objective, group.diagnostics.objective,
                1e-5 * group.diagnostics.objective);
    EXPECT_LE((lifted.z_hat - group.z_hat).norm(), 1e-3 * group.z_hat.norm());
  }
}

TEST(SolverProperties, RepeatedSolvesAreBitIdentical) {
  Rng rng(108);
  for (double mu : {0.0, 1.0}) {
    const BlockSystem sys = testing::random_block_system(rng, 4, 20, 3, 0.2);
    const LiftedSolution a = solve_lifted(testing::as_problem(sys, mu));
    const LiftedSolution b = solve_lifted(testing::as_problem(sys, mu));
    EXPECT_TRUE(a.z_hat == b.z_hat) << "mu " << mu;
    EXPECT_EQ(a.diagnostics.iterations, b.diagnostics.iterations);
  }
}

}  // namespace
}  // namespace ncdoa
