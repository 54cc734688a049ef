#pragma once

// Reference minimizers used to check the library's closed-form operators.
// None of them share code with src/.

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "ncdoa/array_model.hpp"
#include "ncdoa/solver.hpp"

namespace ncdoa::testing {

using Rng = std::mt19937_64;

CMatrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                      double scale = 1.0);
CVector random_vector(Rng& rng, Eigen::Index size, double scale = 1.0);

// Minimizer of a unimodal f on [lo, hi].
double golden_section(const std::function<double(double)>& f, double lo,
                      double hi, double tol = 1e-13);

// tau ||v|| + 0.5 ||v - r||^2 for one row.
double row_prox_objective(const CVector& v, const CVector& r, double tau);

// Row prox by 1-D search over v = c r, c in [0, 1] (the minimizer is a
// nonnegative multiple of r, any other direction only adds distance).
CVector row_prox_by_search(const CVector& r, double tau);

// tau ||X||_* + 0.5 ||X - Z||_F^2, with the nuclear norm from eigenvalues of
// X^H X rather than an SVD.
double nuclear_prox_objective(const CMatrix& x, const CMatrix& z, double tau);

// Minimizes tau/2 (||U||^2 + ||V||^2) + 0.5 ||U V^H - Z||^2 over full-width
// factors by gradient descent with backtracking. At a minimum U V^H is the
// nuclear prox of Z.
CMatrix nuclear_prox_by_factorization(const CMatrix& z, double tau,
                                      int iterations = 20000);

struct BlockSystem {
  std::vector<CMatrix> a;
  std::vector<CVector> x;
  double budget = 0.0;
};

double block_residual(const BlockSystem& sys, const CMatrix& w);

// Projection onto sum_l ||x_l - A_l w_l||^2 <= budget: bisection on the
// multiplier of (I + lambda A^H A) w = z + lambda A^H x, solved densely.
CMatrix project_by_bisection(const BlockSystem& sys, const CMatrix& z);

// Chambolle-Pock for min sum_n ||W[n, :]|| s.t. the residual ball.
CMatrix group_sparse_by_primal_dual(const BlockSystem& sys, int iterations);

// Views `sys`, which must outlive the result.
inline LiftedProblem as_problem(const BlockSystem& sys, double mu) {
  return LiftedProblem{sys.a, sys.x, mu, sys.budget};
}

// Tiny random block systems with a feasible interior.
BlockSystem random_block_system(Rng& rng, Eigen::Index rows_per_block,
                                Eigen::Index grid, Eigen::Index blocks,
                                double budget_fraction);

// Pulls `w` toward `inside` (a point of the ball) along the segment until it
// meets the residual ball; returns w itself when it is already feasible.
CMatrix pull_into_ball(const BlockSystem& sys, const CMatrix& w,
                       const CMatrix& inside);

// A point with zero residual when every block is underdetermined: the
// minimum-norm least-squares solution per block.
CMatrix least_squares_point(const BlockSystem& sys);

}  // namespace ncdoa::testing
