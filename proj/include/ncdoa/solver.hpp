#pragma once

#include <span>
#include <string_view>

#include "ncdoa/array_model.hpp"

namespace ncdoa {

// Algorithm for the mu = 0 program (no nuclear term). The nuclear term is
// always handled by ADMM.
enum class SparseSolver {
  kInteriorPoint,  // primal-dual second-order cone method
  kAdmm,
};

struct SolverOptions {
  int max_iterations = 5000;
  double penalty = 1.0;          // initial ADMM penalty rho
  double relaxation = 1.6;       // over-relaxation in (0, 2)
  bool adapt_penalty = true;     // residual balancing
  double penalty_factor = 2.0;
  double balance_ratio = 10.0;
  int balance_interval = 10;     // iterations between balancing checks
  double primal_tol = 1e-6;      // relative
  double dual_tol = 1e-6;        // relative
  double abs_tol = 1e-12;        // absolute floor added to both tolerances
  double feasibility_tol = 1e-4;
  int stagnation_window = 50;
  double stagnation_tol = 1e-12;
  SparseSolver sparse_solver = SparseSolver::kInteriorPoint;
  int interior_point_max_iterations = 100;
  double interior_point_tol = 1e-7;  // relative residuals and gap

  // Throws ConfigError naming the offending field.
  void validate() const;
};

enum class SolveStatus {
  kConverged,
  kZeroFeasible,   // x itself lies in the ball, zero is optimal
  kStagnated,
  kNotConverged,
};

std::string_view to_string(SolveStatus status);
std::string_view to_string(SparseSolver solver);

struct SolverDiagnostics {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  double constraint_residual = 0.0;  // sum_l ||x_l - A_l z_l||^2
  double noise_budget = 0.0;
  double final_penalty = 0.0;
  SolveStatus status = SolveStatus::kNotConverged;

  bool converged() const {
    return status == SolveStatus::kConverged ||
           status == SolveStatus::kZeroFeasible;
  }
};

// min ||Z||_{1,2} + mu ||Z||_*  s.t.  sum_l ||x_l - A_l Z[:,l]||^2 <= budget.
// Non-owning view; the referenced dictionaries and observations must outlive
// the problem.
struct LiftedProblem {
  std::span<const CMatrix> dictionaries;  // A_l, M_l x N
  std::span<const CVector> observations;  // x_l, length M_l
  double mu = 1.0;
  double noise_budget = 0.0;              // C * M * sigma^2

  std::size_t grid_size() const;
  std::size_t num_subarrays() const { return dictionaries.size(); }
  void validate() const;
};

struct LiftedSolution {
  CMatrix z_hat;  // N x L
  SolverDiagnostics diagnostics;
};

struct L1Solution {
  CVector s_hat;
  SolverDiagnostics diagnostics;
};

// Row-wise group soft threshold: r <- max(0, 1 - tau / ||r||) r.
CMatrix prox_row_group(const CMatrix& z, double tau);

// Singular value soft threshold: U max(S - tau, 0) V^H.
CMatrix prox_nuclear(const CMatrix& z, double tau);

// Euclidean projection of Z onto { W : sum_l ||x_l - A_l W[:,l]||^2 <= budget }.
// If the set is empty (x has energy outside the range of A exceeding the
// budget) the residual-minimizing point nearest Z is returned.
CMatrix project_residual_ball(const CMatrix& z, const LiftedProblem& problem);

double row_group_norm(const CMatrix& z);
double nuclear_norm(const CMatrix& z);
double residual_energy(const CMatrix& z, const LiftedProblem& problem);
double lifted_objective(const CMatrix& z, double mu);

LiftedSolution solve_lifted(const LiftedProblem& problem,
                            const SolverOptions& options = {});

// min ||s||_1  s.t.  ||x - A s||^2 <= budget (complex moduli in the L1 norm).
L1Solution solve_l1(const CMatrix& a, const CVector& x, double noise_budget,
                    const SolverOptions& options = {});

}  // namespace ncdoa
