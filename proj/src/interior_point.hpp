#pragma once

#include "ncdoa/solver.hpp"

namespace ncdoa::internal {

// Smallest residual energy sum_l ||x_l - A_l z_l||^2 over all Z.
double min_residual_energy(const LiftedProblem& problem);

// The mu = 0 program as a second-order cone program
//   min sum_n t_n  s.t.  ||Z[n,:]|| <= t_n,  ||x - A z|| <= sqrt(budget),
// solved by a primal-dual interior-point method with Nesterov-Todd scaling
// and Mehrotra correction. Needs a validated problem whose ball has an
// interior (budget > min_residual_energy). The result is not projected.
LiftedSolution solve_sparse_interior_point(const LiftedProblem& problem,
                                           const SolverOptions& options);

}  // namespace ncdoa::internal
