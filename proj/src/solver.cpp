#include "ncdoa/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "interior_point.hpp"
#include "ncdoa/errors.hpp"

namespace ncdoa {

void SolverOptions::validate() const {
  if (max_iterations < 1) {
    throw ConfigError("solver.max_iterations: must be >= 1");
  }
  if (!(penalty > 0.0)) throw ConfigError("solver.penalty: must be > 0");
  if (!(relaxation > 0.0 && relaxation < 2.0)) {
    throw ConfigError("solver.relaxation: must lie in (0, 2)");
  }
  if (!(penalty_factor > 1.0)) {
    throw ConfigError("solver.penalty_factor: must be > 1");
  }
  if (!(balance_ratio > 1.0)) {
    throw ConfigError("solver.balance_ratio: must be > 1");
  }
  if (balance_interval < 1) {
    throw ConfigError("solver.balance_interval: must be >= 1");
  }
  if (!(primal_tol > 0.0)) throw ConfigError("solver.primal_tol: must be > 0");
  if (!(dual_tol > 0.0)) throw ConfigError("solver.dual_tol: must be > 0");
  if (!(abs_tol > 0.0)) throw ConfigError("solver.abs_tol: must be > 0");
  if (!(feasibility_tol > 0.0)) {
    throw ConfigError("solver.feasibility_tol: must be > 0");
  }
  if (stagnation_window < 1) {
    throw ConfigError("solver.stagnation_window: must be >= 1");
  }
  if (!(stagnation_tol > 0.0)) {
    throw ConfigError("solver.stagnation_tol: must be > 0");
  }
  if (interior_point_max_iterations < 1) {
    throw ConfigError("solver.interior_point_max_iterations: must be >= 1");
  }
  if (!(interior_point_tol > 0.0)) {
    throw ConfigError("solver.interior_point_tol: must be > 0");
  }
}

std::string_view to_string(SparseSolver solver) {
  switch (solver) {
    case SparseSolver::kInteriorPoint: return "interior_point";
    case SparseSolver::kAdmm: return "admm";
  }
  return "unknown";
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kZeroFeasible: return "zero_feasible";
    case SolveStatus::kStagnated: return "stagnated";
    case SolveStatus::kNotConverged: return "not_converged";
  }
  return "unknown";
}

std::size_t LiftedProblem::grid_size() const {
  return dictionaries.empty() ? 0
                              : static_cast<std::size_t>(dictionaries[0].cols());
}

void LiftedProblem::validate() const {
  if (dictionaries.empty()) {
    throw ConfigError("problem: at least one sub-array dictionary required");
  }
  if (dictionaries.size() != observations.size()) {
    throw ConfigError("problem: one observation vector per dictionary required");
  }
  const Eigen::Index n = dictionaries[0].cols();
  for (std::size_t ell = 0; ell < dictionaries.size(); ++ell) {
    if (dictionaries[ell].cols() != n) {
      throw ConfigError("problem: dictionaries disagree on grid size");
    }
    if (dictionaries[ell].rows() != observations[ell].size()) {
      throw ConfigError("problem: observation length does not match rows of A_" +
                        std::to_string(ell));
    }
  }
  if (!(mu >= 0.0)) throw ConfigError("problem.mu: must be >= 0");
  if (!(noise_budget >= 0.0)) {
    throw ConfigError("problem.noise_budget: must be >= 0");
  }
}

CMatrix prox_row_group(const CMatrix& z, double tau) {
  CMatrix out = z;
  if (tau <= 0.0) return out;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double norm = out.row(r).norm();
    if (norm <= tau) {
      out.row(r).setZero();
    } else {
      out.row(r) *= 1.0 - tau / norm;
    }
  }
  return out;
}

namespace {

struct ThresholdedSvd {
  CMatrix value;
  double shrunk_nuclear_norm = 0.0;
};

ThresholdedSvd singular_value_threshold(const CMatrix& z, double tau) {
  ThresholdedSvd out;
  if (z.cols() <= 8 && z.rows() >= z.cols()) {
    // Tall, thin: eigendecompose the small Gram matrix Z^H Z = V S^2 V^H and
    // rescale, Z V diag(max(s - tau, 0) / s) V^H.
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(z.adjoint() * z);
    if (eig.info() != Eigen::Success) {
      throw NumericalError("prox_nuclear: eigendecomposition failed");
    }
    const Eigen::VectorXd s = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::VectorXcd gain(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      gain(i) = s(i) > tau ? (s(i) - tau) / s(i) : 0.0;
      out.shrunk_nuclear_norm += std::max(s(i) - tau, 0.0);
    }
    const CMatrix& v = eig.eigenvectors();
    out.value = (z * v) * gain.asDiagonal() * v.adjoint();
    return out;
  }
  Eigen::JacobiSVD<CMatrix> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("prox_nuclear: SVD failed");
  }
  Eigen::VectorXd shrunk =
      (svd.singularValues().array() - tau).max(0.0).matrix();
  out.shrunk_nuclear_norm = shrunk.sum();
  out.value = svd.matrixU() * shrunk.cast<cplx>().asDiagonal() *
              svd.matrixV().adjoint();
  return out;
}

}  // namespace

CMatrix prox_nuclear(const CMatrix& z, double tau) {
  if (z.size() == 0 || tau <= 0.0) return z;
  return singular_value_threshold(z, std::max(tau, 0.0)).value;
}

double row_group_norm(const CMatrix& z) {
  return z.rowwise().norm().sum();
}

double nuclear_norm(const CMatrix& z) {
  if (z.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(z);
  return svd.singularValues().sum();
}

double lifted_objective(const CMatrix& z, double mu) {
  double value = row_group_norm(z);
  if (mu > 0.0) value += mu * nuclear_norm(z);
  return value;
}

double residual_energy(const CMatrix& z, const LiftedProblem& problem) {
  double energy = 0.0;
  for (std::size_t ell = 0; ell < problem.num_subarrays(); ++ell) {
    const auto col = static_cast<Eigen::Index>(ell);
    energy += (problem.observations[ell] - problem.dictionaries[ell] * z.col(col))
                  .squaredNorm();
  }
  return energy;
}

namespace {

// Exact Euclidean projection onto C = { W : sum_l ||x_l - A_l w_l||^2 <= budget }.
//
// With the thin SVD A_l = U S V^H, d = U^H (x_l - A_l z_l), the KKT point
//   w(lambda) = (I + lambda A^H A)^{-1} (z + lambda A^H x)
//             = z + V diag(lambda s / (1 + lambda s^2)) d
// leaves the residual energy
//   e(lambda) = e_perp + sum_i |d_i|^2 / (1 + lambda s_i^2)^2,
// monotone decreasing in lambda, so a scalar root find on e(lambda) = budget
// gives the projection. The SVDs are computed once per problem.
class ResidualBallProjector {
 public:
  explicit ResidualBallProjector(const LiftedProblem& problem)
      : problem_(problem) {
    double s_max = 0.0;
    for (const CMatrix& a : problem.dictionaries) {
      Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
      if (svd.info() != Eigen::Success) {
        throw NumericalError("project_residual_ball: SVD failed");
      }
      blocks_.push_back({svd.matrixU(), svd.singularValues(), svd.matrixV()});
      if (svd.singularValues().size() > 0) {
        s_max = std::max(s_max, svd.singularValues()(0));
      }
    }
    s_max_ = s_max;
    rank_tol_ = s_max * std::numeric_limits<double>::epsilon() *
                static_cast<double>(std::max<std::size_t>(problem.grid_size(), 1));
  }

  CMatrix project(const CMatrix& z) const {
    const double budget = problem_.noise_budget;
    std::vector<CVector> d(blocks_.size());
    double e_perp = 0.0;
    double e_total = 0.0;
    for (std::size_t ell = 0; ell < blocks_.size(); ++ell) {
      const CVector residual =
          problem_.observations[ell] -
          problem_.dictionaries[ell] * z.col(static_cast<Eigen::Index>(ell));
      d[ell] = blocks_[ell].u.adjoint() * residual;
      const double e = residual.squaredNorm();
      e_total += e;
      e_perp += std::max(0.0, e - d[ell].squaredNorm());
    }
    if (e_total <= budget) return z;

    auto energy_at = [&](double lambda) {
      double e = e_perp;
      for (std::size_t ell = 0; ell < blocks_.size(); ++ell) {
        const Eigen::VectorXd& s = blocks_[ell].s;
        for (Eigen::Index i = 0; i < s.size(); ++i) {
          const double scale = 1.0 + lambda * s(i) * s(i);
          e += std::norm(d[ell](i)) / (scale * scale);
        }
      }
      return e;
    };
    auto apply = [&](auto gain) {
      CMatrix w = z;
      for (std::size_t ell = 0; ell < blocks_.size(); ++ell) {
        const Block& b = blocks_[ell];
        CVector coeff(b.s.size());
        for (Eigen::Index i = 0; i < b.s.size(); ++i) {
          coeff(i) = gain(b.s(i)) * d[ell](i);
        }
        w.col(static_cast<Eigen::Index>(ell)) += b.v * coeff;
      }
      return w;
    };

    double e_infinity = e_perp;
    for (std::size_t ell = 0; ell < blocks_.size(); ++ell) {
      for (Eigen::Index i = 0; i < blocks_[ell].s.size(); ++i) {
        if (blocks_[ell].s(i) <= rank_tol_) e_infinity += std::norm(d[ell](i));
      }
    }
    if (e_infinity >= budget) {
      // Empty or single-point set: minimum-residual correction.
      return apply([&](double s) { return s > rank_tol_ ? 1.0 / s : 0.0; });
    }

    double lo = 0.0;
    double hi = 1.0 / std::max(s_max_ * s_max_, std::numeric_limits<double>::min());
    while (energy_at(hi) > budget && std::isfinite(hi)) {
      lo = hi;
      hi *= 4.0;
    }
    for (int iter = 0; iter < 200 && hi - lo > 1e-14 * hi; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (energy_at(mid) > budget) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    const double lambda = hi;  // feasible side
    return apply([&](double s) { return lambda * s / (1.0 + lambda * s * s); });
  }

 private:
  struct Block {
    CMatrix u;
    Eigen::VectorXd s;
    CMatrix v;
  };
  const LiftedProblem& problem_;
  std::vector<Block> blocks_;
  double s_max_ = 0.0;
  double rank_tol_ = 0.0;
};

}  // namespace

CMatrix project_residual_ball(const CMatrix& z, const LiftedProblem& problem) {
  problem.validate();
  return ResidualBallProjector(problem).project(z);
}

namespace {

// Consensus ADMM: Z lives on the constraint set (exact projection), G carries
// the row-group term and W the nuclear term; G = Z and W = Z at a fixed point.
// Over-relaxed, with residual balancing of the penalty. The state is packed
// as [G | Ug | W | Uw] (just [G | Ug] when mu = 0).
class ProjectionAdmm {
 public:
  ProjectionAdmm(const LiftedProblem& problem, const SolverOptions& options)
      : problem_(problem),
        options_(options),
        projector_(problem),
        use_nuclear_(problem.mu > 0.0),
        n_(static_cast<Eigen::Index>(problem.grid_size())),
        l_(static_cast<Eigen::Index>(problem.num_subarrays())) {}

  LiftedSolution run() {
    LiftedSolution out;
    SolverDiagnostics& diag = out.diagnostics;
    diag.noise_budget = problem_.noise_budget;

    const Eigen::Index blocks = use_nuclear_ ? 4 : 2;
    CMatrix state = CMatrix::Zero(n_, blocks * l_);
    double rho = options_.penalty;
    std::vector<double> objective_history;

    Sweep current = sweep(state, rho);

    diag.status = SolveStatus::kNotConverged;
    int iteration = 0;
    for (iteration = 1; iteration <= options_.max_iterations; ++iteration) {
      diag.primal_residual = current.primal;
      diag.dual_residual = current.dual;
      objective_history.push_back(current.objective);
      if (current.primal <= current.eps_primal && current.dual <= current.eps_dual) {
        state = std::move(current.next);
        diag.status = SolveStatus::kConverged;
        break;
      }
      const auto window = static_cast<std::size_t>(options_.stagnation_window);
      if (current.objective > 0.0 && objective_history.size() > window) {
        const double past =
            objective_history[objective_history.size() - 1 - window];
        if (std::abs(current.objective - past) <
            options_.stagnation_tol * std::max(1.0, current.objective)) {
          state = std::move(current.next);
          diag.status = SolveStatus::kStagnated;
          break;
        }
      }

      if (options_.adapt_penalty && iteration % options_.balance_interval == 0) {
        double factor = 1.0;
        if (current.primal > options_.balance_ratio * current.dual) {
          factor = options_.penalty_factor;
        } else if (current.dual > options_.balance_ratio * current.primal) {
          factor = 1.0 / options_.penalty_factor;
        }
        if (factor != 1.0) {
          // Scaled duals follow the penalty.
          rho *= factor;
          state = std::move(current.next);
          for (Eigen::Index b = 1; b < blocks; b += 2) {
            state.middleCols(b * l_, l_) /= factor;
          }
          current = sweep(state, rho);
          continue;
        }
      }

      state = std::move(current.next);
      current = sweep(state, rho);
    }
    diag.iterations = std::min(iteration, options_.max_iterations);
    diag.final_penalty = rho;

    CMatrix result = state.leftCols(l_);
    double energy = residual_energy(result, problem_);
    if (energy > problem_.noise_budget * (1.0 + options_.feasibility_tol)) {
      result = projector_.project(result);
      energy = residual_energy(result, problem_);
    }
    // Empty ball: the iterates settle on the residual minimizer instead.
    if (energy > problem_.noise_budget * (1.0 + options_.feasibility_tol)) {
      diag.status = SolveStatus::kNotConverged;
    }
    diag.constraint_residual = energy;
    diag.objective = lifted_objective(result, problem_.mu);
    out.z_hat = std::move(result);
    return out;
  }

 private:
  struct Sweep {
    CMatrix next;
    double primal = 0.0;
    double dual = 0.0;
    double eps_primal = 0.0;
    double eps_dual = 0.0;
    double objective = 0.0;
  };

  Sweep sweep(const CMatrix& state, double rho) const {
    const double alpha = options_.relaxation;
    const auto g = state.leftCols(l_);
    const auto ug = state.middleCols(l_, l_);
    Sweep out;
    out.next.resize(state.rows(), state.cols());

    CMatrix z;
    if (use_nuclear_) {
      const auto w = state.middleCols(2 * l_, l_);
      const auto uw = state.middleCols(3 * l_, l_);
      z = projector_.project(0.5 * ((g - ug) + (w - uw)));
    } else {
      z = projector_.project(g - ug);
    }

    const CMatrix z_g = alpha * z + (1.0 - alpha) * g;
    out.next.leftCols(l_) = prox_row_group(z_g + ug, 1.0 / rho);
    out.next.middleCols(l_, l_) = ug + z_g - out.next.leftCols(l_);
    const auto g_new = out.next.leftCols(l_);
    double primal_sq = (z - g_new).squaredNorm();
    CMatrix dual_change = g_new - g;
    double nuclear_value = 0.0;
    double copies_norm_sq = g_new.squaredNorm();
    double duals_norm_sq = out.next.middleCols(l_, l_).squaredNorm();
    if (use_nuclear_) {
      const auto w = state.middleCols(2 * l_, l_);
      const auto uw = state.middleCols(3 * l_, l_);
      const CMatrix z_w = alpha * z + (1.0 - alpha) * w;
      ThresholdedSvd svt = singular_value_threshold(z_w + uw, problem_.mu / rho);
      nuclear_value = svt.shrunk_nuclear_norm;
      out.next.middleCols(2 * l_, l_) = svt.value;
      out.next.middleCols(3 * l_, l_) = uw + z_w - svt.value;
      const auto w_new = out.next.middleCols(2 * l_, l_);
      primal_sq += (z - w_new).squaredNorm();
      dual_change += w_new - w;
      copies_norm_sq += w_new.squaredNorm();
      duals_norm_sq += out.next.middleCols(3 * l_, l_).squaredNorm();
    }
    const double copies = use_nuclear_ ? 2.0 : 1.0;
    const double dim = static_cast<double>(n_ * l_);
    out.primal = std::sqrt(primal_sq);
    out.dual = rho * dual_change.norm();
    out.eps_primal = std::sqrt(copies * dim) * options_.abs_tol +
                     options_.primal_tol *
                         std::max(std::sqrt(copies) * z.norm(), std::sqrt(copies_norm_sq));
    out.eps_dual = std::sqrt(dim) * options_.abs_tol +
                   options_.dual_tol * rho * std::sqrt(duals_norm_sq);
    out.objective = row_group_norm(g_new) + problem_.mu * nuclear_value;
    return out;
  }

  const LiftedProblem& problem_;
  const SolverOptions& options_;
  ResidualBallProjector projector_;
  bool use_nuclear_;
  Eigen::Index n_;
  Eigen::Index l_;
};

}  // namespace

LiftedSolution solve_lifted(const LiftedProblem& problem,
                            const SolverOptions& options) {
  problem.validate();
  options.validate();

  double observed_energy = 0.0;
  for (const auto& x : problem.observations) observed_energy += x.squaredNorm();
  if (observed_energy <= problem.noise_budget) {
    LiftedSolution out;
    out.z_hat = CMatrix::Zero(static_cast<Eigen::Index>(problem.grid_size()),
                              static_cast<Eigen::Index>(problem.num_subarrays()));
    out.diagnostics.status = SolveStatus::kZeroFeasible;
    out.diagnostics.constraint_residual = observed_energy;
    out.diagnostics.noise_budget = problem.noise_budget;
    out.diagnostics.final_penalty = options.penalty;
    return out;
  }
  // The cone method needs a ball with an interior.
  if (problem.mu == 0.0 && options.sparse_solver == SparseSolver::kInteriorPoint &&
      internal::min_residual_energy(problem) < problem.noise_budget) {
    LiftedSolution out = internal::solve_sparse_interior_point(problem, options);
    SolverDiagnostics& diag = out.diagnostics;
    if (diag.constraint_residual >
        problem.noise_budget * (1.0 + options.feasibility_tol)) {
      out.z_hat = project_residual_ball(out.z_hat, problem);
      diag.constraint_residual = residual_energy(out.z_hat, problem);
      diag.objective = lifted_objective(out.z_hat, problem.mu);
    }
    return out;
  }
  return ProjectionAdmm(problem, options).run();
}

L1Solution solve_l1(const CMatrix& a, const CVector& x, double noise_budget,
                    const SolverOptions& options) {
  // With a single column, ||Z||_{1,2} is the complex L1 norm of s.
  const std::vector<CMatrix> dictionaries{a};
  const std::vector<CVector> observations{x};
  LiftedProblem problem{dictionaries, observations, 0.0, noise_budget};
  LiftedSolution lifted = solve_lifted(problem, options);
  return {lifted.z_hat.col(0), lifted.diagnostics};
}

}  // namespace ncdoa
