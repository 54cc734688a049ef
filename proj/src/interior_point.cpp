#include "interior_point.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace ncdoa::internal {

double min_residual_energy(const LiftedProblem& problem) {
  double energy = 0.0;
  for (std::size_t ell = 0; ell < problem.num_subarrays(); ++ell) {
    const CMatrix& a = problem.dictionaries[ell];
    const CVector& x = problem.observations[ell];
    Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU);
    const Eigen::VectorXd& s = svd.singularValues();
    const double tol = (s.size() > 0 ? s(0) : 0.0) *
                       std::numeric_limits<double>::epsilon() *
                       static_cast<double>(std::max(a.rows(), a.cols()));
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > tol) ++rank;
    const auto u = svd.matrixU().leftCols(rank);
    energy += (x - u * (u.adjoint() * x)).squaredNorm();
  }
  return energy;
}

namespace {

using Eigen::Index;
using Eigen::Ref;
using Eigen::VectorXd;
using Eigen::MatrixXd;

// Second-order cone helpers. A cone vector is u = (u0, u1), u0 its first entry.

// sqrt(u0^2 - ||u1||^2), or 0 outside the interior.
double cone_norm(Ref<const VectorXd> u) {
  const double tail = u.tail(u.size() - 1).norm();
  const double det = (u(0) - tail) * (u(0) + tail);
  return u(0) > tail ? std::sqrt(det) : 0.0;
}

// u o v = (u^T v, u0 v1 + v0 u1)
void jordan_product(Ref<const VectorXd> u, Ref<const VectorXd> v, Ref<VectorXd> out) {
  const Index k = u.size() - 1;
  out(0) = u.dot(v);
  out.tail(k) = u(0) * v.tail(k) + v(0) * u.tail(k);
}

// q with u o q = r, u interior.
void jordan_divide(Ref<const VectorXd> u, Ref<const VectorXd> r, Ref<VectorXd> out) {
  const Index k = u.size() - 1;
  const double tail = u.tail(k).norm();
  const double det = (u(0) - tail) * (u(0) + tail);
  const double q0 = (u(0) * r(0) - u.tail(k).dot(r.tail(k))) / det;
  out.tail(k) = (r.tail(k) - q0 * u.tail(k)) / u(0);
  out(0) = q0;
}

// Largest alpha with u + alpha d in the cone, for u in the interior.
double max_step(Ref<const VectorXd> u, Ref<const VectorXd> d) {
  const Index k = u.size() - 1;
  // (u0 + a d0)^2 - ||u1 + a d1||^2 = qa a^2 + 2 qb a + qc
  const double qa = d(0) * d(0) - d.tail(k).squaredNorm();
  const double qb = u(0) * d(0) - u.tail(k).dot(d.tail(k));
  const double tail = u.tail(k).norm();
  const double qc = (u(0) - tail) * (u(0) + tail);
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](double root) {
    if (root > 0.0) best = std::min(best, root);
  };
  if (qa == 0.0) {
    if (qb < 0.0) consider(-qc / (2.0 * qb));
  } else {
    const double disc = qb * qb - qa * qc;
    if (disc >= 0.0) {
      const double q = -(qb + std::copysign(std::sqrt(disc), qb));
      if (q != 0.0) {
        consider(q / qa);
        consider(qc / q);
      }
    }
  }
  return std::max(0.0, best);
}

// Real variables: one cone (t_n, Re z_n1, Im z_n1, ..., Re z_nL, Im z_nL) per
// grid row, so x has N * (1 + 2L) entries. Constraints G x + s = h with
// s in N row cones (G = -I, h = 0) followed by the residual cone
// (sqrt(budget), y - P v), where y and P v stack real and imaginary parts
// of every sub-array.
class SocpSolver {
 public:
  SocpSolver(const LiftedProblem& problem, const SolverOptions& options)
      : problem_(problem),
        options_(options),
        n_(static_cast<Index>(problem.grid_size())),
        l_(static_cast<Index>(problem.num_subarrays())),
        d_(1 + 2 * l_) {
    Index offset = 0;
    for (const CVector& x : problem.observations) {
      block_offsets_.push_back(offset);
      offset += 2 * x.size();
    }
    m2_ = offset;
    nx_ = n_ * d_;
    ns_ = nx_ + 1 + m2_;

    h_ = VectorXd::Zero(ns_);
    h_(nx_) = std::sqrt(problem.noise_budget);
    for (Index ell = 0; ell < l_; ++ell) {
      const CVector& x = problem.observations[static_cast<std::size_t>(ell)];
      h_.segment(nx_ + 1 + block_offsets_[ell], x.size()) = x.real();
      h_.segment(nx_ + 1 + block_offsets_[ell] + x.size(), x.size()) = x.imag();
    }
    c_ = VectorXd::Zero(nx_);
    for (Index n = 0; n < n_; ++n) c_(n * d_) = 1.0;
    eta_.assign(static_cast<std::size_t>(n_ + 1), 1.0);
    w_.resize(ns_);
    lambda_.resize(ns_);
  }

  LiftedSolution run() {
    LiftedSolution out;
    SolverDiagnostics& diag = out.diagnostics;
    diag.noise_budget = problem_.noise_budget;
    diag.status = SolveStatus::kNotConverged;

    // Start: least-squares primal and least-norm dual under identity scaling,
    // shifted into the cones.
    w_ = identity();
    lambda_ = identity();
    if (!factor()) {
      diag.status = SolveStatus::kStagnated;
      out.z_hat = CMatrix::Zero(n_, l_);
      return out;
    }
    const VectorXd zero_s = VectorXd::Zero(ns_);
    const Direction primal = solve_kkt(VectorXd::Zero(nx_), -h_, zero_s);
    VectorXd x = primal.x;
    VectorXd s = primal.s;
    VectorXd z = solve_kkt(c_, zero_s, zero_s).z;
    shift_into_cones(s);
    shift_into_cones(z);
    if (!compute_scaling(s, z)) {
      diag.status = SolveStatus::kStagnated;
      out.z_hat = CMatrix::Zero(n_, l_);
      return out;
    }

    const double h_scale = std::max(1.0, h_.norm());
    const double c_scale = std::max(1.0, c_.norm());
    const double degree = static_cast<double>(n_ + 1);
    const double tol = options_.interior_point_tol;

    // Near the precision floor the gap stalls or jumps; keep the feasible
    // iterate with the smallest relative gap and stop once it stops improving.
    VectorXd best_x = x;
    double best_gap = std::numeric_limits<double>::infinity();
    int since_best = 0;
    constexpr int kPatience = 5;

    int iteration = 0;
    for (;; ++iteration) {
      const VectorXd rx = c_ + apply_gt(z);
      const VectorXd rz = apply_g(x) + s - h_;
      const double gap = s.dot(z);
      const double primal = rz.norm() / h_scale;
      const double dual = rx.norm() / c_scale;
      const double relative_gap = gap / std::max(1.0, std::abs(c_.dot(x)));
      if (!std::isfinite(best_gap)) {
        diag.primal_residual = primal;
        diag.dual_residual = dual;
      }
      if (primal <= tol && dual <= tol) {
        if (relative_gap < 0.9 * best_gap) since_best = 0;
        if (relative_gap < best_gap) {
          best_gap = relative_gap;
          best_x = x;
          diag.primal_residual = primal;
          diag.dual_residual = dual;
        }
        if (relative_gap <= tol) {
          diag.status = SolveStatus::kConverged;
          break;
        }
      }
      if (iteration >= options_.interior_point_max_iterations) break;
      if (++since_best > kPatience && std::isfinite(best_gap)) {
        diag.status = SolveStatus::kStagnated;
        break;
      }
      if (!factor()) {
        diag.status = SolveStatus::kStagnated;
        break;
      }

      VectorXd rs(ns_);
      for_each_cone([&](Index off, Index dim) {
        jordan_product(lambda_.segment(off, dim), lambda_.segment(off, dim),
                       rs.segment(off, dim));
      });
      rs = -rs;
      const Direction affine = solve_kkt(rx, rz, rs);
      const double alpha_affine =
          std::min({1.0, step_to_boundary(s, affine.s), step_to_boundary(z, affine.z)});
      const double sigma = std::pow(1.0 - alpha_affine, 3);

      const VectorXd ws = scale(affine.s, true);
      const VectorXd wz = scale(affine.z, false);
      VectorXd correction(ns_);
      for_each_cone([&](Index off, Index dim) {
        jordan_product(ws.segment(off, dim), wz.segment(off, dim),
                       correction.segment(off, dim));
        correction(off) -= sigma * gap / degree;
      });
      const Direction dir = solve_kkt(rx, rz, rs - correction);
      const double alpha =
          std::min(1.0, 0.99 * std::min(step_to_boundary(s, dir.s),
                                        step_to_boundary(z, dir.z)));
      if (!(alpha > std::numeric_limits<double>::epsilon())) {
        diag.status = SolveStatus::kStagnated;
        break;
      }
      x += alpha * dir.x;
      s += alpha * dir.s;
      z += alpha * dir.z;
      if (!update_scaling(lambda_ + alpha * scale(dir.s, true),
                          lambda_ + alpha * scale(dir.z, false))) {
        diag.status = SolveStatus::kStagnated;
        break;
      }
    }
    if (std::isfinite(best_gap)) x = best_x;
    diag.iterations = iteration;

    out.z_hat.resize(n_, l_);
    for (Index n = 0; n < n_; ++n) {
      for (Index ell = 0; ell < l_; ++ell) {
        out.z_hat(n, ell) = {x(n * d_ + 1 + 2 * ell), x(n * d_ + 2 + 2 * ell)};
      }
    }
    return out;
  }

 private:
  struct Direction {
    VectorXd x;
    VectorXd s;
    VectorXd z;
  };

  template <typename F>
  void for_each_cone(F&& f) const {
    for (Index k = 0; k < n_; ++k) f(k * d_, d_);
    f(nx_, 1 + m2_);
  }

  // Scaling index of the cone starting at `off`.
  std::size_t cone_index(Index off) const {
    return static_cast<std::size_t>(off == nx_ ? n_ : off / d_);
  }

  VectorXd identity() const {
    VectorXd e = VectorXd::Zero(ns_);
    for_each_cone([&](Index off, Index) { e(off) = 1.0; });
    return e;
  }

  void shift_into_cones(VectorXd& u) const {
    double worst = -std::numeric_limits<double>::infinity();
    for_each_cone([&](Index off, Index dim) {
      worst = std::max(worst, u.segment(off + 1, dim - 1).norm() - u(off));
    });
    if (worst >= -1e-8 * std::max(1.0, u.norm())) {
      for_each_cone([&](Index off, Index) { u(off) += 1.0 + worst; });
    }
  }

  double step_to_boundary(const VectorXd& u, const VectorXd& d) const {
    double alpha = std::numeric_limits<double>::infinity();
    for_each_cone([&](Index off, Index dim) {
      alpha = std::min(alpha, max_step(u.segment(off, dim), d.segment(off, dim)));
    });
    return alpha;
  }

  // Nesterov-Todd scaling point w and lambda = W z.
  bool compute_scaling(const VectorXd& s, const VectorXd& z) {
    bool ok = true;
    for_each_cone([&](Index off, Index dim) {
      const double s_norm = cone_norm(s.segment(off, dim));
      const double z_norm = cone_norm(z.segment(off, dim));
      if (!(s_norm > 0.0 && z_norm > 0.0)) {
        ok = false;
        return;
      }
      eta_[cone_index(off)] = std::sqrt(s_norm / z_norm);
      const VectorXd s_bar = s.segment(off, dim) / s_norm;
      const VectorXd z_bar = z.segment(off, dim) / z_norm;
      const double gamma = std::sqrt(0.5 * (1.0 + s_bar.dot(z_bar)));
      auto w = w_.segment(off, dim);
      w.tail(dim - 1) = (s_bar.tail(dim - 1) - z_bar.tail(dim - 1)) / (2.0 * gamma);
      w(0) = std::sqrt(1.0 + w.tail(dim - 1).squaredNorm());
    });
    if (!ok) return false;
    lambda_ = scale(z, false);
    return lambda_.allFinite();
  }

  // New scaling from the scaled iterates W^{-1} s and W z. Working in the
  // scaled space avoids the cancellation of computing it from s and z
  // directly once both approach the cone boundary.
  bool update_scaling(const VectorXd& s_scaled, const VectorXd& z_scaled) {
    bool ok = true;
    for_each_cone([&](Index off, Index dim) {
      const double s_norm = cone_norm(s_scaled.segment(off, dim));
      const double z_norm = cone_norm(z_scaled.segment(off, dim));
      if (!(s_norm > 0.0 && z_norm > 0.0)) {
        ok = false;
        return;
      }
      const auto s_hat = s_scaled.segment(off, dim) / s_norm;
      const auto z_hat = z_scaled.segment(off, dim) / z_norm;
      const double gamma = std::sqrt(0.5 * (1.0 + s_hat.dot(z_hat)));
      // Wbar(w) = 2 r r^T - J with r = (w + e) / sqrt(2 (w0 + 1)). The new
      // point is Wbar(w) q, q = (s_hat + J z_hat) / (2 gamma), and lambda
      // is expressed in the new (not the composed) frame.
      auto w = w_.segment(off, dim);
      VectorXd r = w;
      r(0) += 1.0;
      r /= std::sqrt(2.0 * r(0));
      const double rs = r.dot(s_hat);
      const double rz = r(0) * z_hat(0) - r.tail(dim - 1).dot(z_hat.tail(dim - 1));
      const double rq = (rs + rz) / (2.0 * gamma);
      const double ru = rs - rz;
      const double w0_new = 2.0 * r(0) * rq - (s_hat(0) + z_hat(0)) / (2.0 * gamma);
      const double d = (r(0) * ru - 0.5 * s_hat(0) + 0.5 * z_hat(0)) / (w0_new + 1.0);
      auto lam = lambda_.segment(off, dim);
      lam(0) = gamma;
      lam.tail(dim - 1) = 2.0 * (-d * rq + 0.5 * ru) * r.tail(dim - 1) +
                          0.5 * (1.0 - d / gamma) * s_hat.tail(dim - 1) +
                          0.5 * (1.0 + d / gamma) * z_hat.tail(dim - 1);
      lam *= std::sqrt(s_norm * z_norm);
      w.tail(dim - 1) = 2.0 * rq * r.tail(dim - 1) +
                        (s_hat.tail(dim - 1) - z_hat.tail(dim - 1)) / (2.0 * gamma);
      w(0) = std::sqrt(1.0 + w.tail(dim - 1).squaredNorm());
      eta_[cone_index(off)] *= std::sqrt(s_norm / z_norm);
    });
    return ok && lambda_.allFinite();
  }

  // W u (or W^{-1} u) with W = eta [w0 w1^T; w1 I + w1 w1^T / (1 + w0)].
  VectorXd scale(const VectorXd& u, bool inverse) const {
    VectorXd out(u.size());
    for_each_cone([&](Index off, Index dim) {
      const auto w = w_.segment(off, dim);
      const auto v = u.segment(off, dim);
      const double eta = eta_[cone_index(off)];
      const double w1v1 = w.tail(dim - 1).dot(v.tail(dim - 1));
      auto o = out.segment(off, dim);
      if (inverse) {
        o(0) = (w(0) * v(0) - w1v1) / eta;
        o.tail(dim - 1) =
            (v.tail(dim - 1) - (v(0) - w1v1 / (1.0 + w(0))) * w.tail(dim - 1)) / eta;
      } else {
        o(0) = eta * (w(0) * v(0) + w1v1);
        o.tail(dim - 1) =
            eta * (v.tail(dim - 1) + (v(0) + w1v1 / (1.0 + w(0))) * w.tail(dim - 1));
      }
    });
    return out;
  }

  // P v: row cones of x to stacked real/imaginary sub-array predictions.
  VectorXd apply_p(const VectorXd& x) const {
    VectorXd out(m2_);
    CVector z(n_);
    for (Index ell = 0; ell < l_; ++ell) {
      for (Index n = 0; n < n_; ++n) {
        z(n) = {x(n * d_ + 1 + 2 * ell), x(n * d_ + 2 + 2 * ell)};
      }
      const CVector u = problem_.dictionaries[static_cast<std::size_t>(ell)] * z;
      out.segment(block_offsets_[ell], u.size()) = u.real();
      out.segment(block_offsets_[ell] + u.size(), u.size()) = u.imag();
    }
    return out;
  }

  // x += P^T r
  void add_pt(Ref<const VectorXd> r, VectorXd& x) const {
    for (Index ell = 0; ell < l_; ++ell) {
      const CMatrix& a = problem_.dictionaries[static_cast<std::size_t>(ell)];
      const Index m = a.rows();
      CVector rc(m);
      rc.real() = r.segment(block_offsets_[ell], m);
      rc.imag() = r.segment(block_offsets_[ell] + m, m);
      const CVector g = a.adjoint() * rc;
      for (Index n = 0; n < n_; ++n) {
        x(n * d_ + 1 + 2 * ell) += g(n).real();
        x(n * d_ + 2 + 2 * ell) += g(n).imag();
      }
    }
  }

  VectorXd apply_g(const VectorXd& x) const {
    VectorXd out(ns_);
    out.head(nx_) = -x;
    out(nx_) = 0.0;
    out.tail(m2_) = apply_p(x);
    return out;
  }

  VectorXd apply_gt(const VectorXd& z) const {
    VectorXd out = -z.head(nx_);
    add_pt(z.tail(m2_), out);
    return out;
  }

  // Newton system
  //   G^T dz = -rx,  G dx + ds = -rz,  lambda o (W dz + W^{-1} ds) = rs.
  // G is -I on the row cones, so each row cone's dx, ds and dz follow from
  // the residual-cone dual dz_b alone:
  //   dz_n = rx_n + P_n^T dz_b1,  ds_n = W_n q_n - W_n^2 dz_n,  dx_n = ds_n + rz_n
  // with q = lambda \ rs. What remains is a (1 + 2M) system in dz_b,
  //   (W_b^2 + diag(0, sum_n P_n [W_n^2]_vv P_n^T)) dz_b = rz_b + W_b q_b + G_b a,
  // a = W q - W^2 rx + rz on the row cones. Only W^2 appears, never its
  // inverse, so the zero rows (whose W_n^{-2} grows like 1 / mu) stay harmless.
  bool factor() {
    MatrixXd m = MatrixXd::Zero(m2_ + 1, m2_ + 1);
    auto k = m.bottomRightCorner(m2_, m2_);
    Eigen::VectorXd eta_sq(n_);
    for (Index n = 0; n < n_; ++n) {
      eta_sq(n) = eta_[static_cast<std::size_t>(n)] * eta_[static_cast<std::size_t>(n)];
    }
    // [W_n^2]_vv = eta_n^2 (I + 2 w_n1 w_n1^T)
    MatrixXd q(m2_, n_);
    for (Index ell = 0; ell < l_; ++ell) {
      const CMatrix& a = problem_.dictionaries[static_cast<std::size_t>(ell)];
      const Index rows = a.rows();
      const Index off = block_offsets_[ell];
      const CMatrix b = a * eta_sq.asDiagonal() * a.adjoint();
      k.block(off, off, rows, rows) = b.real();
      k.block(off + rows, off + rows, rows, rows) = b.real();
      k.block(off + rows, off, rows, rows) = b.imag();
      k.block(off, off + rows, rows, rows) = -b.imag();
      CVector gains(n_);
      for (Index n = 0; n < n_; ++n) {
        gains(n) = std::sqrt(2.0 * eta_sq(n)) *
                   std::complex<double>(w_(n * d_ + 1 + 2 * ell), w_(n * d_ + 2 + 2 * ell));
      }
      const CMatrix scaled = a * gains.asDiagonal();
      q.middleRows(off, rows) = scaled.real();
      q.middleRows(off + rows, rows) = scaled.imag();
    }
    k.selfadjointView<Eigen::Lower>().rankUpdate(q);
    // W_b^2 = eta_b^2 (2 w_b w_b^T - J)
    const double eta_b_sq = eta_.back() * eta_.back();
    const auto w_b = w_.tail(m2_ + 1);
    m.selfadjointView<Eigen::Lower>().rankUpdate(w_b, 2.0 * eta_b_sq);
    m(0, 0) -= eta_b_sq;
    m.diagonal().tail(m2_).array() += eta_b_sq;
    m_factor_.compute(m);
    return m_factor_.info() == Eigen::Success;
  }

  // W^2 u, cone by cone.
  VectorXd scale_sq(const VectorXd& u) const { return scale(scale(u, false), false); }

  // The two linear equations hold by construction, so refinement only has to
  // chase the complementarity residual.
  Direction solve_kkt(const VectorXd& rx, const VectorXd& rz, const VectorXd& rs) const {
    Direction d = solve_kkt_once(rx, rz, rs);
    const VectorXd zero_x = VectorXd::Zero(nx_);
    const VectorXd zero_s = VectorXd::Zero(ns_);
    for (int pass = 0; pass < kRefinementPasses; ++pass) {
      const VectorXd linear = scale(d.z, false) + scale(d.s, true);
      VectorXd residual(ns_);
      for_each_cone([&](Index off, Index dim) {
        jordan_product(lambda_.segment(off, dim), linear.segment(off, dim),
                       residual.segment(off, dim));
      });
      residual = rs - residual;
      if (residual.norm() <= kRefinementTol * rs.norm()) break;
      const Direction correction = solve_kkt_once(zero_x, zero_s, residual);
      d.x += correction.x;
      d.s += correction.s;
      d.z += correction.z;
    }
    return d;
  }

  Direction solve_kkt_once(const VectorXd& rx, const VectorXd& rz, const VectorXd& rs) const {
    VectorXd q(ns_);
    for_each_cone([&](Index off, Index dim) {
      jordan_divide(lambda_.segment(off, dim), rs.segment(off, dim), q.segment(off, dim));
    });
    const VectorXd wq = scale(q, false);

    VectorXd padded = VectorXd::Zero(ns_);
    padded.head(nx_) = rx;
    const VectorXd a = wq.head(nx_) - scale_sq(padded).head(nx_) + rz.head(nx_);
    VectorXd rhs = rz.tail(m2_ + 1) + wq.tail(m2_ + 1);
    rhs.tail(m2_) += apply_p(a);

    Direction d;
    d.z.resize(ns_);
    d.z.tail(m2_ + 1) = m_factor_.solve(rhs);
    d.z.head(nx_) = rx;
    add_pt(d.z.tail(m2_), d.z);
    padded.head(nx_) = d.z.head(nx_);
    d.s.resize(ns_);
    d.s.head(nx_) = wq.head(nx_) - scale_sq(padded).head(nx_);
    d.x = d.s.head(nx_) + rz.head(nx_);
    // Residual-cone slack from the primal equation, so that residuals shrink
    // exactly by (1 - alpha).
    d.s.tail(m2_ + 1) = -rz.tail(m2_ + 1) - apply_g(d.x).tail(m2_ + 1);
    return d;
  }

  static constexpr int kRefinementPasses = 2;
  static constexpr double kRefinementTol = 1e-12;

  const LiftedProblem& problem_;
  const SolverOptions& options_;
  Index n_;
  Index l_;
  Index d_;
  Index m2_ = 0;
  Index nx_ = 0;
  Index ns_ = 0;
  std::vector<Index> block_offsets_;
  VectorXd h_;
  VectorXd c_;
  std::vector<double> eta_;
  VectorXd w_;
  VectorXd lambda_;
  Eigen::LLT<MatrixXd> m_factor_;
};

}  // namespace

LiftedSolution solve_sparse_interior_point(const LiftedProblem& problem,
                                           const SolverOptions& options) {
  LiftedSolution out = SocpSolver(problem, options).run();
  out.diagnostics.constraint_residual = residual_energy(out.z_hat, problem);
  out.diagnostics.objective = row_group_norm(out.z_hat);
  return out;
}

}  // namespace ncdoa::internal
