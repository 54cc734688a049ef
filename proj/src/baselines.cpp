#include "ncdoa/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "ncdoa/errors.hpp"

namespace ncdoa {

SpectrumEstimate run_sparsity_only(const Snapshot& snapshot,
                                   const GridManifold& manifold,
                                   const EstimatorSettings& settings) {
  const LiftedEstimate lifted = estimate_lifted(
      snapshot, manifold, 0.0, settings.c, settings.noise_variance,
      settings.solver);
  const CVector& u = lifted.factors.left_vector;
  std::vector<double> magnitudes(static_cast<std::size_t>(u.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    magnitudes[static_cast<std::size_t>(i)] = std::abs(u(i));
  }
  SpectrumEstimate spectrum;
  spectrum.method = Method::kSparsityOnly;
  spectrum.grid_degrees = manifold.grid_degrees;
  PeakSelection sel =
      select_peaks(magnitudes, manifold.grid_degrees, settings.peaks);
  spectrum.magnitudes = std::move(magnitudes);
  spectrum.peaks = std::move(sel.peaks);
  spectrum.shortfall = sel.shortfall;
  spectrum.diagnostics.push_back(lifted.solution.diagnostics);
  return spectrum;
}

void MusicOptions::validate(const ArrayGeometry& geometry) const {
  std::size_t min_size = geometry.subarray(0).size;
  for (const auto& r : geometry.partition()) min_size = std::min(min_size, r.size);
  if (smoothing_length < 1 || smoothing_length > min_size) {
    throw ConfigError("music.smoothing_length: must lie in [1, " +
                      std::to_string(min_size) + "]");
  }
  if (q < 1 || q >= smoothing_length) {
    throw ConfigError("music.q: need 1 <= q < smoothing_length (" +
                      std::to_string(smoothing_length) + ")");
  }
}

namespace {

// Inter-element spacing of the common ULA layout; throws if there is none.
double common_ula_spacing(const ArrayGeometry& geometry) {
  if (!geometry.is_omnidirectional()) {
    throw UnsupportedGeometry("MUSIC: element patterns must be omnidirectional");
  }
  const auto first = geometry.subarray_elements(0);
  const double spacing = first.size() > 1 ? first[1].x - first[0].x : 0.0;
  const double tol = 1e-9 * std::max(1.0, std::abs(spacing));
  for (std::size_t ell = 0; ell < geometry.num_subarrays(); ++ell) {
    const auto elems = geometry.subarray_elements(ell);
    if (elems.size() != first.size()) {
      throw UnsupportedGeometry("MUSIC: sub-arrays differ in size");
    }
    for (std::size_t i = 0; i < elems.size(); ++i) {
      const double dx = (elems[i].x - elems[0].x) - (first[i].x - first[0].x);
      const double expected = static_cast<double>(i) * spacing;
      if (std::abs(dx) > tol || std::abs(elems[i].y - elems[0].y) > tol ||
          std::abs((elems[i].x - elems[0].x) - expected) > tol) {
        throw UnsupportedGeometry(
            "MUSIC: sub-arrays must be identical uniform linear arrays");
      }
    }
  }
  return spacing;
}

// Rounds every entry to a multiple of 2^(e - 40), where 2^e bounds the trace.
// Unit-modulus factors on a whole sub-array cancel in x x^H only up to
// rounding; snapping removes those last-bit differences so the spectrum is
// reproducible bit for bit.
CMatrix snap_to_grid(const CMatrix& r) {
  const double trace = r.diagonal().real().sum();
  if (!(trace > 0.0)) return r;
  int exponent = 0;
  std::frexp(trace, &exponent);
  const double quantum = std::ldexp(1.0, exponent - 40);
  return r.unaryExpr([quantum](const cplx& v) {
    return cplx(std::nearbyint(v.real() / quantum) * quantum,
                std::nearbyint(v.imag() / quantum) * quantum);
  });
}

}  // namespace

CMatrix smoothed_covariance(const Snapshot& snapshot,
                            const ArrayGeometry& geometry,
                            const MusicOptions& options) {
  common_ula_spacing(geometry);
  options.validate(geometry);
  const auto len = static_cast<Eigen::Index>(options.smoothing_length);
  CMatrix forward = CMatrix::Zero(len, len);
  std::size_t terms = 0;
  for (const CVector& x : snapshot.observations) {
    for (Eigen::Index start = 0; start + len <= x.size(); ++start) {
      const auto y = x.segment(start, len);
      forward.noalias() += y * y.adjoint();
      ++terms;
    }
  }
  forward /= static_cast<double>(terms);
  if (!options.forward_backward) return forward;
  // J R^* J with J the exchange matrix.
  const CMatrix backward =
      forward.conjugate().colwise().reverse().rowwise().reverse();
  return 0.5 * (forward + backward);
}

SpectrumEstimate run_music(const Snapshot& snapshot,
                           const ArrayGeometry& geometry,
                           const std::vector<double>& grid_degrees,
                           const MusicOptions& options) {
  const double spacing = common_ula_spacing(geometry);
  const CMatrix covariance =
      snap_to_grid(smoothed_covariance(snapshot, geometry, options));
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(covariance);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("MUSIC: eigendecomposition failed");
  }
  // Eigenvalues come back ascending: the noise subspace is the leading
  // (smoothing_length - q) columns.
  const auto len = static_cast<Eigen::Index>(options.smoothing_length);
  const auto noise_dim = len - static_cast<Eigen::Index>(options.q);
  const CMatrix noise = eig.eigenvectors().leftCols(noise_dim);

  SpectrumEstimate spectrum;
  spectrum.method = Method::kMusic;
  spectrum.grid_degrees = grid_degrees;
  spectrum.magnitudes.resize(grid_degrees.size());
  CVector a(len);
  for (std::size_t n = 0; n < grid_degrees.size(); ++n) {
    const double s = std::sin(deg_to_rad(grid_degrees[n]));
    for (Eigen::Index i = 0; i < len; ++i) {
      a(i) = std::polar(1.0, 2.0 * kPi * spacing * static_cast<double>(i) * s);
    }
    const double leakage = (noise.adjoint() * a).squaredNorm();
    spectrum.magnitudes[n] = 1.0 / std::max(leakage, 1e-12);
  }
  PeakSelection sel = pick_peaks(spectrum.magnitudes, grid_degrees, options.q);
  spectrum.peaks = std::move(sel.peaks);
  spectrum.shortfall = sel.shortfall;
  return spectrum;
}

}  // namespace ncdoa
