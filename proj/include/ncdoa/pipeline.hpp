#pragma once

#include <iosfwd>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "ncdoa/array_model.hpp"
#include "ncdoa/solver.hpp"

namespace ncdoa {

enum class Method { kProposed1, kProposed2, kSparsityOnly, kMusic };

std::string_view to_string(Method method);
// Throws ConfigError for unknown names.
Method parse_method(std::string_view name);
inline constexpr Method kAllMethods[] = {Method::kProposed1, Method::kProposed2,
                                         Method::kSparsityOnly, Method::kMusic};

// Leading singular triplet of a lifted solution: Z ~ s_hat alpha_hat^H.
struct Rank1Factors {
  CVector s_hat;      // sigma1 * U[:, 0]
  CVector alpha_hat;  // V[:, 0], unit norm
  double sigma1 = 0.0;
  double energy_ratio = 0.0;  // sigma1^2 / sum sigma_i^2
  Eigen::VectorXd singular_values;
  CVector left_vector;  // U[:, 0]
};

// Throws DegenerateSolution for an all-zero matrix.
Rank1Factors rank1_factorize(const CMatrix& z_hat);

// Per-sub-array phases in (-pi, pi], centred on their circular mean.
struct PhaseEstimate {
  std::vector<double> phases;
};

// phi_l = arg(alpha_hat[l]), then centred. Throws PhaseUndetermined when
// |alpha_hat[l]| < 1e-12.
PhaseEstimate estimate_phases(const Rank1Factors& factors);

// Removes the circular mean of `phases` and wraps into (-pi, pi]. When the
// phasors sum to zero the circular mean is taken as 0.
std::vector<double> center_phases(const std::vector<double>& phases);

double wrap_phase(double radians);

// Stacks e^{j phi_l} x_l over all sub-arrays.
CVector phase_correct(const Snapshot& snapshot, const PhaseEstimate& phases);

struct Peak {
  std::size_t index = 0;
  double angle = 0.0;
  double magnitude = 0.0;
};

struct PeakSelection {
  std::vector<Peak> peaks;  // sorted by angle
  bool shortfall = false;   // fewer local maxima than requested
};

// Local maxima (plateaus count once, at their first bin; edge bins compare
// against their single neighbour; zero-magnitude bins never qualify). The q
// largest are returned, ties broken by lower index, then sorted by angle.
PeakSelection pick_peaks(const std::vector<double>& magnitudes,
                         const std::vector<double>& grid_degrees,
                         std::size_t q);

// All local maxima with magnitude >= zeta * max, sorted by angle. Used when
// the number of sources is unknown.
PeakSelection pick_peaks_threshold(const std::vector<double>& magnitudes,
                                   const std::vector<double>& grid_degrees,
                                   double zeta = 0.3);

struct TopQ {
  std::size_t q = 1;
};
struct RelativeThreshold {
  double zeta = 0.3;
};
using PeakRule = std::variant<TopQ, RelativeThreshold>;

PeakSelection select_peaks(const std::vector<double>& magnitudes,
                           const std::vector<double>& grid_degrees,
                           const PeakRule& rule);

struct SpectrumEstimate {
  std::vector<double> grid_degrees;
  std::vector<double> magnitudes;
  std::vector<Peak> peaks;
  bool shortfall = false;
  Method method = Method::kProposed1;
  std::vector<SolverDiagnostics> diagnostics;  // one per convex solve

  std::vector<double> peak_angles() const;
  bool converged() const;
};

// CSV with header "angle_deg,magnitude", full round-trip precision.
void write_spectrum_csv(std::ostream& out, const SpectrumEstimate& spectrum);

struct EstimatorSettings {
  double mu = 1.0;
  double c = 2.0;               // noise budget factor: C * M * sigma^2
  double noise_variance = 0.0;  // sigma^2
  PeakRule peaks = TopQ{1};
  SolverOptions solver;
};

// Lifted solve plus its rank-1 factors; shared by both proposed estimators.
struct LiftedEstimate {
  LiftedSolution solution;
  Rank1Factors factors;
};

LiftedEstimate estimate_lifted(const Snapshot& snapshot,
                               const GridManifold& manifold, double mu,
                               double c, double noise_variance,
                               const SolverOptions& options);

SpectrumEstimate proposed1_from(const LiftedEstimate& lifted,
                                const GridManifold& manifold,
                                const PeakRule& rule);

struct Proposed2Detail {
  PhaseEstimate phases;
  CVector corrected;
  L1Solution l1;
};

SpectrumEstimate proposed2_from(const LiftedEstimate& lifted,
                                const Snapshot& snapshot,
                                const GridManifold& manifold,
                                const EstimatorSettings& settings,
                                Proposed2Detail* detail = nullptr);

SpectrumEstimate run_proposed1(const Snapshot& snapshot,
                               const GridManifold& manifold,
                               const EstimatorSettings& settings);

SpectrumEstimate run_proposed2(const Snapshot& snapshot,
                               const GridManifold& manifold,
                               const EstimatorSettings& settings);

}  // namespace ncdoa
