#include "ncdoa/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

#include <Eigen/SVD>

#include "ncdoa/errors.hpp"
#include "ncdoa/format.hpp"

namespace ncdoa {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kProposed1: return "Proposed1";
    case Method::kProposed2: return "Proposed2";
    case Method::kSparsityOnly: return "SparsityOnly";
    case Method::kMusic: return "MUSIC";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : kAllMethods) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected Proposed1, Proposed2, SparsityOnly or MUSIC)");
}

Rank1Factors rank1_factorize(const CMatrix& z_hat) {
  if (z_hat.size() == 0 || z_hat.cwiseAbs().maxCoeff() == 0.0) {
    throw DegenerateSolution("rank1_factorize: lifted solution is all zero");
  }
  Eigen::JacobiSVD<CMatrix> svd(z_hat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("rank1_factorize: SVD failed");
  }
  Rank1Factors f;
  f.singular_values = svd.singularValues();
  f.sigma1 = f.singular_values(0);
  f.left_vector = svd.matrixU().col(0);
  f.s_hat = f.sigma1 * f.left_vector;
  f.alpha_hat = svd.matrixV().col(0);
  const double total = f.singular_values.squaredNorm();
  f.energy_ratio = total > 0.0 ? f.sigma1 * f.sigma1 / total : 0.0;
  return f;
}

double wrap_phase(double radians) {
  double w = std::remainder(radians, 2.0 * kPi);  // [-pi, pi]
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

std::vector<double> center_phases(const std::vector<double>& phases) {
  cplx sum{0.0, 0.0};
  for (double p : phases) sum += std::polar(1.0, p);
  const double mean = std::abs(sum) > 0.0 ? std::arg(sum) : 0.0;
  std::vector<double> out(phases.size());
  for (std::size_t i = 0; i < phases.size(); ++i) {
    out[i] = wrap_phase(phases[i] - mean);
  }
  return out;
}

PhaseEstimate estimate_phases(const Rank1Factors& factors) {
  std::vector<double> raw(static_cast<std::size_t>(factors.alpha_hat.size()));
  for (Eigen::Index ell = 0; ell < factors.alpha_hat.size(); ++ell) {
    const cplx a = factors.alpha_hat(ell);
    if (std::abs(a) < 1e-12) {
      throw PhaseUndetermined(static_cast<std::size_t>(ell),
                              "estimate_phases: alpha_hat[" +
                                  std::to_string(ell) + "] vanished");
    }
    raw[static_cast<std::size_t>(ell)] = std::arg(a);
  }
  return {center_phases(raw)};
}

CVector phase_correct(const Snapshot& snapshot, const PhaseEstimate& phases) {
  if (phases.phases.size() != snapshot.num_subarrays()) {
    throw ConfigError("phase_correct: one phase per sub-array required");
  }
  CVector out = snapshot.stacked();
  Eigen::Index offset = 0;
  for (std::size_t ell = 0; ell < snapshot.num_subarrays(); ++ell) {
    const Eigen::Index m = snapshot.observations[ell].size();
    out.segment(offset, m) *= std::polar(1.0, phases.phases[ell]);
    offset += m;
  }
  return out;
}

namespace {

std::vector<Peak> local_maxima(const std::vector<double>& magnitudes,
                               const std::vector<double>& grid_degrees) {
  std::vector<Peak> peaks;
  const std::size_t n = magnitudes.size();
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && magnitudes[j + 1] == magnitudes[i]) ++j;
    const double value = magnitudes[i];
    const bool left_lower = i == 0 || magnitudes[i - 1] < value;
    const bool right_lower = j + 1 == n || magnitudes[j + 1] < value;
    if (value > 0.0 && left_lower && right_lower) {
      peaks.push_back({i, grid_degrees[i], value});
    }
    i = j + 1;
  }
  return peaks;
}

void sort_by_angle(std::vector<Peak>& peaks) {
  std::sort(peaks.begin(), peaks.end(),
            [](const Peak& a, const Peak& b) { return a.index < b.index; });
}

}  // namespace

PeakSelection pick_peaks(const std::vector<double>& magnitudes,
                         const std::vector<double>& grid_degrees,
                         std::size_t q) {
  if (q == 0) throw ConfigError("pick_peaks: q must be >= 1");
  if (magnitudes.size() != grid_degrees.size()) {
    throw ConfigError("pick_peaks: magnitudes and grid differ in length");
  }
  std::vector<Peak> peaks = local_maxima(magnitudes, grid_degrees);
  std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    return a.magnitude > b.magnitude;
  });
  PeakSelection out;
  out.shortfall = peaks.size() < q;
  if (peaks.size() > q) peaks.resize(q);
  sort_by_angle(peaks);
  out.peaks = std::move(peaks);
  return out;
}

PeakSelection pick_peaks_threshold(const std::vector<double>& magnitudes,
                                   const std::vector<double>& grid_degrees,
                                   double zeta) {
  if (magnitudes.size() != grid_degrees.size()) {
    throw ConfigError("pick_peaks: magnitudes and grid differ in length");
  }
  std::vector<Peak> peaks = local_maxima(magnitudes, grid_degrees);
  PeakSelection out;
  if (peaks.empty()) {
    out.shortfall = true;
    return out;
  }
  const double top = std::max_element(peaks.begin(), peaks.end(),
                                      [](const Peak& a, const Peak& b) {
                                        return a.magnitude < b.magnitude;
                                      })->magnitude;
  std::erase_if(peaks, [&](const Peak& p) { return p.magnitude < zeta * top; });
  out.peaks = std::move(peaks);
  return out;
}

PeakSelection select_peaks(const std::vector<double>& magnitudes,
                           const std::vector<double>& grid_degrees,
                           const PeakRule& rule) {
  if (const auto* top = std::get_if<TopQ>(&rule)) {
    return pick_peaks(magnitudes, grid_degrees, top->q);
  }
  return pick_peaks_threshold(magnitudes, grid_degrees,
                              std::get<RelativeThreshold>(rule).zeta);
}

std::vector<double> SpectrumEstimate::peak_angles() const {
  std::vector<double> out;
  out.reserve(peaks.size());
  for (const auto& p : peaks) out.push_back(p.angle);
  return out;
}

bool SpectrumEstimate::converged() const {
  return std::all_of(diagnostics.begin(), diagnostics.end(),
                     [](const SolverDiagnostics& d) { return d.converged(); });
}

void write_spectrum_csv(std::ostream& out, const SpectrumEstimate& spectrum) {
  out << "angle_deg,magnitude\n";
  for (std::size_t n = 0; n < spectrum.grid_degrees.size(); ++n) {
    out << format_double(spectrum.grid_degrees[n]) << ','
        << format_double(spectrum.magnitudes[n]) << '\n';
  }
}

namespace {

std::vector<double> magnitudes_of(const CVector& v) {
  std::vector<double> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out[static_cast<std::size_t>(i)] = std::abs(v(i));
  }
  return out;
}

SpectrumEstimate make_spectrum(Method method, const GridManifold& manifold,
                               std::vector<double> magnitudes,
                               const PeakRule& rule) {
  SpectrumEstimate spectrum;
  spectrum.method = method;
  spectrum.grid_degrees = manifold.grid_degrees;
  PeakSelection sel = select_peaks(magnitudes, manifold.grid_degrees, rule);
  spectrum.magnitudes = std::move(magnitudes);
  spectrum.peaks = std::move(sel.peaks);
  spectrum.shortfall = sel.shortfall;
  return spectrum;
}

}  // namespace

LiftedEstimate estimate_lifted(const Snapshot& snapshot,
                               const GridManifold& manifold, double mu,
                               double c, double noise_variance,
                               const SolverOptions& options) {
  const auto m = static_cast<double>(manifold.stacked.rows());
  LiftedProblem problem{manifold.per_subarray, snapshot.observations, mu,
                        c * m * noise_variance};
  LiftedEstimate out;
  out.solution = solve_lifted(problem, options);
  out.factors = rank1_factorize(out.solution.z_hat);
  return out;
}

SpectrumEstimate proposed1_from(const LiftedEstimate& lifted,
                                const GridManifold& manifold,
                                const PeakRule& rule) {
  SpectrumEstimate spectrum = make_spectrum(
      Method::kProposed1, manifold, magnitudes_of(lifted.factors.s_hat), rule);
  spectrum.diagnostics.push_back(lifted.solution.diagnostics);
  return spectrum;
}

SpectrumEstimate proposed2_from(const LiftedEstimate& lifted,
                                const Snapshot& snapshot,
                                const GridManifold& manifold,
                                const EstimatorSettings& settings,
                                Proposed2Detail* detail) {
  PhaseEstimate phases = estimate_phases(lifted.factors);
  CVector corrected = phase_correct(snapshot, phases);
  const auto m = static_cast<double>(manifold.stacked.rows());
  L1Solution l1 = solve_l1(manifold.stacked, corrected,
                           settings.c * m * settings.noise_variance,
                           settings.solver);
  SpectrumEstimate spectrum = make_spectrum(
      Method::kProposed2, manifold, magnitudes_of(l1.s_hat), settings.peaks);
  spectrum.diagnostics.push_back(lifted.solution.diagnostics);
  spectrum.diagnostics.push_back(l1.diagnostics);
  if (detail != nullptr) {
    detail->phases = std::move(phases);
    detail->corrected = std::move(corrected);
    detail->l1 = std::move(l1);
  }
  return spectrum;
}

SpectrumEstimate run_proposed1(const Snapshot& snapshot,
                               const GridManifold& manifold,
                               const EstimatorSettings& settings) {
  const LiftedEstimate lifted =
      estimate_lifted(snapshot, manifold, settings.mu, settings.c,
                      settings.noise_variance, settings.solver);
  return proposed1_from(lifted, manifold, settings.peaks);
}

SpectrumEstimate run_proposed2(const Snapshot& snapshot,
                               const GridManifold& manifold,
                               const EstimatorSettings& settings) {
  const LiftedEstimate lifted =
      estimate_lifted(snapshot, manifold, settings.mu, settings.c,
                      settings.noise_variance, settings.solver);
  return proposed2_from(lifted, snapshot, manifold, settings);
}

}  // namespace ncdoa
