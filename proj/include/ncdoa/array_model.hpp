#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace ncdoa {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Element location in wavelengths, i.e. (x/lambda, y/lambda).
struct Position {
  double x = 0.0;
  double y = 0.0;
};

// Element gain as a function of the arrival angle in radians. An empty
// function means an omnidirectional element (g == 1).
using ElementPattern = std::function<double(double)>;

// Half-open index range [begin, begin + size) into the element list.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t size = 0;
  std::size_t end() const { return begin + size; }
};

// Element positions, gain patterns and the partition of the elements into L
// contiguous, mutually non-coherent sub-arrays.
class ArrayGeometry {
 public:
  // Throws ConfigError if the partition does not cover every element exactly
  // once or if any block is empty.
  ArrayGeometry(std::vector<Position> elements,
                std::vector<std::size_t> partition_sizes,
                std::vector<ElementPattern> patterns = {});

  std::size_t num_elements() const { return elements_.size(); }
  std::size_t num_subarrays() const { return ranges_.size(); }

  // Throws std::out_of_range for ell >= num_subarrays().
  IndexRange subarray(std::size_t ell) const;
  std::span<const Position> subarray_elements(std::size_t ell) const;

  std::span<const Position> elements() const { return elements_; }
  std::span<const IndexRange> partition() const { return ranges_; }

  double gain(std::size_t element, double theta_rad) const;
  bool is_omnidirectional() const;

 private:
  std::vector<Position> elements_;
  std::vector<IndexRange> ranges_;
  std::vector<ElementPattern> patterns_;
};

// Uniform linear array along x, centred on the origin, omnidirectional.
ArrayGeometry make_ula(std::size_t num_elements, double spacing_wavelengths,
                       const std::vector<std::size_t>& partition_sizes);

// Response of sub-array `ell` to a plane wave from `theta_deg` (measured
// from boresight):
//   a[i] = g_i(theta) * exp(j 2 pi (x_i sin(theta) + y_i cos(theta))).
CVector steering_vector(const ArrayGeometry& geometry, std::size_t ell,
                        double theta_deg);

// Inclusive uniform grid. The count is rounded so that `stop` is hit exactly
// when (stop - start) is a multiple of `step`.
std::vector<double> make_uniform_grid(double start_deg, double stop_deg,
                                      double step_deg);

struct GridManifold {
  std::vector<double> grid_degrees;
  std::vector<CMatrix> per_subarray;  // M_l x N_theta each
  CMatrix stacked;                    // M x N_theta

  std::size_t grid_size() const { return grid_degrees.size(); }
  std::size_t num_subarrays() const { return per_subarray.size(); }
};

GridManifold build_grid_manifold(const ArrayGeometry& geometry,
                                 const std::vector<double>& grid_degrees);

struct RandomPhases {};
using PhaseMode = std::variant<RandomPhases, std::vector<double>>;

struct Scenario {
  ArrayGeometry geometry;
  std::vector<double> source_doas;    // degrees
  std::vector<double> source_powers;  // one per source
  double snr_db = 20.0;
  PhaseMode phase_mode = RandomPhases{};
  // Overrides the SNR-derived noise variance (e.g. 0 for noiseless runs).
  std::optional<double> noise_variance_override;
  // Pins the source amplitudes instead of drawing them.
  std::optional<std::vector<cplx>> fixed_amplitudes;

  // sigma^2 = mean source power / 10^(snr_db / 10). With unit powers this is
  // the per-source SNR convention E|s_q|^2 / sigma^2.
  double noise_variance() const;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Ground truth kept alongside a generated snapshot for evaluation only.
struct SnapshotTruth {
  std::vector<cplx> amplitudes;
  std::vector<double> phases;  // radians, phi_l in x_l = e^{-j phi_l} A_l s + n_l
  std::vector<double> doas;    // degrees
  double noise_variance = 0.0;
};

struct Snapshot {
  std::vector<CVector> observations;  // one per sub-array
  std::optional<SnapshotTruth> truth;

  std::size_t num_subarrays() const { return observations.size(); }
  CVector stacked() const;
};

// Deterministic given (scenario, seed). Signal, phase and noise draws come
// from independent sub-streams of the seed.
Snapshot generate_snapshot(const Scenario& scenario, std::uint64_t seed);

// Stateless 64-bit mixer used for all seed derivation.
std::uint64_t mix_seed(std::uint64_t value);

}  // namespace ncdoa
