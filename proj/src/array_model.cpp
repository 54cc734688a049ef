#include "ncdoa/array_model.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "ncdoa/errors.hpp"

namespace ncdoa {

ArrayGeometry::ArrayGeometry(std::vector<Position> elements,
                             std::vector<std::size_t> partition_sizes,
                             std::vector<ElementPattern> patterns)
    : elements_(std::move(elements)), patterns_(std::move(patterns)) {
  if (elements_.empty()) {
    throw ConfigError("geometry: array must have at least one element");
  }
  if (partition_sizes.empty()) {
    throw ConfigError("geometry.partition: at least one sub-array required");
  }
  std::size_t begin = 0;
  for (std::size_t size : partition_sizes) {
    if (size == 0) {
      throw ConfigError("geometry.partition: sub-array sizes must be >= 1");
    }
    ranges_.push_back({begin, size});
    begin += size;
  }
  if (begin != elements_.size()) {
    throw ConfigError("geometry.partition: sizes sum to " +
                      std::to_string(begin) + " but the array has " +
                      std::to_string(elements_.size()) + " elements");
  }
  if (!patterns_.empty() && patterns_.size() != elements_.size()) {
    throw ConfigError("geometry.patterns: expected one pattern per element");
  }
}

IndexRange ArrayGeometry::subarray(std::size_t ell) const {
  if (ell >= ranges_.size()) {
    throw std::out_of_range("sub-array index " + std::to_string(ell) +
                            " out of range (L = " +
                            std::to_string(ranges_.size()) + ")");
  }
  return ranges_[ell];
}

std::span<const Position> ArrayGeometry::subarray_elements(
    std::size_t ell) const {
  const IndexRange r = subarray(ell);
  return std::span<const Position>(elements_).subspan(r.begin, r.size);
}

double ArrayGeometry::gain(std::size_t element, double theta_rad) const {
  if (patterns_.empty() || !patterns_[element]) return 1.0;
  return patterns_[element](theta_rad);
}

bool ArrayGeometry::is_omnidirectional() const {
  for (const auto& p : patterns_) {
    if (p) return false;
  }
  return true;
}

ArrayGeometry make_ula(std::size_t num_elements, double spacing_wavelengths,
                       const std::vector<std::size_t>& partition_sizes) {
  if (!(spacing_wavelengths > 0.0)) {
    throw ConfigError("geometry.spacing_wavelengths: must be > 0");
  }
  const std::size_t total =
      std::accumulate(partition_sizes.begin(), partition_sizes.end(),
                      std::size_t{0});
  if (total != num_elements) {
    throw ConfigError("geometry.partition: sizes sum to " +
                      std::to_string(total) + ", expected num_elements = " +
                      std::to_string(num_elements));
  }
  std::vector<Position> positions(num_elements);
  const double centre = 0.5 * static_cast<double>(num_elements - 1);
  for (std::size_t i = 0; i < num_elements; ++i) {
    positions[i].x = (static_cast<double>(i) - centre) * spacing_wavelengths;
  }
  return ArrayGeometry(std::move(positions), partition_sizes);
}

CVector steering_vector(const ArrayGeometry& geometry, std::size_t ell,
                        double theta_deg) {
  if (!(theta_deg > -90.0 && theta_deg < 90.0)) {
    throw std::invalid_argument("steering_vector: theta must lie in (-90, 90)");
  }
  const IndexRange range = geometry.subarray(ell);
  const double theta = deg_to_rad(theta_deg);
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  CVector a(static_cast<Eigen::Index>(range.size));
  const auto elements = geometry.elements();
  for (std::size_t i = 0; i < range.size; ++i) {
    const Position& p = elements[range.begin + i];
    const double phase = 2.0 * kPi * (p.x * s + p.y * c);
    a(static_cast<Eigen::Index>(i)) =
        geometry.gain(range.begin + i, theta) * std::polar(1.0, phase);
  }
  return a;
}

std::vector<double> make_uniform_grid(double start_deg, double stop_deg,
                                      double step_deg) {
  if (!(step_deg > 0.0) || stop_deg < start_deg) {
    throw ConfigError("grid: need step_deg > 0 and stop_deg >= start_deg");
  }
  const auto count =
      static_cast<std::size_t>(std::floor((stop_deg - start_deg) / step_deg +
                                          1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = start_deg + static_cast<double>(i) * step_deg;
  }
  return grid;
}

GridManifold build_grid_manifold(const ArrayGeometry& geometry,
                                 const std::vector<double>& grid_degrees) {
  if (grid_degrees.empty()) {
    throw ConfigError("grid: the DOA grid must not be empty");
  }
  for (std::size_t n = 0; n < grid_degrees.size(); ++n) {
    if (!(grid_degrees[n] > -90.0 && grid_degrees[n] < 90.0)) {
      throw ConfigError("grid: angles must lie in (-90, 90) degrees");
    }
    if (n > 0 && !(grid_degrees[n] > grid_degrees[n - 1])) {
      throw ConfigError("grid: angles must be strictly increasing");
    }
  }
  GridManifold manifold;
  manifold.grid_degrees = grid_degrees;
  const auto n_theta = static_cast<Eigen::Index>(grid_degrees.size());
  manifold.stacked.resize(static_cast<Eigen::Index>(geometry.num_elements()),
                          n_theta);
  for (std::size_t ell = 0; ell < geometry.num_subarrays(); ++ell) {
    const IndexRange range = geometry.subarray(ell);
    CMatrix block(static_cast<Eigen::Index>(range.size), n_theta);
    for (Eigen::Index n = 0; n < n_theta; ++n) {
      block.col(n) = steering_vector(geometry, ell, grid_degrees[n]);
    }
    manifold.stacked.middleRows(static_cast<Eigen::Index>(range.begin),
                                block.rows()) = block;
    manifold.per_subarray.push_back(std::move(block));
  }
  return manifold;
}

double Scenario::noise_variance() const {
  if (noise_variance_override) return *noise_variance_override;
  double mean_power = 1.0;
  if (!source_powers.empty()) {
    mean_power = std::accumulate(source_powers.begin(), source_powers.end(),
                                 0.0) /
                 static_cast<double>(source_powers.size());
  }
  return mean_power / std::pow(10.0, snr_db / 10.0);
}

void Scenario::validate() const {
  if (source_doas.empty()) {
    throw ConfigError("sources.doas_deg: at least one source is required");
  }
  for (double doa : source_doas) {
    if (!(doa > -90.0 && doa < 90.0)) {
      throw ConfigError("sources.doas_deg: angles must lie in (-90, 90)");
    }
  }
  if (source_powers.size() != source_doas.size()) {
    throw ConfigError("sources.powers: expected one power per source");
  }
  for (double p : source_powers) {
    if (!(p > 0.0)) throw ConfigError("sources.powers: powers must be > 0");
  }
  if (!std::isfinite(snr_db)) {
    throw ConfigError("noise.snr_db: must be finite");
  }
  if (noise_variance_override && !(*noise_variance_override >= 0.0)) {
    throw ConfigError("noise.variance: must be >= 0");
  }
  if (const auto* fixed = std::get_if<std::vector<double>>(&phase_mode)) {
    if (fixed->size() != geometry.num_subarrays()) {
      throw ConfigError("phases.values_rad: expected one phase per sub-array");
    }
  }
  if (fixed_amplitudes && fixed_amplitudes->size() != source_doas.size()) {
    throw ConfigError("sources.amplitudes: expected one amplitude per source");
  }
}

CVector Snapshot::stacked() const {
  Eigen::Index total = 0;
  for (const auto& x : observations) total += x.size();
  CVector out(total);
  Eigen::Index offset = 0;
  for (const auto& x : observations) {
    out.segment(offset, x.size()) = x;
    offset += x.size();
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t value) {
  // splitmix64 finalizer
  value += 0x9e3779b97f4a7c15ULL;
  value = (value ^ (value >> 30)) * 0xbf58476d1ce4e5b9ULL;
  value = (value ^ (value >> 27)) * 0x94d049bb133111ebULL;
  return value ^ (value >> 31);
}

namespace {

cplx complex_gaussian(std::mt19937_64& rng, double variance) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = std::sqrt(variance / 2.0);
  const double re = normal(rng);
  const double im = normal(rng);
  return {scale * re, scale * im};
}

}  // namespace

Snapshot generate_snapshot(const Scenario& scenario, std::uint64_t seed) {
  scenario.validate();
  const std::size_t num_sources = scenario.source_doas.size();
  const std::size_t num_sub = scenario.geometry.num_subarrays();

  std::mt19937_64 signal_rng(mix_seed(seed ^ 0x5167a1ULL));
  std::mt19937_64 phase_rng(mix_seed(seed ^ 0x9a5e5ULL));
  std::mt19937_64 noise_rng(mix_seed(seed ^ 0x7015eULL));

  SnapshotTruth truth;
  truth.doas = scenario.source_doas;
  truth.noise_variance = scenario.noise_variance();

  if (scenario.fixed_amplitudes) {
    truth.amplitudes = *scenario.fixed_amplitudes;
  } else {
    truth.amplitudes.resize(num_sources);
    for (std::size_t q = 0; q < num_sources; ++q) {
      truth.amplitudes[q] =
          complex_gaussian(signal_rng, scenario.source_powers[q]);
    }
  }

  if (const auto* fixed = std::get_if<std::vector<double>>(&scenario.phase_mode)) {
    truth.phases = *fixed;
  } else {
    std::uniform_real_distribution<double> uniform(0.0, 2.0 * kPi);
    truth.phases.resize(num_sub);
    for (auto& phi : truth.phases) phi = uniform(phase_rng);
  }

  CVector s(static_cast<Eigen::Index>(num_sources));
  for (std::size_t q = 0; q < num_sources; ++q) {
    s(static_cast<Eigen::Index>(q)) = truth.amplitudes[q];
  }

  Snapshot snapshot;
  snapshot.observations.reserve(num_sub);
  for (std::size_t ell = 0; ell < num_sub; ++ell) {
    const auto m = static_cast<Eigen::Index>(scenario.geometry.subarray(ell).size);
    CMatrix a_true(m, static_cast<Eigen::Index>(num_sources));
    for (std::size_t q = 0; q < num_sources; ++q) {
      a_true.col(static_cast<Eigen::Index>(q)) =
          steering_vector(scenario.geometry, ell, scenario.source_doas[q]);
    }
    CVector x = std::polar(1.0, -truth.phases[ell]) * (a_true * s);
    if (truth.noise_variance > 0.0) {
      for (Eigen::Index i = 0; i < m; ++i) {
        x(i) += complex_gaussian(noise_rng, truth.noise_variance);
      }
    }
    snapshot.observations.push_back(std::move(x));
  }
  snapshot.truth = std::move(truth);
  return snapshot;
}

}  // namespace ncdoa
