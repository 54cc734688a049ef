#pragma once

#include "ncdoa/array_model.hpp"
#include "ncdoa/pipeline.hpp"

namespace ncdoa {

// Self-calibration style reference: the lifted program with mu = 0, DOAs
// from the magnitude of the dominant left singular vector.
SpectrumEstimate run_sparsity_only(const Snapshot& snapshot,
                                   const GridManifold& manifold,
                                   const EstimatorSettings& settings);

struct MusicOptions {
  std::size_t q = 2;                 // assumed number of sources
  std::size_t smoothing_length = 4;  // sub-aperture length
  bool forward_backward = true;

  // Throws ConfigError unless q < smoothing_length <= min M_l.
  void validate(const ArrayGeometry& geometry) const;
};

// Treats each sub-array as one snapshot of a common ULA and averages the
// outer products of every length-`smoothing_length` sub-aperture (plus the
// conjugate-reversed copies when forward_backward is set).
//
// Throws UnsupportedGeometry unless all sub-arrays are omnidirectional ULAs
// with identical size and spacing.
CMatrix smoothed_covariance(const Snapshot& snapshot,
                            const ArrayGeometry& geometry,
                            const MusicOptions& options);

// Spectrum 1 / max(||E_n^H a(theta)||^2, 1e-12) over the grid.
SpectrumEstimate run_music(const Snapshot& snapshot,
                           const ArrayGeometry& geometry,
                           const std::vector<double>& grid_degrees,
                           const MusicOptions& options);

}  // namespace ncdoa
