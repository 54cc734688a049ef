#pragma once

#include <iosfwd>
#include <vector>

#include "ncdoa/harness.hpp"
#include "ncdoa/pipeline.hpp"

namespace ncdoa {

// Static SVG renderings of the CSV outputs. Convenience only.

// RMSE (log scale) against SNR, one line per method.
void write_rmse_svg(std::ostream& out, const RmseReport& report);

// Spectra normalised to their own maximum, in dB (floored at -60 dB), with
// dashed markers at `true_doas`.
void write_spectra_svg(std::ostream& out,
                       const std::vector<SpectrumEstimate>& spectra,
                       const std::vector<double>& true_doas);

}  // namespace ncdoa
