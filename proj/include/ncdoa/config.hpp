#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "ncdoa/harness.hpp"

namespace ncdoa {

// JSON sweep/scenario configuration. Top-level blocks:
//
//   geometry   {"kind": "ula", "num_elements", "spacing_wavelengths", "partition"}
//              or {"elements": [[x, y], ...], "partition"}
//   sources    {"doas_deg": [...], "powers": [...]}       powers default to 1
//   noise      {"snr_db": s} or {"variance": v}
//   phases     {"mode": "random"} or {"mode": "fixed", "values_rad": [...]}
//   grid       {"start_deg", "stop_deg", "step_deg"}      default -60:0.5:60
//              or {"angles_deg": [...]}
//   estimator  {"mu", "C", "noise_variance"}
//   solver     SolverOptions field names
//   music      {"smoothing_length", "forward_backward"}
//   sweep      {"snr_db": [...], "n_trials", "methods", "base_seed",
//               "persist_spectra", "threads"}
//
// Only `geometry` and `sources` are required. Unknown keys are rejected.
// Every error is a ConfigError whose message starts with the dotted path of
// the offending field.
SweepConfig parse_sweep_config(std::string_view json_text);
SweepConfig load_sweep_config(const std::filesystem::path& path);

// Inverse of parse_sweep_config for configs it can express (no element
// patterns, no pinned amplitudes). Geometry and grid are written out
// element by element so that parsing the result gives back the same config.
std::string sweep_config_to_json(const SweepConfig& config);

// 64-bit FNV-1a of the raw bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace ncdoa
