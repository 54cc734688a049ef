#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ncdoa/array_model.hpp"
#include "ncdoa/baselines.hpp"
#include "ncdoa/pipeline.hpp"
#include "ncdoa/solver.hpp"

namespace ncdoa {

struct SweepConfig {
  Scenario scenario;  // snr_db is replaced by each entry of snr_grid_db
  std::vector<double> grid_degrees;
  std::vector<double> snr_grid_db;
  std::size_t n_trials = 1;
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  std::uint64_t base_seed = 0;
  double mu = 1.0;
  double c = 2.0;
  // sigma^2 handed to the estimators; defaults to the scenario's true value.
  std::optional<double> assumed_noise_variance;
  SolverOptions solver;
  MusicOptions music;  // q is always overridden with the number of sources
  bool persist_spectra = false;
  std::size_t threads = 1;  // 0 = hardware concurrency

  void validate() const;
  bool has(Method method) const;
};

struct MethodOutcome {
  Method method = Method::kProposed1;
  std::vector<double> estimated;  // peak angles, sorted; may be short
  std::vector<double> padded;     // length Q, scored against the truth
  double rmse = 0.0;
  bool failed = false;
  bool scored = false;  // false when the method threw and produced no peaks
  bool complete = false;  // full peak set and converged solves
  std::string failure_reason;
  double solve_ms = 0.0;
  std::vector<SolverDiagnostics> diagnostics;
  std::optional<SpectrumEstimate> spectrum;
};

struct TrialResult {
  std::size_t snr_index = 0;
  double snr_db = 0.0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  SnapshotTruth truth;
  std::vector<MethodOutcome> outcomes;  // in config.methods order

  const MethodOutcome* find(Method method) const;
};

struct RmseCell {
  Method method = Method::kProposed1;
  double snr_db = 0.0;
  double rmse = 0.0;              // padded, over all scored trials
  double rmse_complete_only = 0.0;  // over trials with a complete peak set
  std::size_t trials = 0;
  std::size_t failures = 0;
  double mean_solve_ms = 0.0;

  double failure_rate() const {
    return trials == 0 ? 0.0
                       : static_cast<double>(failures) /
                             static_cast<double>(trials);
  }
};

struct RmseReport {
  std::vector<RmseCell> cells;  // method-major in config order, then SNR

  // Throws std::out_of_range when the cell is absent.
  const RmseCell& at(Method method, double snr_db) const;
};

struct SweepResult {
  RmseReport report;
  std::vector<TrialResult> trials;  // ordered by (snr_index, trial)
};

// Root mean square error between two angle lists after sorting both
// ascending. Throws ConfigError when the lengths differ.
double rmse(std::vector<double> estimated, std::vector<double> truth);

// Seed of trial `trial` at SNR index `snr_index`; independent of the methods.
std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t snr_index,
                         std::size_t trial);

// Pads a short peak list with `fill` up to `q` entries.
std::vector<double> pad_estimates(std::vector<double> estimated, std::size_t q,
                                  double fill);

// Runs config.methods on one snapshot (which must carry its truth), scoring
// against the true DOAs. `scenario` supplies the geometry and, unless the
// config pins an assumed value, the noise variance handed to the estimators.
std::vector<MethodOutcome> run_methods(const SweepConfig& config,
                                       const Scenario& scenario,
                                       const GridManifold& manifold,
                                       const Snapshot& snapshot,
                                       bool keep_spectra);

TrialResult run_trial(const SweepConfig& config, const GridManifold& manifold,
                      std::size_t snr_index, std::size_t trial);

RmseReport aggregate(const SweepConfig& config,
                     const std::vector<TrialResult>& trials);

// Trials run on `config.threads` workers; results are keyed by index so the
// report does not depend on scheduling.
SweepResult run_sweep(const SweepConfig& config);

// method,snr_db,trial,seed,est_doa_1..est_doa_Q,rmse,failed,solve_ms
void write_results_csv(std::ostream& out, const SweepConfig& config,
                       const SweepResult& result);
// method,snr_db,rmse,failure_rate,n,failures,rmse_complete_only
// Contains no timing so that reruns are byte-identical.
void write_aggregate_csv(std::ostream& out, const RmseReport& report);
// method,snr_db,mean_solve_ms
void write_timing_csv(std::ostream& out, const RmseReport& report);

// Writes results.csv, aggregate.csv, timing.csv and, when spectra were kept,
// spectra/<method>_snr<k>_trial<t>.csv under `directory`.
void write_sweep_outputs(const std::filesystem::path& directory,
                         const SweepConfig& config, const SweepResult& result);

}  // namespace ncdoa
