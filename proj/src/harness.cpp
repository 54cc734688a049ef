#include "ncdoa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "ncdoa/errors.hpp"
#include "ncdoa/format.hpp"

namespace ncdoa {

void SweepConfig::validate() const {
  scenario.validate();
  if (n_trials < 1) throw ConfigError("sweep.n_trials: must be >= 1");
  if (snr_grid_db.empty()) throw ConfigError("sweep.snr_db: must not be empty");
  if (methods.empty()) throw ConfigError("sweep.methods: must not be empty");
  if (grid_degrees.empty()) throw ConfigError("grid: must not be empty");
  for (std::size_t n = 0; n < grid_degrees.size(); ++n) {
    if (!(grid_degrees[n] > -90.0 && grid_degrees[n] < 90.0)) {
      throw ConfigError("grid: angles must lie in (-90, 90) degrees");
    }
    if (n > 0 && !(grid_degrees[n] > grid_degrees[n - 1])) {
      throw ConfigError("grid: angles must be strictly increasing");
    }
  }
  if (!(mu >= 0.0)) throw ConfigError("estimator.mu: must be >= 0");
  if (!(c > 0.0)) throw ConfigError("estimator.C: must be > 0");
  if (assumed_noise_variance && !(*assumed_noise_variance >= 0.0)) {
    throw ConfigError("estimator.noise_variance: must be >= 0");
  }
  solver.validate();
  if (has(Method::kMusic)) {
    MusicOptions m = music;
    m.q = scenario.source_doas.size();
    m.validate(scenario.geometry);
  }
}

bool SweepConfig::has(Method method) const {
  return std::find(methods.begin(), methods.end(), method) != methods.end();
}

const MethodOutcome* TrialResult::find(Method method) const {
  for (const auto& o : outcomes) {
    if (o.method == method) return &o;
  }
  return nullptr;
}

const RmseCell& RmseReport::at(Method method, double snr_db) const {
  for (const auto& cell : cells) {
    if (cell.method == method && cell.snr_db == snr_db) return cell;
  }
  throw std::out_of_range("no report cell for " + std::string(to_string(method)) +
                          " at " + format_double(snr_db) + " dB");
}

double rmse(std::vector<double> estimated, std::vector<double> truth) {
  if (estimated.size() != truth.size()) {
    throw ConfigError("rmse: estimate and truth lists differ in length");
  }
  if (truth.empty()) return 0.0;
  std::sort(estimated.begin(), estimated.end());
  std::sort(truth.begin(), truth.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = estimated[i] - truth[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(truth.size()));
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t snr_index,
                         std::size_t trial) {
  std::uint64_t h = mix_seed(base_seed);
  h = mix_seed(h ^ static_cast<std::uint64_t>(snr_index));
  h = mix_seed(h ^ (static_cast<std::uint64_t>(trial) << 20));
  return h;
}

std::vector<double> pad_estimates(std::vector<double> estimated, std::size_t q,
                                  double fill) {
  if (estimated.size() > q) estimated.resize(q);
  while (estimated.size() < q) estimated.push_back(fill);
  std::sort(estimated.begin(), estimated.end());
  return estimated;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double global_max_angle(const SpectrumEstimate& spectrum) {
  const auto it = std::max_element(spectrum.magnitudes.begin(),
                                   spectrum.magnitudes.end());
  return spectrum.grid_degrees[static_cast<std::size_t>(
      it - spectrum.magnitudes.begin())];
}

void score(MethodOutcome& outcome, SpectrumEstimate spectrum,
           const std::vector<double>& truth, bool keep_spectrum) {
  const std::size_t q = truth.size();
  outcome.estimated = spectrum.peak_angles();
  outcome.padded =
      pad_estimates(outcome.estimated, q, global_max_angle(spectrum));
  outcome.rmse = rmse(outcome.padded, truth);
  outcome.scored = true;
  outcome.diagnostics = spectrum.diagnostics;
  if (spectrum.shortfall || outcome.estimated.size() < q) {
    outcome.failed = true;
    outcome.failure_reason = "shortfall";
  } else if (!spectrum.converged()) {
    outcome.failed = true;
    outcome.failure_reason = "not_converged";
  }
  outcome.complete = !outcome.failed;
  if (keep_spectrum) outcome.spectrum = std::move(spectrum);
}

void record_error(MethodOutcome& outcome, const std::exception& e) {
  outcome.failed = true;
  outcome.scored = false;
  outcome.complete = false;
  outcome.failure_reason = e.what();
}

}  // namespace

std::vector<MethodOutcome> run_methods(const SweepConfig& config,
                                       const Scenario& scenario,
                                       const GridManifold& manifold,
                                       const Snapshot& snapshot,
                                       bool keep_spectra) {
  if (!snapshot.truth) {
    throw ConfigError("run_methods: snapshot carries no ground truth");
  }
  const std::vector<double>& truth = snapshot.truth->doas;
  const std::size_t q = truth.size();

  EstimatorSettings settings;
  settings.mu = config.mu;
  settings.c = config.c;
  settings.noise_variance =
      config.assumed_noise_variance.value_or(scenario.noise_variance());
  settings.peaks = TopQ{q};
  settings.solver = config.solver;

  // Proposed1 and Proposed2 share one lifted solve; it is deterministic, so
  // sharing never changes either method's output.
  std::optional<LiftedEstimate> lifted;
  std::string lifted_error;
  double lifted_ms = 0.0;
  if (config.has(Method::kProposed1) || config.has(Method::kProposed2)) {
    const auto start = Clock::now();
    try {
      lifted = estimate_lifted(snapshot, manifold, settings.mu, settings.c,
                               settings.noise_variance, settings.solver);
    } catch (const std::exception& e) {
      lifted_error = e.what();
    }
    lifted_ms = elapsed_ms(start);
  }

  std::vector<MethodOutcome> outcomes;
  for (Method method : config.methods) {
    MethodOutcome outcome;
    outcome.method = method;
    const auto start = Clock::now();
    try {
      switch (method) {
        case Method::kProposed1:
          if (!lifted) throw Error(lifted_error);
          score(outcome, proposed1_from(*lifted, manifold, settings.peaks),
                truth, keep_spectra);
          break;
        case Method::kProposed2:
          if (!lifted) throw Error(lifted_error);
          score(outcome, proposed2_from(*lifted, snapshot, manifold, settings),
                truth, keep_spectra);
          break;
        case Method::kSparsityOnly:
          score(outcome, run_sparsity_only(snapshot, manifold, settings), truth,
                keep_spectra);
          break;
        case Method::kMusic: {
          MusicOptions music = config.music;
          music.q = q;
          score(outcome,
                run_music(snapshot, scenario.geometry, manifold.grid_degrees,
                          music),
                truth, keep_spectra);
          break;
        }
      }
    } catch (const std::exception& e) {
      record_error(outcome, e);
    }
    outcome.solve_ms = elapsed_ms(start);
    if (method == Method::kProposed1 || method == Method::kProposed2) {
      outcome.solve_ms += lifted_ms;
    }
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

TrialResult run_trial(const SweepConfig& config, const GridManifold& manifold,
                      std::size_t snr_index, std::size_t trial) {
  TrialResult result;
  result.snr_index = snr_index;
  result.snr_db = config.snr_grid_db[snr_index];
  result.trial = trial;
  result.seed = trial_seed(config.base_seed, snr_index, trial);

  Scenario scenario = config.scenario;
  scenario.snr_db = result.snr_db;
  const Snapshot snapshot = generate_snapshot(scenario, result.seed);
  result.truth = *snapshot.truth;
  result.outcomes = run_methods(config, scenario, manifold, snapshot,
                                config.persist_spectra);
  return result;
}

RmseReport aggregate(const SweepConfig& config,
                     const std::vector<TrialResult>& trials) {
  RmseReport report;
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    const Method method = config.methods[mi];
    for (std::size_t k = 0; k < config.snr_grid_db.size(); ++k) {
      RmseCell cell;
      cell.method = method;
      cell.snr_db = config.snr_grid_db[k];
      double sq_all = 0.0, sq_complete = 0.0, ms = 0.0;
      std::size_t n_scored = 0, n_complete = 0;
      for (const auto& trial : trials) {
        if (trial.snr_index != k) continue;
        const MethodOutcome& o = trial.outcomes[mi];
        ++cell.trials;
        ms += o.solve_ms;
        if (o.failed) ++cell.failures;
        if (o.scored) {
          sq_all += o.rmse * o.rmse;
          ++n_scored;
        }
        if (o.complete) {
          sq_complete += o.rmse * o.rmse;
          ++n_complete;
        }
      }
      cell.rmse = n_scored ? std::sqrt(sq_all / static_cast<double>(n_scored))
                           : std::nan("");
      cell.rmse_complete_only =
          n_complete ? std::sqrt(sq_complete / static_cast<double>(n_complete))
                     : std::nan("");
      cell.mean_solve_ms =
          cell.trials ? ms / static_cast<double>(cell.trials) : 0.0;
      report.cells.push_back(cell);
    }
  }
  return report;
}

SweepResult run_sweep(const SweepConfig& config) {
  config.validate();
  const GridManifold manifold =
      build_grid_manifold(config.scenario.geometry, config.grid_degrees);

  const std::size_t n_snr = config.snr_grid_db.size();
  const std::size_t total = n_snr * config.n_trials;
  std::vector<TrialResult> trials(total);

  std::size_t workers = config.threads;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, total);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t job = next++; job < total; job = next++) {
      trials[job] = run_trial(config, manifold, job / config.n_trials,
                              job % config.n_trials);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
  }

  SweepResult result;
  result.report = aggregate(config, trials);
  result.trials = std::move(trials);
  return result;
}

void write_results_csv(std::ostream& out, const SweepConfig& config,
                       const SweepResult& result) {
  const std::size_t q = config.scenario.source_doas.size();
  out << "method,snr_db,trial,seed";
  for (std::size_t i = 1; i <= q; ++i) out << ",est_doa_" << i;
  out << ",rmse,failed,solve_ms\n";
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    for (const auto& trial : result.trials) {
      const MethodOutcome& o = trial.outcomes[mi];
      out << to_string(o.method) << ',' << format_double(trial.snr_db) << ','
          << trial.trial << ',' << trial.seed;
      for (std::size_t i = 0; i < q; ++i) {
        out << ',';
        if (i < o.estimated.size()) out << format_double(o.estimated[i]);
      }
      out << ',' << (o.scored ? format_double(o.rmse) : std::string()) << ','
          << (o.failed ? 1 : 0) << ',' << format_double(o.solve_ms) << '\n';
    }
  }
}

void write_aggregate_csv(std::ostream& out, const RmseReport& report) {
  out << "method,snr_db,rmse,failure_rate,n,failures,rmse_complete_only\n";
  for (const auto& cell : report.cells) {
    out << to_string(cell.method) << ',' << format_double(cell.snr_db) << ','
        << format_double(cell.rmse) << ',' << format_double(cell.failure_rate())
        << ',' << cell.trials << ',' << cell.failures << ','
        << format_double(cell.rmse_complete_only) << '\n';
  }
}

void write_timing_csv(std::ostream& out, const RmseReport& report) {
  out << "method,snr_db,mean_solve_ms\n";
  for (const auto& cell : report.cells) {
    out << to_string(cell.method) << ',' << format_double(cell.snr_db) << ','
        << format_double(cell.mean_solve_ms) << '\n';
  }
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void write_sweep_outputs(const std::filesystem::path& directory,
                         const SweepConfig& config, const SweepResult& result) {
  std::filesystem::create_directories(directory);
  {
    auto out = open_for_write(directory / "results.csv");
    write_results_csv(out, config, result);
  }
  {
    auto out = open_for_write(directory / "aggregate.csv");
    write_aggregate_csv(out, result.report);
  }
  {
    auto out = open_for_write(directory / "timing.csv");
    write_timing_csv(out, result.report);
  }
  if (!config.persist_spectra) return;
  const auto spectra_dir = directory / "spectra";
  std::filesystem::create_directories(spectra_dir);
  for (const auto& trial : result.trials) {
    for (const auto& o : trial.outcomes) {
      if (!o.spectrum) continue;
      auto out = open_for_write(
          spectra_dir / (std::string(to_string(o.method)) + "_snr" +
                         std::to_string(trial.snr_index) + "_trial" +
                         std::to_string(trial.trial) + ".csv"));
      write_spectrum_csv(out, *o.spectrum);
    }
  }
}

}  // namespace ncdoa
