#include "ncdoa/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ncdoa/baselines.hpp"
#include "ncdoa/config.hpp"
#include "ncdoa/errors.hpp"
#include "ncdoa/format.hpp"
#include "ncdoa/harness.hpp"
#include "ncdoa/plot.hpp"
#include "ncdoa/version.hpp"

namespace ncdoa {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Flags {
  std::string config;
  std::string out;
  std::string snr;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string methods;
  std::optional<double> grid_step;
  std::optional<std::size_t> threads;
  bool plots = false;
  std::size_t selftest_seeds = 3;
};

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    parts.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return parts;
}

double parse_number(const std::string& text, const std::string& flag) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(flag + ": '" + text + "' is not a number");
  }
}

fs::path output_directory(const Flags& flags) {
  if (!flags.out.empty()) return flags.out;
  if (const char* env = std::getenv("NCDOA_OUT_DIR"); env && *env) return env;
  return "ncdoa_out";
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("--config: cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Config-file overrides shared by every subcommand. `snr_list` selects
// whether --snr replaces the sweep grid or the single-snapshot SNR.
json apply_overrides(SweepConfig& config, const Flags& flags, bool snr_list) {
  json applied = json::object();
  if (flags.grid_step) {
    config.grid_degrees = make_uniform_grid(config.grid_degrees.front(),
                                            config.grid_degrees.back(),
                                            *flags.grid_step);
    applied["grid_step"] = *flags.grid_step;
  }
  if (!flags.methods.empty()) {
    config.methods.clear();
    for (const auto& name : split_commas(flags.methods)) {
      try {
        config.methods.push_back(parse_method(name));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("--methods: ") + e.what());
      }
    }
    applied["methods"] = flags.methods;
  }
  if (!flags.snr.empty()) {
    std::vector<double> values;
    for (const auto& part : split_commas(flags.snr)) {
      values.push_back(parse_number(part, "--snr"));
    }
    if (snr_list) {
      config.snr_grid_db = values;
    } else {
      if (values.size() != 1) throw ConfigError("--snr: expected one value");
      config.scenario.snr_db = values.front();
      config.snr_grid_db = values;
    }
    config.scenario.noise_variance_override.reset();
    applied["snr"] = flags.snr;
  }
  if (flags.trials) {
    config.n_trials = *flags.trials;
    applied["trials"] = *flags.trials;
  }
  if (flags.threads) {
    config.threads = *flags.threads;
    applied["threads"] = *flags.threads;
  }
  if (flags.seed && snr_list) {
    config.base_seed = *flags.seed;
    applied["seed"] = *flags.seed;
  }
  config.validate();
  return applied;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const Flags& flags, const std::string& config_bytes,
                    const std::string& effective, std::uint64_t seed,
                    json overrides, json extra = json::object()) {
  json m;
  m["tool"] = "ncdoa";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = flags.config;
  m["config_hash"] = "fnv1a64:" + fnv1a_hex(config_bytes);
  m["effective_config"] = "config.json";
  m["effective_config_hash"] = "fnv1a64:" + fnv1a_hex(effective);
  m["seed"] = seed;
  m["overrides"] = std::move(overrides);
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  auto manifest = open_output(dir / "manifest.json");
  manifest << m.dump(2) << "\n";
  auto copy = open_output(dir / "config.json");
  copy << effective;
}

int cmd_sweep(const Flags& flags, std::ostream& out) {
  const std::string bytes = read_file(flags.config);
  SweepConfig config = parse_sweep_config(bytes);
  json overrides = apply_overrides(config, flags, true);
  const std::string effective = sweep_config_to_json(config);

  const fs::path dir = output_directory(flags);
  fs::create_directories(dir);
  const SweepResult result = run_sweep(config);
  write_sweep_outputs(dir, config, result);
  write_manifest(dir, "sweep", flags, bytes, effective, config.base_seed,
                 std::move(overrides));
  if (flags.plots) {
    auto svg = open_output(dir / "rmse.svg");
    write_rmse_svg(svg, result.report);
  }

  out << "method,snr_db,rmse,failure_rate\n";
  for (const auto& c : result.report.cells) {
    out << to_string(c.method) << "," << format_double(c.snr_db) << ","
        << format_double(c.rmse) << "," << format_double(c.failure_rate()) << "\n";
  }
  out << "wrote " << dir.string() << "\n";
  return kExitOk;
}

std::string outcome_status(const MethodOutcome& o) {
  if (!o.scored) return "error";
  if (o.failed) return o.failure_reason;
  return "ok";
}

// One snapshot through the configured methods; `spectra` forces all four.
int cmd_single(const Flags& flags, bool spectra, std::ostream& out) {
  const std::string bytes = read_file(flags.config);
  SweepConfig config = parse_sweep_config(bytes);
  if (spectra) {
    config.methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
  }
  json overrides = apply_overrides(config, flags, false);
  const std::uint64_t seed = flags.seed.value_or(config.base_seed);
  overrides["seed"] = seed;
  config.snr_grid_db = {config.scenario.snr_db};
  config.n_trials = 1;
  const std::string effective = sweep_config_to_json(config);

  const fs::path dir = output_directory(flags);
  fs::create_directories(dir);
  const GridManifold manifold =
      build_grid_manifold(config.scenario.geometry, config.grid_degrees);
  const Snapshot snapshot = generate_snapshot(config.scenario, seed);
  const std::vector<MethodOutcome> outcomes =
      run_methods(config, config.scenario, manifold, snapshot, true);

  const std::size_t q = config.scenario.source_doas.size();
  {
    auto csv = open_output(dir / "estimates.csv");
    csv << "method";
    for (std::size_t i = 1; i <= q; ++i) csv << ",est_doa_" << i;
    csv << ",rmse,status\n";
    for (const auto& o : outcomes) {
      csv << to_string(o.method);
      for (std::size_t i = 0; i < q; ++i) {
        csv << ",";
        if (i < o.estimated.size()) csv << format_double(o.estimated[i]);
      }
      csv << "," << (o.scored ? format_double(o.rmse) : "") << ","
          << outcome_status(o) << "\n";
    }
  }
  std::vector<SpectrumEstimate> kept;
  for (const auto& o : outcomes) {
    out << to_string(o.method) << ":";
    for (double a : o.estimated) out << " " << format_double(a);
    out << " [" << outcome_status(o) << "]\n";
    if (!o.spectrum) {
      out << "  " << o.failure_reason << "\n";
      continue;
    }
    auto csv = open_output(dir / (std::string(to_string(o.method)) + ".csv"));
    write_spectrum_csv(csv, *o.spectrum);
    kept.push_back(*o.spectrum);
  }
  json truth;
  truth["doas_deg"] = snapshot.truth->doas;
  truth["phases_rad"] = snapshot.truth->phases;
  truth["noise_variance"] = snapshot.truth->noise_variance;
  write_manifest(dir, spectra ? "spectra" : "estimate", flags, bytes, effective,
                 seed, std::move(overrides), json{{"truth", truth}});
  if (flags.plots) {
    auto svg = open_output(dir / "spectra.svg");
    write_spectra_svg(svg, kept, snapshot.truth->doas);
  }
  out << "wrote " << dir.string() << "\n";
  for (const auto& o : outcomes) {
    if (!o.scored) return kExitRuntime;
  }
  return kExitOk;
}

// Noiseless on-grid recovery on the default 24-element, four-sub-array ULA.
int cmd_selftest(const Flags& flags, std::ostream& out) {
  struct Case {
    std::vector<double> doas;
    std::vector<Method> methods;
  };
  const std::vector<Method> all(std::begin(kAllMethods), std::end(kAllMethods));
  const std::vector<Case> cases{{{15.0}, all}, {{0.0, 15.0}, all}};
  bool all_pass = true;
  for (const Case& c : cases) {
    SweepConfig config{.scenario = Scenario{.geometry = make_ula(24, 0.5, {6, 6, 6, 6}),
                                            .source_doas = c.doas,
                                            .source_powers = std::vector<double>(c.doas.size(), 1.0),
                                            .noise_variance_override = 0.0}};
    config.grid_degrees = make_uniform_grid(-60.0, 60.0, 0.5);
    config.snr_grid_db = {0.0};
    config.methods = c.methods;
    // Budget 1e-8, i.e. C * M * sigma^2 with C = 2, M = 24.
    config.assumed_noise_variance = 1e-8 / 48.0;
    const GridManifold manifold =
        build_grid_manifold(config.scenario.geometry, config.grid_degrees);
    std::vector<std::size_t> hits(c.methods.size(), 0);
    for (std::size_t seed = 0; seed < flags.selftest_seeds; ++seed) {
      const Snapshot snap = generate_snapshot(config.scenario, seed);
      const auto outcomes =
          run_methods(config, config.scenario, manifold, snap, false);
      for (std::size_t m = 0; m < outcomes.size(); ++m) {
        if (outcomes[m].estimated == c.doas) ++hits[m];
      }
    }
    for (std::size_t m = 0; m < c.methods.size(); ++m) {
      const bool pass = hits[m] == flags.selftest_seeds;
      all_pass = all_pass && pass;
      out << (pass ? "PASS" : "FAIL") << "  noiseless Q=" << c.doas.size() << " "
          << to_string(c.methods[m]) << ": " << hits[m] << "/"
          << flags.selftest_seeds << " exact\n";
    }
  }

  // MUSIC sees only x x^H, so rotating whole sub-arrays must not matter.
  {
    Scenario sc{.geometry = make_ula(24, 0.5, {6, 6, 6, 6}),
                .source_doas = {0.0, 15.0},
                .source_powers = {1.0, 1.0},
                .snr_db = 10.0,
                .phase_mode = std::vector<double>(4, 0.0)};
    const auto grid = make_uniform_grid(-60.0, 60.0, 0.5);
    MusicOptions music;
    const Snapshot base = generate_snapshot(sc, 1);
    const auto reference = run_music(base, sc.geometry, grid, music).magnitudes;
    bool same = true;
    for (int draw = 0; draw < 5; ++draw) {
      Snapshot rotated = base;
      for (std::size_t ell = 0; ell < rotated.observations.size(); ++ell) {
        rotated.observations[ell] *= std::polar(1.0, 0.7 * draw + 1.3 * ell);
      }
      same = same && run_music(rotated, sc.geometry, grid, music).magnitudes == reference;
    }
    all_pass = all_pass && same;
    out << (same ? "PASS" : "FAIL") << "  MUSIC spectrum unchanged by sub-array phases\n";
  }
  return all_pass ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"DOA estimation from one snapshot of non-coherent sub-arrays"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1, 1);
  Flags flags;

  auto add_common = [&flags](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out,
                    "output directory (default $NCDOA_OUT_DIR or ./ncdoa_out)");
    sub->add_option("--methods", flags.methods,
                    "comma list of Proposed1,Proposed2,SparsityOnly,MUSIC");
    sub->add_option("--grid-step", flags.grid_step, "DOA grid step in degrees")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--plots", flags.plots, "also render SVG plots");
  };

  CLI::App* estimate = app.add_subcommand("estimate", "one snapshot: DOAs and spectra");
  add_common(estimate);
  estimate->add_option("--snr", flags.snr, "SNR in dB");
  estimate->add_option("--seed", flags.seed, "snapshot seed (default: base_seed)");

  CLI::App* sweep = app.add_subcommand("sweep", "Monte Carlo RMSE sweep");
  add_common(sweep);
  sweep->add_option("--snr", flags.snr, "comma list of SNRs in dB");
  sweep->add_option("--seed", flags.seed, "base seed");
  sweep->add_option("--trials", flags.trials, "trials per SNR")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--threads", flags.threads, "worker threads, 0 = all cores");

  CLI::App* spectra = app.add_subcommand("spectra", "one snapshot, spectra of all four methods");
  spectra->add_option("--config", flags.config, "JSON configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  spectra->add_option("--out", flags.out, "output directory");
  spectra->add_option("--snr", flags.snr, "SNR in dB");
  spectra->add_option("--seed", flags.seed, "snapshot seed (default: base_seed)");
  spectra->add_option("--grid-step", flags.grid_step, "DOA grid step in degrees")
      ->check(CLI::PositiveNumber);
  spectra->add_flag("--plots", flags.plots, "also render an SVG plot");

  CLI::App* selftest = app.add_subcommand("selftest", "noiseless recovery checks");
  selftest->add_option("--seeds", flags.selftest_seeds, "seeds per check")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*estimate) return cmd_single(flags, false, out);
    if (*spectra) return cmd_single(flags, true, out);
    if (*sweep) return cmd_sweep(flags, out);
    return cmd_selftest(flags, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace ncdoa
