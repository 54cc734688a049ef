#include "ncdoa/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ncdoa/errors.hpp"

namespace ncdoa {

namespace {

using nlohmann::json;

// A JSON object plus its dotted path. Keys are marked as read so that
// leftovers can be reported as unknown.
class Block {
 public:
  Block(const json& value, std::string path) : value_(value), path_(std::move(path)) {
    if (!value_.is_object()) fail(path_, "expected an object");
  }
  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return value_.contains(key); }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = value_.find(key);
    return it == value_.end() ? nullptr : &*it;
  }

  std::optional<Block> block(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return Block(*v, key_path(key));
  }

  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) fail(key_path(key), "expected a number");
    return v->get<double>();
  }
  std::optional<double> number(const std::string& key) {
    if (!has(key)) {
      seen_.insert(key);
      return std::nullopt;
    }
    return number(key, 0.0);
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
      fail(key_path(key), "expected a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }

  int integer(const std::string& key, int fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(key_path(key), "expected an integer");
    return v->get<int>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(key_path(key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) fail(key_path(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json* v = find(key);
    if (!v) fail(key_path(key), "required field is missing");
    if (!v->is_array()) fail(key_path(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) {
        fail(key_path(key) + "[" + std::to_string(i) + "]", "expected a number");
      }
      out.push_back((*v)[i].get<double>());
    }
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key) {
    const json* v = find(key);
    if (!v) fail(key_path(key), "required field is missing");
    if (!v->is_array()) fail(key_path(key), "expected an array of integers");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number_unsigned()) {
        fail(key_path(key) + "[" + std::to_string(i) + "]",
             "expected a non-negative integer");
      }
      out.push_back((*v)[i].get<std::size_t>());
    }
    return out;
  }

  // Throws on the first key that was never read.
  void finish() const {
    for (auto it = value_.begin(); it != value_.end(); ++it) {
      if (!seen_.count(it.key())) fail(key_path(it.key()), "unknown field");
    }
  }

 private:
  const json& value_;
  std::string path_;
  std::set<std::string> seen_;
};

ArrayGeometry parse_geometry(Block& b) {
  const bool explicit_elements = b.has("elements");
  const std::string kind = b.string("kind", explicit_elements ? "elements" : "ula");
  const std::vector<std::size_t> partition = b.counts("partition");
  if (kind == "ula") {
    if (explicit_elements) {
      Block::fail(b.key_path("elements"), "not allowed with kind \"ula\"");
    }
    const std::uint64_t n = b.count("num_elements", 0);
    if (n == 0) Block::fail(b.key_path("num_elements"), "must be >= 1");
    const double spacing = b.number("spacing_wavelengths", 0.5);
    b.finish();
    return make_ula(n, spacing, partition);
  }
  if (kind != "elements") {
    Block::fail(b.key_path("kind"), "expected \"ula\" or \"elements\"");
  }
  const json* elems = b.find("elements");
  if (!elems || !elems->is_array()) {
    Block::fail(b.key_path("elements"), "expected an array of [x, y] pairs");
  }
  std::vector<Position> positions;
  for (std::size_t i = 0; i < elems->size(); ++i) {
    const json& e = (*elems)[i];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
      Block::fail(b.key_path("elements") + "[" + std::to_string(i) + "]",
                  "expected [x, y] in wavelengths");
    }
    positions.push_back({e[0].get<double>(), e[1].get<double>()});
  }
  b.finish();
  return ArrayGeometry(std::move(positions), partition);
}

Scenario parse_scenario(Block& root) {
  auto geometry_block = root.block("geometry");
  if (!geometry_block) Block::fail("geometry", "required block is missing");
  Scenario scenario{.geometry = parse_geometry(*geometry_block)};

  auto sources = root.block("sources");
  if (!sources) Block::fail("sources", "required block is missing");
  scenario.source_doas = sources->numbers("doas_deg");
  if (sources->has("powers")) {
    scenario.source_powers = sources->numbers("powers");
  } else {
    scenario.source_powers.assign(scenario.source_doas.size(), 1.0);
  }
  sources->finish();

  if (auto noise = root.block("noise")) {
    if (noise->has("snr_db") && noise->has("variance")) {
      Block::fail("noise", "give either snr_db or variance, not both");
    }
    scenario.snr_db = noise->number("snr_db", scenario.snr_db);
    scenario.noise_variance_override = noise->number("variance");
    noise->finish();
  }

  if (auto phases = root.block("phases")) {
    const std::string mode = phases->string("mode", "random");
    if (mode == "fixed") {
      scenario.phase_mode = phases->numbers("values_rad");
    } else if (mode != "random") {
      Block::fail("phases.mode", "expected \"random\" or \"fixed\"");
    }
    phases->finish();
  }
  return scenario;
}

void parse_solver(Block& b, SolverOptions& o) {
  o.max_iterations = b.integer("max_iterations", o.max_iterations);
  o.penalty = b.number("penalty", o.penalty);
  o.relaxation = b.number("relaxation", o.relaxation);
  o.adapt_penalty = b.boolean("adapt_penalty", o.adapt_penalty);
  o.penalty_factor = b.number("penalty_factor", o.penalty_factor);
  o.balance_ratio = b.number("balance_ratio", o.balance_ratio);
  o.balance_interval = b.integer("balance_interval", o.balance_interval);
  o.primal_tol = b.number("primal_tol", o.primal_tol);
  o.dual_tol = b.number("dual_tol", o.dual_tol);
  o.abs_tol = b.number("abs_tol", o.abs_tol);
  o.feasibility_tol = b.number("feasibility_tol", o.feasibility_tol);
  o.stagnation_window = b.integer("stagnation_window", o.stagnation_window);
  o.stagnation_tol = b.number("stagnation_tol", o.stagnation_tol);
  const std::string sparse =
      b.string("sparse_solver", std::string(to_string(o.sparse_solver)));
  if (sparse == "interior_point") {
    o.sparse_solver = SparseSolver::kInteriorPoint;
  } else if (sparse == "admm") {
    o.sparse_solver = SparseSolver::kAdmm;
  } else {
    Block::fail(b.key_path("sparse_solver"), "expected \"interior_point\" or \"admm\"");
  }
  o.interior_point_max_iterations =
      b.integer("interior_point_max_iterations", o.interior_point_max_iterations);
  o.interior_point_tol = b.number("interior_point_tol", o.interior_point_tol);
  b.finish();
}

}  // namespace

SweepConfig parse_sweep_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON (") + e.what() + ")");
  }
  Block root(doc, "");
  SweepConfig config{.scenario = parse_scenario(root)};

  double start = -60.0, stop = 60.0, step = 0.5;
  if (auto grid = root.block("grid")) {
    if (grid->has("angles_deg")) {
      for (const char* key : {"start_deg", "stop_deg", "step_deg"}) {
        if (grid->has(key)) {
          Block::fail(grid->key_path(key), "not allowed together with angles_deg");
        }
      }
      config.grid_degrees = grid->numbers("angles_deg");
    } else {
      start = grid->number("start_deg", start);
      stop = grid->number("stop_deg", stop);
      step = grid->number("step_deg", step);
    }
    grid->finish();
  }
  if (config.grid_degrees.empty()) {
    config.grid_degrees = make_uniform_grid(start, stop, step);
  }

  if (auto est = root.block("estimator")) {
    config.mu = est->number("mu", config.mu);
    config.c = est->number("C", config.c);
    config.assumed_noise_variance = est->number("noise_variance");
    est->finish();
  }
  if (auto solver = root.block("solver")) parse_solver(*solver, config.solver);
  if (auto music = root.block("music")) {
    config.music.smoothing_length =
        music->count("smoothing_length", config.music.smoothing_length);
    config.music.forward_backward =
        music->boolean("forward_backward", config.music.forward_backward);
    music->finish();
  }

  config.snr_grid_db = {config.scenario.snr_db};
  if (auto sweep = root.block("sweep")) {
    if (sweep->has("snr_db")) config.snr_grid_db = sweep->numbers("snr_db");
    config.n_trials = sweep->count("n_trials", config.n_trials);
    if (const json* methods = sweep->find("methods")) {
      if (!methods->is_array()) {
        Block::fail("sweep.methods", "expected an array of method names");
      }
      config.methods.clear();
      for (std::size_t i = 0; i < methods->size(); ++i) {
        const json& m = (*methods)[i];
        if (!m.is_string()) {
          Block::fail("sweep.methods[" + std::to_string(i) + "]", "expected a string");
        }
        try {
          config.methods.push_back(parse_method(m.get<std::string>()));
        } catch (const ConfigError& e) {
          Block::fail("sweep.methods[" + std::to_string(i) + "]", e.what());
        }
      }
    }
    config.base_seed = sweep->count("base_seed", config.base_seed);
    config.persist_spectra = sweep->boolean("persist_spectra", config.persist_spectra);
    config.threads = sweep->count("threads", config.threads);
    sweep->finish();
  }
  root.finish();
  config.validate();
  return config;
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_sweep_config(text.str());
}

std::string sweep_config_to_json(const SweepConfig& config) {
  const Scenario& sc = config.scenario;
  if (!sc.geometry.is_omnidirectional()) {
    throw UnsupportedGeometry("config: element patterns cannot be serialized");
  }
  if (sc.fixed_amplitudes) {
    throw ConfigError("config: pinned source amplitudes cannot be serialized");
  }
  json elements = json::array();
  for (const Position& p : sc.geometry.elements()) elements.push_back({p.x, p.y});
  json partition = json::array();
  for (const IndexRange& r : sc.geometry.partition()) partition.push_back(r.size);

  json doc;
  doc["geometry"] = {{"kind", "elements"}, {"elements", elements}, {"partition", partition}};
  doc["sources"] = {{"doas_deg", sc.source_doas}, {"powers", sc.source_powers}};
  if (sc.noise_variance_override) {
    doc["noise"] = {{"variance", *sc.noise_variance_override}};
  } else {
    doc["noise"] = {{"snr_db", sc.snr_db}};
  }
  if (const auto* fixed = std::get_if<std::vector<double>>(&sc.phase_mode)) {
    doc["phases"] = {{"mode", "fixed"}, {"values_rad", *fixed}};
  } else {
    doc["phases"] = {{"mode", "random"}};
  }
  // Explicit angles: recomputing a step could move grid points by an ulp.
  doc["grid"] = {{"angles_deg", config.grid_degrees}};
  doc["estimator"] = {{"mu", config.mu}, {"C", config.c}};
  if (config.assumed_noise_variance) {
    doc["estimator"]["noise_variance"] = *config.assumed_noise_variance;
  }
  const SolverOptions& o = config.solver;
  doc["solver"] = {{"max_iterations", o.max_iterations},
                   {"penalty", o.penalty},
                   {"relaxation", o.relaxation},
                   {"adapt_penalty", o.adapt_penalty},
                   {"penalty_factor", o.penalty_factor},
                   {"balance_ratio", o.balance_ratio},
                   {"balance_interval", o.balance_interval},
                   {"primal_tol", o.primal_tol},
                   {"dual_tol", o.dual_tol},
                   {"abs_tol", o.abs_tol},
                   {"feasibility_tol", o.feasibility_tol},
                   {"stagnation_window", o.stagnation_window},
                   {"stagnation_tol", o.stagnation_tol},
                   {"sparse_solver", std::string(to_string(o.sparse_solver))},
                   {"interior_point_max_iterations", o.interior_point_max_iterations},
                   {"interior_point_tol", o.interior_point_tol}};
  doc["music"] = {{"smoothing_length", config.music.smoothing_length},
                  {"forward_backward", config.music.forward_backward}};
  json methods = json::array();
  for (Method m : config.methods) methods.push_back(std::string(to_string(m)));
  doc["sweep"] = {{"snr_db", config.snr_grid_db},
                  {"n_trials", config.n_trials},
                  {"methods", methods},
                  {"base_seed", config.base_seed},
                  {"persist_spectra", config.persist_spectra},
                  {"threads", config.threads}};
  return doc.dump(2) + "\n";
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ncdoa
