#include "tbf/scenario.hpp"

#include <fstream>
#include <set>

namespace tbf {

using nlohmann::json;

std::string to_string(Mode m) {
  switch (m) {
    case Mode::analytic: return "analytic";
    case Mode::simulate: return "simulate";
    case Mode::compare: return "compare";
    case Mode::count_states: return "count-states";
    case Mode::fixed_length: return "fixed-length";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  for (Mode m : {Mode::analytic, Mode::simulate, Mode::compare, Mode::count_states, Mode::fixed_length})
    if (to_string(m) == name) return m;
  throw ScenarioError("mode: unknown mode '" + name + "'");
}

bool Scenario::operator==(const Scenario& o) const {
  return name == o.name && traffic.sizes == o.traffic.sizes && traffic.probs == o.traffic.probs &&
         traffic.rate == o.traffic.rate && filter.bucket == o.filter.bucket && filter.buffer == o.filter.buffer &&
         filter.period == o.filter.period && mode == o.mode && simulation == o.simulation &&
         solver.tol == o.solver.tol && solver.max_iters == o.solver.max_iters &&
         solver.expm_tol == o.solver.expm_tol && count == o.count && output_dir == o.output_dir;
}

namespace {

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw ScenarioError(path + ": expected an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ScenarioError((path.empty() ? key : path + "." + key) + ": unknown key");
}

template <typename T>
T field(const json& obj, const std::string& path, const char* key) {
  const std::string where = path.empty() ? std::string(key) : path + "." + key;
  if (!obj.contains(key)) throw ScenarioError(where + ": missing");
  const json& v = obj.at(key);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ScenarioError(where + ": expected a string");
  } else if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) throw ScenarioError(where + ": expected a number");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ScenarioError(where + ": expected an integer");
    if constexpr (std::is_unsigned_v<T>)
      if (v.get<long long>() < 0) throw ScenarioError(where + ": must be non-negative");
  }
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ScenarioError(where + ": invalid value");
  }
}

template <typename T>
void optional_field(const json& obj, const std::string& path, const char* key, T& out) {
  if (obj.contains(key)) out = field<T>(obj, path, key);
}

}  // namespace

Scenario parse_scenario(const json& doc) {
  reject_unknown(doc, "", {"name", "traffic", "filter", "mode", "simulation", "solver", "count_states", "output"});
  Scenario s;
  optional_field(doc, "", "name", s.name);

  if (!doc.contains("traffic")) throw ScenarioError("traffic: missing");
  const json& t = doc.at("traffic");
  reject_unknown(t, "traffic", {"sizes", "probs", "rate"});
  s.traffic.sizes = field<std::vector<int>>(t, "traffic", "sizes");
  s.traffic.probs = field<std::vector<double>>(t, "traffic", "probs");
  s.traffic.rate = field<double>(t, "traffic", "rate");

  if (!doc.contains("filter")) throw ScenarioError("filter: missing");
  const json& f = doc.at("filter");
  reject_unknown(f, "filter", {"bucket", "buffer", "period"});
  s.filter.bucket = field<int>(f, "filter", "bucket");
  s.filter.buffer = field<int>(f, "filter", "buffer");
  if (f.contains("period")) s.filter.period = field<double>(f, "filter", "period");

  if (doc.contains("mode")) s.mode = parse_mode(field<std::string>(doc, "", "mode"));

  if (doc.contains("simulation")) {
    const json& sim = doc.at("simulation");
    reject_unknown(sim, "simulation", {"horizon", "warmup", "seed", "batches"});
    optional_field(sim, "simulation", "horizon", s.simulation.horizon);
    if (sim.contains("warmup")) s.simulation.warmup = field<std::uint64_t>(sim, "simulation", "warmup");
    optional_field(sim, "simulation", "seed", s.simulation.seed);
    optional_field(sim, "simulation", "batches", s.simulation.batches);
  }
  if (doc.contains("solver")) {
    const json& sol = doc.at("solver");
    reject_unknown(sol, "solver", {"tol", "max_iters", "expm_tol"});
    optional_field(sol, "solver", "tol", s.solver.tol);
    optional_field(sol, "solver", "max_iters", s.solver.max_iters);
    optional_field(sol, "solver", "expm_tol", s.solver.expm_tol);
  }
  if (doc.contains("count_states")) {
    const json& c = doc.at("count_states");
    reject_unknown(c, "count_states", {"min_bound", "max_bound"});
    optional_field(c, "count_states", "min_bound", s.count.min_bound);
    optional_field(c, "count_states", "max_bound", s.count.max_bound);
  }
  if (doc.contains("output")) {
    const json& o = doc.at("output");
    reject_unknown(o, "output", {"dir"});
    optional_field(o, "output", "dir", s.output_dir);
  }
  validate(s);
  return s;
}

void validate(const Scenario& s) {
  try {
    s.traffic.validate();
    s.filter.validate();
    if (s.mode == Mode::analytic || s.mode == Mode::simulate || s.mode == Mode::compare)
      validate_pairing(s.traffic, s.filter);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }
  if (s.mode == Mode::fixed_length && s.traffic.sizes != std::vector<int>{1})
    throw ScenarioError("traffic.sizes: fixed-length mode uses unit packets, expected [1]");
  if (s.simulation.horizon <= s.simulation.effective_warmup())
    throw ScenarioError("simulation.horizon: must exceed simulation.warmup");
  if (s.simulation.batches < 2) throw ScenarioError("simulation.batches: at least 2 batches required");
  if (!(s.solver.tol > 0.0)) throw ScenarioError("solver.tol: must be positive");
  if (!(s.solver.expm_tol > 0.0)) throw ScenarioError("solver.expm_tol: must be positive");
  if (s.solver.max_iters == 0) throw ScenarioError("solver.max_iters: must be positive");
  if (s.count.min_bound < 0 || s.count.max_bound < s.count.min_bound)
    throw ScenarioError("count_states.max_bound: need 0 <= min_bound <= max_bound");
}

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ScenarioError("scenario: cannot open " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario: malformed JSON: ") + e.what());
  }
  return parse_scenario(doc);
}

json to_json(const Scenario& s) {
  json sim = {{"horizon", s.simulation.horizon}, {"seed", s.simulation.seed}, {"batches", s.simulation.batches}};
  if (s.simulation.warmup) sim["warmup"] = *s.simulation.warmup;
  json doc = {
      {"traffic", {{"sizes", s.traffic.sizes}, {"probs", s.traffic.probs}, {"rate", s.traffic.rate}}},
      {"filter", {{"bucket", s.filter.bucket}, {"buffer", s.filter.buffer}, {"period", s.filter.period}}},
      {"mode", to_string(s.mode)},
      {"simulation", sim},
      {"solver", {{"tol", s.solver.tol}, {"max_iters", s.solver.max_iters}, {"expm_tol", s.solver.expm_tol}}},
      {"count_states", {{"min_bound", s.count.min_bound}, {"max_bound", s.count.max_bound}}},
      {"output", {{"dir", s.output_dir}}},
  };
  if (!s.name.empty()) doc["name"] = s.name;
  return doc;
}

}  // namespace tbf
