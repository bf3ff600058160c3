#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "tbf/analysis.hpp"
#include "tbf/statespace.hpp"

namespace tbf {

enum class Mode { analytic, simulate, compare, count_states, fixed_length };

std::string to_string(Mode m);
/// Throws ScenarioError for unknown names.
Mode parse_mode(const std::string& name);

struct SimulationSettings {
  std::uint64_t horizon = 1'000'000;
  std::optional<std::uint64_t> warmup;  // default: 10% of horizon
  std::uint64_t seed = 1;
  std::size_t batches = 10;

  std::uint64_t effective_warmup() const { return warmup.value_or(horizon / 10); }
  bool operator==(const SimulationSettings&) const = default;
};

struct CountSettings {
  int min_bound = 3;
  int max_bound = 10;
  bool operator==(const CountSettings&) const = default;
};

struct Scenario {
  std::string name;
  TrafficSpec traffic;
  FilterConfig filter;
  Mode mode = Mode::analytic;
  SimulationSettings simulation;
  SolverOptions solver;
  CountSettings count;
  std::string output_dir = "out";

  bool operator==(const Scenario& other) const;
};

/// Validation failure; the message starts with the offending field path.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Strict parse: unknown keys and ill-typed values are rejected.
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& file);
nlohmann::json to_json(const Scenario& s);

/// Checks the cross-field constraints that depend on the mode.
void validate(const Scenario& s);

}  // namespace tbf
