#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tbf/analysis.hpp"
#include "tbf/des.hpp"
#include "tbf/scenario.hpp"

namespace tbf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitSolver = 3;

struct RunOverrides {
  std::optional<Mode> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> horizon;
  std::optional<std::size_t> batches;
  std::optional<double> tol;
  std::optional<std::string> out;
};

/// Applies command-line overrides and re-validates.
Scenario apply_overrides(Scenario s, const RunOverrides& o);

/// Rounds to 12 significant digits, the precision of every emitted number.
double round12(double x);

/// Analytic against simulated statistics of one scenario.
struct ClassComparison {
  int size = 0;
  double analytic_loss = 0.0;
  Estimate simulated_loss;
  std::optional<double> analytic_wait;
  Estimate simulated_wait;
  double analytic_backlog = 0.0;
  Estimate simulated_backlog;

  bool loss_within_band() const;
  bool wait_within_band() const;
};

struct Comparison {
  double occupancy_tv = 0.0;
  std::vector<ClassComparison> classes;

  /// True when every analytic value lies inside its simulation band.
  bool agrees() const;
};

Comparison compare(const AnalyticReport& analytic, const SimStats& sim, const BatchEstimates& bands);

struct RunOutcome {
  int exit_code = kExitOk;
  nlohmann::json report;
  std::string error;
};

/// Executes one scenario, writing report.json and CSV tables into out_dir.
/// Never throws for validation or solver problems; those map to exit codes.
RunOutcome run_scenario(const Scenario& s, const std::filesystem::path& out_dir);

/// Cartesian product of {"axes": {"dotted.path": [values...]}}. No axes
/// means no points.
std::vector<nlohmann::json> expand_grid(const nlohmann::json& grid);

/// Replaces dotted-path fields of the scenario and re-parses it.
Scenario apply_point(const Scenario& base, const nlohmann::json& point);

/// Runs every grid point (concurrently when threads > 1) into
/// out_dir/point_NNNN and writes out_dir/index.json, which is returned.
nlohmann::json sweep(const Scenario& base, const nlohmann::json& grid, const std::filesystem::path& out_dir,
                     unsigned threads = 0);

}  // namespace tbf
