// Command line front end: `tbf run` and `tbf sweep`.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tbf/runner.hpp"

namespace {

int report_outcome(const tbf::RunOutcome& r, const std::filesystem::path& dir) {
  if (r.exit_code != tbf::kExitOk) {
    std::cerr << "error: " << r.error << '\n';
    return r.exit_code;
  }
  std::cout << "status: " << r.report.value("status", "ok") << '\n';
  if (r.report.contains("diagnostics")) std::cout << "diagnostics: " << r.report["diagnostics"].dump() << '\n';
  if (r.report.contains("comparison"))
    std::cout << "occupancy TV distance: " << r.report["comparison"]["occupancy_tv"] << '\n';
  std::cout << "report: " << (dir / "report.json").string() << '\n';
  return tbf::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Token bucket filter performance analysis"};
  app.require_subcommand(1);

  std::string scenario_file;
  std::string mode;
  std::string out;
  std::uint64_t seed = 0;
  std::uint64_t horizon = 0;
  std::size_t batches = 0;
  double tol = 0.0;

  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("scenario", scenario_file, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory (default: scenario output.dir)");
  run->add_option("--mode", mode, "analytic | simulate | compare | count-states | fixed-length");
  run->add_option("--seed", seed, "Simulation seed");
  run->add_option("--horizon", horizon, "Simulated replenishment periods (warmup resets to 10%)");
  run->add_option("--batches", batches, "Batch count for confidence intervals");
  run->add_option("--tol", tol, "Stationary residual tolerance");

  std::string grid_file;
  auto* sweep = app.add_subcommand("sweep", "Run a scenario over a parameter grid");
  sweep->add_option("scenario", scenario_file, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--grid", grid_file, "Grid JSON file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "Output directory (default: scenario output.dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? tbf::kExitOk : tbf::kExitUsage;
  }

  try {
    tbf::Scenario scenario = tbf::load_scenario(scenario_file);
    if (*run) {
      tbf::RunOverrides o;
      if (!mode.empty()) o.mode = tbf::parse_mode(mode);
      if (run->count("--seed")) o.seed = seed;
      if (run->count("--horizon")) o.horizon = horizon;
      if (run->count("--batches")) o.batches = batches;
      if (run->count("--tol")) o.tol = tol;
      if (!out.empty()) o.out = out;
      scenario = tbf::apply_overrides(std::move(scenario), o);
      const std::filesystem::path dir = scenario.output_dir;
      return report_outcome(tbf::run_scenario(scenario, dir), dir);
    }
    std::ifstream in(grid_file);
    const auto grid = nlohmann::json::parse(in);
    const std::filesystem::path dir = out.empty() ? scenario.output_dir : out;
    const auto index = tbf::sweep(scenario, grid, dir);
    std::size_t failed = 0;
    for (const auto& p : index["points"])
      if (p.value("exit_code", 0) != 0) ++failed;
    std::cout << "points: " << index["count"] << ", failed: " << failed << '\n'
              << "index: " << (dir / "index.json").string() << '\n';
    return tbf::kExitOk;
  } catch (const tbf::ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return tbf::kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return tbf::kExitUsage;
  }
}
