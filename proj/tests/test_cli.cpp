#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "tbf/runner.hpp"
#include "tbf/scenario.hpp"

using namespace tbf;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json base_doc() {
  return json::parse(R"({
    "name": "base",
    "traffic": {"sizes": [1, 2, 3, 4], "probs": [0.4, 0.3, 0.2, 0.1], "rate": 0.5},
    "filter": {"bucket": 5, "buffer": 5, "period": 1.0},
    "mode": "compare",
    "simulation": {"horizon": 20000, "seed": 1, "batches": 10}
  })");
}

fs::path scratch(const std::string& name) {
  static const auto stamp = std::random_device{}();
  const fs::path p = fs::temp_directory_path() / ("tbf_test_" + std::to_string(stamp)) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string first_line(const fs::path& file) {
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  return line;
}

std::string parse_error(const json& doc) {
  try {
    parse_scenario(doc);
  } catch (const ScenarioError& e) {
    return e.what();
  }
  return "";
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST_CASE("scenario parsing names the bad field") {
  CHECK(parse_error(base_doc()).empty());

  json d = base_doc();
  d["traffic"]["probs"] = {0.5, 0.3, 0.2, 0.1};
  CHECK(starts_with(parse_error(d), "traffic.probs"));

  d = base_doc();
  d["filter"]["bucket"] = 0;
  CHECK(starts_with(parse_error(d), "filter.bucket"));

  d = base_doc();
  d["filter"]["buffer"] = "five";
  CHECK(starts_with(parse_error(d), "filter.buffer"));

  d = base_doc();
  d["filter"]["buffer"] = 3;  // shorter than the largest packet
  CHECK_FALSE(parse_error(d).empty());

  d = base_doc();
  d["traffic"]["colour"] = "red";
  CHECK(starts_with(parse_error(d), "traffic.colour"));

  d = base_doc();
  d["extra"] = 1;
  CHECK(starts_with(parse_error(d), "extra"));

  d = base_doc();
  d["mode"] = "fast";
  CHECK(starts_with(parse_error(d), "mode"));

  d = base_doc();
  d.erase("traffic");
  CHECK(starts_with(parse_error(d), "traffic"));
}

TEST_CASE("scenario round trip") {
  Scenario s = parse_scenario(base_doc());
  CHECK(parse_scenario(to_json(s)) == s);
  s.simulation.warmup = 123;
  s.mode = Mode::count_states;
  s.count = {4, 7};
  s.solver.tol = 1e-11;
  CHECK(parse_scenario(to_json(s)) == s);
  CHECK(parse_mode(to_string(Mode::fixed_length)) == Mode::fixed_length);
  CHECK(to_string(Mode::count_states) == "count-states");
}

TEST_CASE("overrides") {
  const Scenario s = parse_scenario(base_doc());
  RunOverrides o;
  o.mode = Mode::analytic;
  o.seed = 7;
  o.horizon = 5000;
  o.batches = 5;
  o.tol = 1e-9;
  const Scenario t = apply_overrides(s, o);
  CHECK(t.mode == Mode::analytic);
  CHECK(t.simulation.seed == 7);
  CHECK(t.simulation.effective_warmup() == 500);
  CHECK(t.simulation.batches == 5);
  CHECK(t.solver.tol == 1e-9);
}

TEST_CASE("compare run writes the report and tables") {
  const auto dir = scratch("compare");
  const RunOutcome r = run_scenario(parse_scenario(base_doc()), dir);
  REQUIRE(r.exit_code == kExitOk);
  const std::string status = r.report.at("status");
  CHECK((status == "agree" || status == "disagree"));
  CHECK(r.report.at("diagnostics").at("states") == 186);
  CHECK(r.report.at("diagnostics").at("residual").get<double>() <= 1e-10);
  CHECK(r.report.at("comparison").at("occupancy_tv").get<double>() < 0.05);
  CHECK(parse_scenario(r.report.at("scenario")) == parse_scenario(base_doc()));

  std::ifstream in(dir / "report.json");
  CHECK(json::parse(in) == r.report);
  CHECK(first_line(dir / "occupancy.csv") == "tokens,backlog,analytic,simulated,simulated_half_width");
  CHECK(first_line(dir / "loss.csv") == "class,size,prob,analytic,simulated,simulated_half_width,abs_delta");
  CHECK(first_line(dir / "waiting.csv") ==
        "class,size,analytic_backlog,analytic_wait,simulated_backlog,simulated_wait,simulated_half_width,abs_delta,"
        "rel_delta");

  std::ifstream occ(dir / "occupancy.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(occ, line);
  while (std::getline(occ, line)) ++rows;
  CHECK(rows == 36);
}

TEST_CASE("analytic and simulate modes") {
  json d = base_doc();
  d["mode"] = "analytic";
  auto r = run_scenario(parse_scenario(d), scratch("analytic"));
  CHECK(r.exit_code == kExitOk);
  CHECK(r.report.at("status") == "ok");
  CHECK(r.report.contains("analytic"));
  CHECK_FALSE(r.report.contains("simulation"));
  for (const auto& c : r.report.at("analytic").at("classes")) {
    CHECK(c.at("loss").get<double>() >= 0.0);
    CHECK(c.at("loss").get<double>() <= 1.0);
  }

  d["mode"] = "simulate";
  r = run_scenario(parse_scenario(d), scratch("simulate"));
  CHECK(r.exit_code == kExitOk);
  CHECK(r.report.contains("simulation"));
  CHECK_FALSE(r.report.contains("analytic"));
}

TEST_CASE("count-states table") {
  json d = base_doc();
  d["mode"] = "count-states";
  d["filter"]["buffer"] = 10;
  const auto dir = scratch("count");
  const auto r = run_scenario(parse_scenario(d), dir);
  REQUIRE(r.exit_code == kExitOk);
  CHECK(first_line(dir / "states.csv") == "bound,counted,enumerated,estimated,state_space");
  const auto& rows = r.report.at("state_counts");
  REQUIRE(rows.size() == 8);
  CHECK(rows.back().at("bound") == 10);
  CHECK(rows.back().at("counted") == 833);
  CHECK(rows.back().at("enumerated") == 833);
}

TEST_CASE("fixed-length comparison") {
  json d = base_doc();
  d["mode"] = "fixed-length";
  d["traffic"] = {{"sizes", {1}}, {"probs", {1.0}}, {"rate", 0.5}};
  const auto dir = scratch("fixed");
  const auto r = run_scenario(parse_scenario(d), dir);
  REQUIRE(r.exit_code == kExitOk);
  CHECK(r.report.at("fixed_length").at("max_abs_full_state_vs_periodic").get<double>() <= 1e-8);
  CHECK(r.report.at("fixed_length").at("tv_periodic_vs_md1").get<double>() > 1e-3);
  CHECK(first_line(dir / "fixed_length.csv") == "backlog,periodic_transfer,md1,full_state");

  d["traffic"] = base_doc()["traffic"];
  CHECK_FALSE(parse_error(d).empty());
}

TEST_CASE("grids") {
  CHECK(expand_grid(json::object()).empty());
  CHECK(expand_grid(json{{"axes", json::object()}}).empty());
  CHECK_THROWS_AS(expand_grid(json{{"points", 1}}), ScenarioError);
  const auto pts = expand_grid(json::parse(R"({"axes": {"traffic.rate": [1, 2], "filter.bucket": [3, 4, 5]}})"));
  CHECK(pts.size() == 6);

  const Scenario s = apply_point(parse_scenario(base_doc()), json{{"filter.bucket", 7}});
  CHECK(s.filter.bucket == 7);
  CHECK_THROWS_AS(apply_point(parse_scenario(base_doc()), json{{"traffic.rate", -1}}), ScenarioError);
}

TEST_CASE("sweeps") {
  json d = base_doc();
  d["mode"] = "analytic";
  const Scenario base = parse_scenario(d);

  SUBCASE("empty grid") {
    const auto dir = scratch("sweep_empty");
    const auto index = sweep(base, json{{"axes", json::object()}}, dir);
    CHECK(index.at("count") == 0);
    CHECK(index.at("points").empty());
    CHECK(fs::exists(dir / "index.json"));
  }
  SUBCASE("four loads") {
    const auto dir = scratch("sweep_loads");
    const auto index = sweep(base, json::parse(R"({"axes": {"traffic.rate": [0.25, 0.5, 1, 5]}})"), dir, 2);
    REQUIRE(index.at("count") == 4);
    for (const auto& p : index.at("points")) {
      CHECK(p.at("exit_code") == 0);
      CHECK(fs::exists(dir / p.at("dir").get<std::string>() / "report.json"));
    }
  }
  SUBCASE("bad points are isolated") {
    const auto dir = scratch("sweep_bad");
    const auto index = sweep(base, json::parse(R"({"axes": {"traffic.rate": [0.5, -1]}})"), dir, 1);
    CHECK(index.at("points")[0].at("exit_code") == 0);
    CHECK(index.at("points")[1].at("exit_code") == kExitInvalid);
    CHECK(index.at("points")[1].at("status") == "failed");
  }
}

TEST_CASE("solver failure maps to its exit code") {
  json d = base_doc();
  d["mode"] = "analytic";
  d["solver"] = {{"max_iters", 2}};
  const auto r = run_scenario(parse_scenario(d), scratch("diverge"));
  CHECK(r.exit_code == kExitSolver);
  CHECK(r.report.at("status") == "failed");
  CHECK(r.report.at("diagnostics").contains("residual"));
}

TEST_CASE("command line exit codes") {
  const fs::path tool = fs::path(TBF_TOOLS_DIR) / "tbf";
  REQUIRE(fs::exists(tool));
  const auto dir = scratch("cli");
  auto run = [&](const std::string& args) {
    const int rc = std::system(("\"" + tool.string() + "\" " + args + " > \"" + (dir / "log.txt").string() +
                                "\" 2>&1").c_str());
    return WEXITSTATUS(rc);
  };
  json bad = base_doc();
  bad["traffic"]["probs"] = {0.9, 0.3, 0.2, 0.1};
  std::ofstream(dir / "bad.json") << bad.dump();
  json good = base_doc();
  good["mode"] = "analytic";
  std::ofstream(dir / "good.json") << good.dump();

  CHECK(run("run \"" + (dir / "good.json").string() + "\" --out \"" + (dir / "good").string() + "\"") == kExitOk);
  CHECK(fs::exists(dir / "good" / "report.json"));
  CHECK(run("run \"" + (dir / "bad.json").string() + "\" --out \"" + (dir / "bad").string() + "\"") == kExitInvalid);
  std::ifstream log(dir / "log.txt");
  std::stringstream text;
  text << log.rdbuf();
  CHECK(text.str().find("traffic.probs") != std::string::npos);
  CHECK(run("run \"" + (dir / "missing.json").string() + "\"") != kExitOk);
  CHECK(run("frobnicate") == kExitUsage);
}
