#include "tbf/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

namespace tbf {

using nlohmann::json;
namespace fs = std::filesystem;

Scenario apply_overrides(Scenario s, const RunOverrides& o) {
  if (o.mode) s.mode = *o.mode;
  if (o.seed) s.simulation.seed = *o.seed;
  if (o.horizon) {
    s.simulation.horizon = *o.horizon;
    s.simulation.warmup.reset();
  }
  if (o.batches) s.simulation.batches = *o.batches;
  if (o.tol) s.solver.tol = *o.tol;
  if (o.out) s.output_dir = *o.out;
  validate(s);
  return s;
}

double round12(double x) {
  if (!std::isfinite(x)) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

bool ClassComparison::loss_within_band() const {
  return std::abs(analytic_loss - simulated_loss.mean) <= simulated_loss.half_width;
}

bool ClassComparison::wait_within_band() const {
  if (!analytic_wait) return std::isnan(simulated_wait.mean);
  return std::abs(*analytic_wait - simulated_wait.mean) <= simulated_wait.half_width;
}

bool Comparison::agrees() const {
  for (const auto& c : classes)
    if (!c.loss_within_band() || !c.wait_within_band()) return false;
  return true;
}

Comparison compare(const AnalyticReport& analytic, const SimStats& sim, const BatchEstimates& bands) {
  Comparison out;
  out.occupancy_tv = total_variation(analytic.occupancy.cells, sim.occupancy_distribution());
  for (std::size_t k = 0; k < analytic.classes.size(); ++k) {
    const auto& a = analytic.classes[k];
    out.classes.push_back({a.size, a.loss, bands.classes[k].loss, a.wait, bands.classes[k].wait, a.backlog,
                           bands.classes[k].backlog});
  }
  return out;
}

namespace {

std::string num(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

json jnum(double x) {
  if (!std::isfinite(x)) return nullptr;
  return round12(x);
}

json jopt(const std::optional<double>& x) { return x ? jnum(*x) : json(nullptr); }

json jest(const Estimate& e) { return {{"mean", jnum(e.mean)}, {"half_width", jnum(e.half_width)}}; }

class Csv {
 public:
  Csv(const fs::path& file, const std::string& header) : out_(file) {
    if (!out_) throw std::runtime_error("cannot write " + file.string());
    out_ << header << '\n';
  }
  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cells, first = false), ...);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

json grid_json(const Vector& cells, int bucket, int buffer) {
  json rows = json::array();
  for (int t = 0; t <= bucket; ++t) {
    json row = json::array();
    for (int b = 0; b <= buffer; ++b)
      row.push_back(jnum(cells[static_cast<std::size_t>(t) * static_cast<std::size_t>(buffer + 1) +
                               static_cast<std::size_t>(b)]));
    rows.push_back(row);
  }
  return rows;
}

struct Pipelines {
  std::optional<AnalyticReport> analytic;
  std::optional<SimStats> sim;
  std::optional<BatchEstimates> bands;
};

void write_tables(const Scenario& s, const Pipelines& p, const fs::path& dir) {
  const int m = s.filter.bucket;
  const int l = s.filter.buffer;
  const Vector sim_occ = p.sim ? p.sim->occupancy_distribution() : Vector{};
  {
    Csv csv(dir / "occupancy.csv", "tokens,backlog,analytic,simulated,simulated_half_width");
    for (int t = 0; t <= m; ++t)
      for (int b = 0; b <= l; ++b) {
        const auto c = static_cast<std::size_t>(t) * static_cast<std::size_t>(l + 1) + static_cast<std::size_t>(b);
        csv.row(t, b, p.analytic ? num(p.analytic->occupancy.cells[c]) : "", p.sim ? num(sim_occ[c]) : "",
                p.bands ? num(p.bands->occupancy[c].half_width) : "");
      }
  }
  {
    Csv csv(dir / "loss.csv", "class,size,prob,analytic,simulated,simulated_half_width,abs_delta");
    for (std::size_t k = 0; k < s.traffic.classes(); ++k) {
      const std::string a = p.analytic ? num(p.analytic->classes[k].loss) : "";
      const std::string sm = p.bands ? num(p.bands->classes[k].loss.mean) : "";
      const std::string hw = p.bands ? num(p.bands->classes[k].loss.half_width) : "";
      const std::string d =
          p.analytic && p.bands ? num(std::abs(p.analytic->classes[k].loss - p.bands->classes[k].loss.mean)) : "";
      csv.row(k, s.traffic.sizes[k], num(s.traffic.probs[k]), a, sm, hw, d);
    }
  }
  {
    Csv csv(dir / "waiting.csv",
            "class,size,analytic_backlog,analytic_wait,simulated_backlog,simulated_wait,simulated_half_width,"
            "abs_delta,rel_delta");
    for (std::size_t k = 0; k < s.traffic.classes(); ++k) {
      std::string ab, aw, sb, sw, hw, ad, rd;
      if (p.analytic) {
        ab = num(p.analytic->classes[k].backlog);
        if (p.analytic->classes[k].wait) aw = num(*p.analytic->classes[k].wait);
      }
      if (p.bands) {
        sb = num(p.bands->classes[k].backlog.mean);
        sw = num(p.bands->classes[k].wait.mean);
        hw = num(p.bands->classes[k].wait.half_width);
      }
      if (p.analytic && p.bands && p.analytic->classes[k].wait) {
        const double delta = std::abs(*p.analytic->classes[k].wait - p.bands->classes[k].wait.mean);
        ad = num(delta);
        rd = num(delta / std::abs(p.bands->classes[k].wait.mean));
      }
      csv.row(k, s.traffic.sizes[k], ab, aw, sb, sw, hw, ad, rd);
    }
  }
}

json analytic_json(const AnalyticReport& a, const Scenario& s) {
  json classes = json::array();
  for (const auto& c : a.classes)
    classes.push_back({{"size", c.size},
                       {"prob", jnum(c.prob)},
                       {"loss", jnum(c.loss)},
                       {"backlog", jnum(c.backlog)},
                       {"wait", jopt(c.wait)},
                       {"throughput", jnum(c.throughput)}});
  return {{"occupancy", grid_json(a.occupancy.cells, s.filter.bucket, s.filter.buffer)}, {"classes", classes}};
}

json simulation_json(const SimStats& sim, const BatchEstimates& bands, const Scenario& s) {
  json classes = json::array();
  for (std::size_t k = 0; k < sim.classes; ++k) {
    const double little = sim.accepted_rate(k) * sim.mean_wait(k);
    classes.push_back({{"size", s.traffic.sizes[k]},
                       {"arrivals", sim.total.arrivals[k]},
                       {"losses", sim.total.losses[k]},
                       {"loss", jest(bands.classes[k].loss)},
                       {"wait", jest(bands.classes[k].wait)},
                       {"backlog", jest(bands.classes[k].backlog)},
                       {"little_rate_times_wait", jnum(little)}});
  }
  return {{"horizon", s.simulation.horizon},
          {"warmup", s.simulation.effective_warmup()},
          {"seed", s.simulation.seed},
          {"batches", bands.batches},
          {"events", sim.events},
          {"occupancy", grid_json(sim.occupancy_distribution(), s.filter.bucket, s.filter.buffer)},
          {"classes", classes}};
}

json comparison_json(const Comparison& c) {
  json classes = json::array();
  for (const auto& k : c.classes) {
    const double loss_delta = std::abs(k.analytic_loss - k.simulated_loss.mean);
    json wait = {{"analytic", jopt(k.analytic_wait)},
                 {"simulated", jnum(k.simulated_wait.mean)},
                 {"half_width", jnum(k.simulated_wait.half_width)},
                 {"within_band", k.wait_within_band()}};
    if (k.analytic_wait) {
      const double d = std::abs(*k.analytic_wait - k.simulated_wait.mean);
      wait["abs_delta"] = jnum(d);
      wait["rel_delta"] = jnum(d / std::abs(k.simulated_wait.mean));
    }
    classes.push_back({{"size", k.size},
                       {"loss",
                        {{"analytic", jnum(k.analytic_loss)},
                         {"simulated", jnum(k.simulated_loss.mean)},
                         {"half_width", jnum(k.simulated_loss.half_width)},
                         {"abs_delta", jnum(loss_delta)},
                         {"rel_delta", jnum(k.simulated_loss.mean != 0.0 ? loss_delta / k.simulated_loss.mean : NAN)},
                         {"within_band", k.loss_within_band()}}},
                       {"wait", wait}});
  }
  return {{"occupancy_tv", jnum(c.occupancy_tv)}, {"classes", classes}, {"agrees", c.agrees()}};
}

SimOptions sim_options(const Scenario& s) {
  SimOptions o;
  o.horizon = s.simulation.horizon;
  o.warmup = s.simulation.effective_warmup();
  o.seed = s.simulation.seed;
  return o;
}

void run_count_states(const Scenario& s, json& report, const fs::path& dir) {
  Csv csv(dir / "states.csv", "bound,counted,enumerated,estimated,state_space");
  json rows = json::array();
  for (int bound = s.count.min_bound; bound <= s.count.max_bound; ++bound) {
    const std::uint64_t counted = count_strings(s.traffic.sizes, bound);
    const double estimated = cardinality_bound(s.traffic.sizes, bound);
    json row = {{"bound", bound}, {"counted", counted}, {"estimated", jnum(estimated)},
                {"state_space", counted * static_cast<std::uint64_t>(s.filter.bucket + 1)}};
    std::string enumerated;
    if (counted <= 1'000'000) {
      const auto n = enumerate_strings(s.traffic.sizes, bound).size();
      row["enumerated"] = n;
      enumerated = std::to_string(n);
    }
    csv.row(bound, counted, enumerated, num(estimated), counted * static_cast<std::uint64_t>(s.filter.bucket + 1));
    rows.push_back(row);
  }
  report["state_counts"] = rows;
}

void run_fixed_length(const Scenario& s, json& report, const fs::path& dir) {
  const int l = s.filter.buffer;
  const int m = s.filter.bucket;
  const double load = s.traffic.rate * s.filter.period;
  const auto pt = chain_stationary(build_fixed_chain(load, l, m), 0, s.solver.tol, s.solver.max_iters);
  const auto md1 = chain_stationary(build_md1_chain(load, l, m), 0, s.solver.tol, s.solver.max_iters);
  const Model model(s.traffic, s.filter);
  const auto full = solve_stationary(model, s.solver);
  const Vector q_pt = map_s_to_q(pt.pi, l, m);
  const Vector q_md1 = map_s_to_q(md1.pi, l, m);
  const Vector q_full = backlog_marginal(model.space, full.pi);

  Csv csv(dir / "fixed_length.csv", "backlog,periodic_transfer,md1,full_state");
  double max_dev = 0.0;
  for (int q = 0; q <= l; ++q) {
    const auto i = static_cast<std::size_t>(q);
    csv.row(q, num(q_pt[i]), num(q_md1[i]), num(q_full[i]));
    max_dev = std::max(max_dev, std::abs(q_pt[i] - q_full[i]));
  }
  auto rounded = [](const Vector& v) {
    json a = json::array();
    for (double x : v) a.push_back(jnum(x));
    return a;
  };
  report["fixed_length"] = {{"load", jnum(load)},
                            {"periodic_transfer_s", rounded(pt.pi)},
                            {"md1_s", rounded(md1.pi)},
                            {"periodic_transfer_q", rounded(q_pt)},
                            {"md1_q", rounded(q_md1)},
                            {"full_state_q", rounded(q_full)},
                            {"tv_periodic_vs_md1", jnum(total_variation(pt.pi, md1.pi))},
                            {"max_abs_full_state_vs_periodic", jnum(max_dev)}};
}

}  // namespace

RunOutcome run_scenario(const Scenario& s, const fs::path& out_dir) {
  RunOutcome outcome;
  json& report = outcome.report;
  report["scenario"] = to_json(s);
  const auto started = std::chrono::steady_clock::now();
  try {
    validate(s);
    fs::create_directories(out_dir);
    json diagnostics;
    Pipelines p;
    switch (s.mode) {
      case Mode::count_states:
        run_count_states(s, report, out_dir);
        break;
      case Mode::fixed_length:
        run_fixed_length(s, report, out_dir);
        break;
      case Mode::analytic:
      case Mode::simulate:
      case Mode::compare: {
        if (s.mode != Mode::simulate) {
          const Model model(s.traffic, s.filter);
          p.analytic = analyze(model, s.solver);
          diagnostics["states"] = model.space.size();
          diagnostics["strings"] = model.space.string_count();
          diagnostics["iterations"] = p.analytic->stationary.iterations;
          diagnostics["residual"] = p.analytic->stationary.residual;
          diagnostics["error_bound"] = p.analytic->error_bound;
          report["analytic"] = analytic_json(*p.analytic, s);
        }
        if (s.mode != Mode::analytic) {
          p.sim = simulate(s.traffic, s.filter, sim_options(s));
          p.bands = batch_confidence(*p.sim, s.simulation.batches);
          report["simulation"] = simulation_json(*p.sim, *p.bands, s);
        }
        if (s.mode == Mode::compare) {
          const Comparison c = compare(*p.analytic, *p.sim, *p.bands);
          report["comparison"] = comparison_json(c);
          report["status"] = c.agrees() ? "agree" : "disagree";
        }
        write_tables(s, p, out_dir);
        break;
      }
    }
    if (!report.contains("status")) report["status"] = "ok";
    diagnostics["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report["diagnostics"] = diagnostics;
  } catch (const ScenarioError& e) {
    outcome = {kExitInvalid, report, e.what()};
  } catch (const std::invalid_argument& e) {
    outcome = {kExitInvalid, report, e.what()};
  } catch (const ConvergenceError& e) {
    outcome = {kExitSolver, report, e.what()};
    outcome.report["diagnostics"] = {{"iterations", e.iterations()}, {"residual", e.residual()}};
  } catch (const std::exception& e) {
    outcome = {kExitUsage, report, e.what()};
  }
  if (outcome.exit_code != kExitOk) {
    outcome.report["status"] = "failed";
    outcome.report["error"] = outcome.error;
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ofstream(out_dir / "report.json") << outcome.report.dump(2) << '\n';
  return outcome;
}

std::vector<json> expand_grid(const json& grid) {
  if (!grid.is_object()) throw ScenarioError("grid: expected an object");
  for (const auto& [key, value] : grid.items())
    if (key != "axes") throw ScenarioError("grid." + key + ": unknown key");
  std::vector<json> points;
  if (!grid.contains("axes") || grid.at("axes").empty()) return points;
  const json& axes = grid.at("axes");
  if (!axes.is_object()) throw ScenarioError("grid.axes: expected an object");
  points.push_back(json::object());
  for (const auto& [path, values] : axes.items()) {
    if (!values.is_array()) throw ScenarioError("grid.axes." + path + ": expected an array");
    std::vector<json> next;
    for (const auto& p : points)
      for (const auto& v : values) {
        json q = p;
        q[path] = v;
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  return points;
}

Scenario apply_point(const Scenario& base, const json& point) {
  json doc = to_json(base);
  for (const auto& [path, value] : point.items()) {
    json::json_pointer ptr("/" + [&] {
      std::string p = path;
      for (char& c : p)
        if (c == '.') c = '/';
      return p;
    }());
    doc[ptr] = value;
  }
  return parse_scenario(doc);
}

json sweep(const Scenario& base, const json& grid, const fs::path& out_dir, unsigned threads) {
  const std::vector<json> points = expand_grid(grid);
  fs::create_directories(out_dir);
  std::vector<json> entries(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      char name[32];
      std::snprintf(name, sizeof name, "point_%04zu", i);
      json entry = {{"index", i}, {"point", points[i]}, {"dir", name}};
      try {
        Scenario s = apply_point(base, points[i]);
        s.output_dir = (out_dir / name).string();
        const RunOutcome r = run_scenario(s, out_dir / name);
        entry["exit_code"] = r.exit_code;
        entry["status"] = r.report.value("status", "failed");
        if (!r.error.empty()) entry["error"] = r.error;
      } catch (const std::exception& e) {
        entry["exit_code"] = kExitInvalid;
        entry["status"] = "failed";
        entry["error"] = e.what();
      }
      entries[i] = std::move(entry);
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(points.size(), 1)));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  json index = {{"count", points.size()}, {"points", entries}};
  if (points.empty()) index["points"] = json::array();
  std::ofstream(out_dir / "index.json") << index.dump(2) << '\n';
  return index;
}

}  // namespace tbf
