// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Runtime limits are part of each check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tbf/analysis.hpp"
#include "tbf/des.hpp"
#include "tbf/dynamics.hpp"
#include "tbf/markov.hpp"
#include "tbf/statespace.hpp"

using namespace tbf;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

TrafficSpec four_class(double rate) { return {{1, 2, 3, 4}, {0.4, 0.3, 0.2, 0.1}, rate}; }
const FilterConfig kFilter{5, 5, 1.0};
const std::vector<double> kLoads{0.25, 0.5, 1.0, 5.0};

double l1(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// --- 1 ----------------------------------------------------------------------
void state_counts(Outcome& o) {
  const std::vector<int> a{1, 2, 3, 4};
  const std::vector<int> b{3, 4, 5, 6};
  const auto c = count_strings(a, 10);
  o.detail << "#Z*_10 over {1,2,3,4} = " << c;
  o.require(c == 833, "count is not 833");
  for (const auto* sizes : {&a, &b})
    for (int limit = 3; limit <= 10; ++limit)
      o.require(count_strings(*sizes, limit) == enumerate_strings(*sizes, limit).size(),
                "DP differs from enumeration at L=" + std::to_string(limit));
  o.detail << "; DP = enumeration for both alphabets, L=3..10";
}

// --- 2 ----------------------------------------------------------------------
void structure(Outcome& o) {
  const auto traffic = four_class(0.5);
  const StateSpace space(traffic, kFilter);
  o.require(space.size() == 186, "N != 186");
  const auto h = build_H(space);
  const auto q = build_Q(space, traffic);
  const auto p = build_partitioned(space, traffic);

  bool h_ok = true;
  for (std::size_t i = 0; i < space.size(); ++i) {
    std::size_t ones = 0, others = 0;
    h.matrix().for_each_in_row(i, [&](std::size_t, double v) { (v == 1.0 ? ones : others)++; });
    h_ok = h_ok && ones == 1 && others == 0;
  }
  o.require(h_ok, "H row without a single 1");

  double q_worst = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) q_worst = std::max(q_worst, std::abs(q.matrix().row_sum(i)));
  o.require(q_worst <= 1e-12, "Q row sum");

  // Each level keeps the empty-buffer rows of every token count but only its
  // own non-empty block. Row T and the non-empty rows are conservative; an
  // empty row T' != T loses exactly the queueing mass of its own coupling
  // row B^{T'}, which lands in a different level.
  const int m = space.bucket();
  const auto empty = static_cast<std::size_t>(m + 1);
  double g_worst = 0.0;
  bool lower_left_zero = true;
  for (int t = 0; t <= m; ++t) {
    const auto& g = p.gamma(t);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double s = g.row_sum(r);
      if (r < empty && r != static_cast<std::size_t>(t)) s += p.coupling[r].row_sum(r);
      g_worst = std::max(g_worst, std::abs(s));
      if (r >= empty)
        g.for_each_in_row(r, [&](std::size_t c, double) { lower_left_zero = lower_left_zero && c >= empty; });
    }
  }
  o.require(g_worst <= 1e-12, "level generator row sums");
  o.require(lower_left_zero, "level generator lower-left block");
  o.detail << "N=" << space.size() << ", max |Q row sum| = " << q_worst
           << ", max |level row sum (foreign coupling restored)| = " << g_worst << ", lower-left blocks zero";
}

// --- 3 ----------------------------------------------------------------------
void stationarity(Outcome& o) {
  for (double rate : kLoads) {
    const Model model(four_class(rate), kFilter);
    const auto r = solve_stationary(model);
    const EmbeddedOperator g(model.Q, model.H, model.filter.period);
    const double residual = l1(g.apply(r.pi), r.pi);
    o.detail << "lambda=" << rate << ": |piG-pi|=" << residual << " (" << r.iterations << " it); ";
    o.require(residual <= 1e-10, "residual at lambda=" + std::to_string(rate));
    o.require(std::abs(sum(r.pi) - 1.0) <= 1e-10, "mass at lambda=" + std::to_string(rate));
  }
}

// --- 4 ----------------------------------------------------------------------
void partition(Outcome& o) {
  const TrafficSpec traffic{{1, 2}, {0.6, 0.4}, 0.8};
  const FilterConfig filter{2, 3, 1.0};
  const Model model(traffic, filter);
  const auto& space = model.space;
  const int m = space.bucket();
  const auto empty = static_cast<std::size_t>(m + 1);

  double prop = 0.0;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int t = 0; t <= m; ++t) {
    const auto block = space.nonempty_block(t);
    Vector full(space.size(), 0.0);
    Vector lvl(model.partition.level_dimension(), 0.0);
    for (int u = 0; u <= m; ++u) full[space.empty_index(u)] = lvl[static_cast<std::size_t>(u)] = unif(rng);
    for (std::size_t j = 0; j < block.size(); ++j) full[block.begin + j] = lvl[empty + j] = unif(rng);
    const double total = sum(full);
    for (auto& x : full) x /= total;
    for (auto& x : lvl) x /= total;
    const auto a = expm_action(model.Q, full, filter.period, 1e-13);
    const auto b = expm_action(model.partition.gamma(t), lvl, filter.period, 1e-13, GeneratorKind::sub);
    for (int u = 0; u <= m; ++u)
      prop = std::max(prop, std::abs(a[space.empty_index(u)] - b[static_cast<std::size_t>(u)]));
    for (std::size_t j = 0; j < block.size(); ++j) prop = std::max(prop, std::abs(a[block.begin + j] - b[empty + j]));
  }
  o.require(prop <= 1e-8, "propagation");

  const auto r = solve_stationary(model);
  const std::vector<IndicatorSet> sets{
      IndicatorSet::all(space),
      IndicatorSet(space, [](int, const BufferString& z) { return backlog(z) >= 2; }),
      IndicatorSet(space, [](int t, const BufferString& z) { return t == 1 || z.size() == 1; }),
      IndicatorSet(space, [](int, const BufferString& z) { return z.empty(); }),
  };
  double avg = 0.0, k_spread = 0.0;
  for (const auto& set : sets) {
    const double blocks = time_average(space, r, model.partition, set, filter.period);
    avg = std::max(avg, std::abs(blocks - time_average_full(space, r, model.Q, set, filter.period)));
    for (int k = 1; k <= m; ++k)
      k_spread = std::max(k_spread, std::abs(time_average(space, r, model.partition, set, filter.period, 1e-12, k) -
                                             blocks));
  }
  o.require(avg <= 1e-8, "time average blocks vs full");
  o.require(k_spread <= 1e-10, "empty-buffer term depends on level");
  o.detail << "max propagation diff " << prop << ", time-average diff " << avg << ", spread over k " << k_spread;
}

// --- 5 ----------------------------------------------------------------------
void unification(Outcome& o) {
  for (double load : {0.25, 0.5, 1.0}) {
    const Model model({{1}, {1.0}, load}, {5, 5, 1.0});
    const auto full = backlog_marginal(model.space, solve_stationary(model).pi);
    const auto chain = map_s_to_q(chain_stationary(build_fixed_chain(load, 5, 5), 5).pi, 5, 5);
    double worst = 0.0;
    for (std::size_t j = 0; j < chain.size(); ++j) worst = std::max(worst, std::abs(full[j] - chain[j]));
    o.detail << "lambda*tau=" << load << ": max diff " << worst << "; ";
    o.require(worst <= 1e-8, "unit packets vs chain at " + std::to_string(load));
  }
  const auto pt = chain_stationary(build_fixed_chain(0.5, 5, 5), 5).pi;
  const auto md = chain_stationary(build_md1_chain(0.5, 5, 5), 5).pi;
  const double tv = total_variation(pt, md);
  o.detail << "TV(periodic transfer, M/D/1) = " << tv;
  o.require(tv > 1e-3, "chains too close");
}

// --- 6, 7, 8 share the simulation runs ----------------------------------------
struct LoadRun {
  AnalyticReport analytic;
  SimStats sim;
  BatchEstimates bands;
  double seconds = 0.0;
};

std::map<double, LoadRun>& runs() {
  static std::map<double, LoadRun> r;
  return r;
}

const LoadRun& load_run(double rate) {
  auto it = runs().find(rate);
  if (it != runs().end()) return it->second;
  const auto start = std::chrono::steady_clock::now();
  const Model model(four_class(rate), kFilter);
  LoadRun r{analyze(model), simulate(model.traffic, model.filter, SimOptions::for_horizon(1'000'000, 1)), {}, 0.0};
  r.bands = batch_confidence(r.sim, 10);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return runs().emplace(rate, std::move(r)).first->second;
}

void occupancy(Outcome& o) {
  for (double rate : kLoads) {
    const auto& r = load_run(rate);
    const double tv = total_variation(r.analytic.occupancy.cells, r.sim.occupancy_distribution());
    o.detail << "lambda=" << rate << ": TV " << tv << " (" << r.seconds << " s); ";
    o.require(tv <= 0.02, "occupancy TV at " + std::to_string(rate));
    o.require(r.seconds < 180.0, "runtime at " + std::to_string(rate));
  }
}

void losses(Outcome& o) {
  for (double rate : {0.25, 5.0}) {
    const auto& r = load_run(rate);
    for (std::size_t k = 0; k < r.analytic.classes.size(); ++k) {
      const double a = r.analytic.classes[k].loss;
      const auto& e = r.bands.classes[k].loss;
      const double d = std::abs(a - e.mean);
      o.detail << "lambda=" << rate << " l=" << r.analytic.classes[k].size << ": |d|=" << d << " hw=" << e.half_width
               << "; ";
      const std::string where = " at lambda=" + std::to_string(rate) + " class " + std::to_string(k);
      o.require(d <= e.half_width, "outside band" + where);
      o.require(d <= 0.01, "deviation" + where);
    }
  }
}

void waits(Outcome& o) {
  for (double rate : {0.25, 5.0}) {
    const auto& r = load_run(rate);
    for (std::size_t k = 0; k < r.analytic.classes.size(); ++k) {
      const auto& c = r.analytic.classes[k];
      const auto& e = r.bands.classes[k].wait;
      const std::string where = " at lambda=" + std::to_string(rate) + " class " + std::to_string(k);
      if (!c.wait) {
        o.require(false, "undefined analytic wait" + where);
        continue;
      }
      const double d = std::abs(*c.wait - e.mean);
      const double rel = e.mean > 0.0 ? d / e.mean : (d == 0.0 ? 0.0 : INFINITY);
      o.require(rel <= 0.05 || d <= e.half_width, "wait" + where);
      const double held = r.sim.mean_backlog(k);
      const double little = std::abs(held - r.sim.accepted_rate(k) * r.sim.mean_wait(k));
      o.require(little <= 0.02 * held, "DES Little" + where);
      o.detail << "lambda=" << rate << " l=" << c.size << ": rel " << rel << ", Little " << (held > 0 ? little / held : 0)
               << "; ";
    }
  }
}

// --- 9 ----------------------------------------------------------------------
void invariants(Outcome& o) {
  SimOptions fixed = SimOptions::for_horizon(1'000'000, 1);
  fixed.variant = FilterVariant::fixed;
  fixed.check_invariants = true;
  SimOptions variable = SimOptions::for_horizon(1'000'000, 1);
  variable.check_invariants = true;
  try {
    const auto a = simulate({{1}, {1.0}, 1.0}, {5, 5, 1.0}, fixed);
    const auto b = simulate(four_class(1.0), kFilter, variable);
    o.require(a.events >= 1'000'000 && b.events >= 1'000'000, "fewer than 1e6 events");
    o.detail << "fixed: " << a.events << " events, variable: " << b.events << " events, 0 violations; ";
  } catch (const InvariantViolation& e) {
    o.require(false, e.report().describe());
  }

  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0;
  const std::size_t sequences = 100'000;
  for (std::size_t n = 0; n < sequences; ++n) {
    const int l = 1 + static_cast<int>(rng() % 8);
    const int m = 1 + static_cast<int>(rng() % 8);
    FixedState x{0, static_cast<int>(rng() % (m + 1))};
    SystemState v{x.t, {}};
    int s = to_unified(x, m).s;
    int pending = 0;
    const int length = 1 + static_cast<int>(rng() % 40);
    for (int e = 0; e < length; ++e) {
      if (rng() % 2) {
        x = fixed_arrive(x, l).state;
        v = var_arrive(v, 1, l).state;
        ++pending;
      } else {
        x = fixed_replenish(x, m);
        v = var_replenish(v, m);
        s = s_step(s, pending, l, m);
        pending = 0;
        if (to_unified(x, m).s != s || from_unified({s - m, s}) != x) ++mismatches;
      }
      if (x.q * x.t != 0 || x.t != v.tokens || x.q != static_cast<int>(v.buffer.size())) ++mismatches;
    }
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " coordinate mismatches");
  o.detail << sequences << " random sequences, " << mismatches << " mismatches";
}

// --- 10 ---------------------------------------------------------------------
void kernels(Outcome& o) {
  const SparseMatrix two(2, 2, {{0, 0, -1.0}, {0, 1, 1.0}});
  const auto e = expm_action(two, Vector{1.0, 0.0}, 1.0);
  const double d1 = std::max(std::abs(e[0] - std::exp(-1.0)), std::abs(e[1] - (1.0 - std::exp(-1.0))));
  o.require(d1 <= 1e-12, "2-state closed form");

  double d2 = 0.0;
  for (double lambda : {0.25, 0.5, 1.0, 5.0}) {
    const SparseMatrix scalar(1, 1, {{0, 0, -lambda}});
    const auto r = integrate_expm_action(scalar, Vector{1.0}, 1.0, 1e-13, GeneratorKind::sub);
    d2 = std::max(d2, std::abs(r[0] - (1.0 - std::exp(-lambda)) / lambda));
  }
  o.require(d2 <= 1e-12, "scalar integral");

  const auto traffic = four_class(0.5);
  const StateSpace space(traffic, kFilter);
  const auto q = build_Q(space, traffic);
  Vector v(space.size(), 1.0 / static_cast<double>(space.size()));
  const double m1 = std::abs(sum(expm_action(q, v, 1.0)) - 1.0);
  const double m2 = std::abs(sum(integrate_expm_action(q, v, 1.0)) - 1.0);
  o.require(m1 <= 1e-12 && m2 <= 1e-12, "mass");
  o.detail << "closed form " << d1 << ", scalar integral " << d2 << ", mass drift " << m1 << " / " << m2;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "state-count reproduction", 1.0, state_counts},
      {2, "structural invariants", 1.0, structure},
      {3, "stationarity", 30.0, stationarity},
      {4, "partition equivalence", 5.0, partition},
      {5, "model unification", 5.0, unification},
      {6, "analytic vs simulated occupancy", 4 * 180.0, occupancy},
      {7, "loss ratios", 2 * 180.0, losses},
      {8, "waiting times", 2 * 180.0, waits},
      {9, "invariant sweeps", 120.0, invariants},
      {10, "numerical kernels", 1.0, kernels},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.require(secs < c.limit_s, "runtime limit " + std::to_string(c.limit_s) + " s");
    if (!o.pass) ++failed;
    std::printf("%s %2d %s: %s (%.3f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.str().c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
