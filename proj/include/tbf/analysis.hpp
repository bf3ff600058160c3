#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tbf/markov.hpp"
#include "tbf/statespace.hpp"

namespace tbf {

struct SolverOptions {
  double tol = 1e-10;       // ||pi G - pi||_1 target
  std::size_t max_iters = 1'000'000;
  double expm_tol = 1e-12;  // uniformization truncation
};

/// Everything needed to analyse one filter/traffic pair.
struct Model {
  TrafficSpec traffic;
  FilterConfig filter;
  StateSpace space;
  TransitionMatrix H;
  RateMatrix Q;
  PartitionedGenerator partition;

  Model(TrafficSpec traffic, FilterConfig filter);
};

/// Embedded-chain distribution observed right after each token grant.
struct StationaryResult {
  Vector pi;
  std::size_t iterations = 0;
  double residual = 0.0;
  int bucket = 0;
  std::size_t strings = 0;

  /// [pi(0, eps) .. pi(M, eps)]
  Vector empty_slice() const;
  /// pi_T over all strings of level T, empty string first.
  std::span<const double> level(int tokens) const;
};

/// Throws ConvergenceError if the embedded iteration does not settle.
StationaryResult solve_stationary(const Model& model, const SolverOptions& options = {});
StationaryResult solve_stationary(const StateSpace& space, const TrafficSpec& traffic, const FilterConfig& filter,
                                  const SolverOptions& options = {});

/// Backlog distribution of the fixed length model from the S-chain:
/// P(Q=0) = sum_{s<=M} pi_S(s), P(Q=j) = pi_S(j+M).
Vector map_s_to_q(std::span<const double> pi_s, int buffer, int bucket);

/// Marginal of a distribution over the state space by buffer backlog.
Vector backlog_marginal(const StateSpace& space, std::span<const double> dist);

/// A subset of the state space as a membership mask.
class IndicatorSet {
 public:
  using Predicate = std::function<bool(int tokens, const BufferString& z)>;

  IndicatorSet(const StateSpace& space, const Predicate& member);
  static IndicatorSet all(const StateSpace& space);
  static IndicatorSet none(const StateSpace& space);

  bool contains(std::size_t i) const { return member_[i] != 0; }
  std::size_t dimension() const { return member_.size(); }

  IndicatorSet operator|(const IndicatorSet& other) const;

 private:
  IndicatorSet() = default;
  std::vector<char> member_;
};

/// Long-run fraction of time spent in `set`, assembled per token level from
/// the level generators. The empty-buffer part may be evaluated with any
/// level `empty_level`; all levels give the same value.
double time_average(const StateSpace& space, const StationaryResult& result, const PartitionedGenerator& partition,
                    const IndicatorSet& set, double period, double tol = 1e-12, int empty_level = 0);

/// Same quantity from the full generator: (1/tau) int pi exp(Q s) ds . 1_A.
double time_average_full(const StateSpace& space, const StationaryResult& result, const RateMatrix& q,
                         const IndicatorSet& set, double period, double tol = 1e-12);

/// Per-state time-average probabilities. All continuous-time statistics are
/// sums over this vector.
class TimeAverages {
 public:
  TimeAverages(const StateSpace& space, const StationaryResult& result, const PartitionedGenerator& partition,
               double period, double tol = 1e-12);

  const Vector& distribution() const { return dist_; }
  double operator()(const IndicatorSet& set) const;

 private:
  Vector dist_;
};

struct OccupancyTable {
  int bucket = 0;
  int buffer = 0;
  Vector cells;  // row-major (T, backlog)

  double at(int tokens, int backlog) const {
    return cells[static_cast<std::size_t>(tokens) * static_cast<std::size_t>(buffer + 1) +
                 static_cast<std::size_t>(backlog)];
  }
  double total() const;
};

/// Time-average joint distribution of (T, |z|).
OccupancyTable occupancy_table(const StateSpace& space, const TimeAverages& averages);

/// Loss probability of a packet of `size` tokens: time share of states with
/// a non-empty buffer and |z| > L - size (Poisson arrivals see time averages).
double loss_ratio(const StateSpace& space, const TimeAverages& averages, int size);

/// Mean number of buffered packets of class k.
double class_backlog(const StateSpace& space, const TimeAverages& averages, std::size_t k);

/// Little's law per class. Empty when the class has no accepted traffic.
std::optional<double> waiting_time(double backlog, double loss, double rate, double prob);

struct ClassMetrics {
  int size = 0;
  double prob = 0.0;
  double loss = 0.0;
  double backlog = 0.0;                // packets
  std::optional<double> wait;          // time units
  double throughput = 0.0;             // accepted packets per time unit
};

struct AnalyticReport {
  StationaryResult stationary;
  OccupancyTable occupancy;
  std::vector<ClassMetrics> classes;
  double error_bound = 0.0;  // solver residual + integration tolerance
};

/// 0.5 * sum |a_i - b_i|
double total_variation(std::span<const double> a, std::span<const double> b);

AnalyticReport analyze(const Model& model, const SolverOptions& options = {});

}  // namespace tbf
