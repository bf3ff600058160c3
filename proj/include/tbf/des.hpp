#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tbf/dynamics.hpp"
#include "tbf/sparse.hpp"
#include "tbf/statespace.hpp"

namespace tbf {

enum class FilterVariant { variable, fixed };

/// Deliberate defects for exercising the invariant checker.
enum class Fault {
  none,
  free_departure,  // a departing packet consumes no tokens
};

struct SimOptions {
  std::uint64_t horizon = 1'000'000;  // replenishment periods
  std::uint64_t warmup = 100'000;     // periods discarded before collecting
  std::uint64_t seed = 1;
  std::size_t segments = 100;         // granularity of the batch-means record
  FilterVariant variant = FilterVariant::variable;
  bool check_invariants = false;
  Fault fault = Fault::none;
  std::size_t trace_depth = 16;

  /// Warmup of 10% of the horizon.
  static SimOptions for_horizon(std::uint64_t horizon, std::uint64_t seed);
};

/// Statistics over a contiguous stretch of simulated time.
struct SimAccumulator {
  double elapsed = 0.0;
  std::uint64_t periods = 0;
  Vector occupancy;                     // time spent in each (T, backlog) cell
  std::vector<std::uint64_t> embedded;  // post-grant visits per (T, backlog) cell
  std::vector<std::uint64_t> arrivals;
  std::vector<std::uint64_t> losses;
  std::vector<std::uint64_t> served;    // left the filter (instantly or from the buffer)
  Vector wait_sum;                      // buffer residence of served packets
  Vector backlog_time;                  // integral of buffered packet count

  SimAccumulator() = default;
  SimAccumulator(std::size_t cells, std::size_t classes);
  void merge(const SimAccumulator& other);
};

struct SimStats {
  int bucket = 0;
  int buffer = 0;
  std::size_t classes = 0;
  SimAccumulator total;                  // after warmup
  std::vector<SimAccumulator> segments;  // partition of `total`

  // Whole-run counters, warmup included.
  std::vector<std::uint64_t> lifetime_arrivals;
  std::vector<std::uint64_t> lifetime_losses;
  std::vector<std::uint64_t> lifetime_departures;
  std::vector<std::uint64_t> in_buffer_at_end;
  std::uint64_t events = 0;
  std::uint64_t invariant_checks = 0;

  std::size_t cell(int tokens, int backlog) const {
    return static_cast<std::size_t>(tokens) * static_cast<std::size_t>(buffer + 1) + static_cast<std::size_t>(backlog);
  }
  Vector occupancy_distribution() const;
  Vector embedded_distribution() const;
  // Classes that saw no arrivals (or no departures) report 0.
  double loss_ratio(std::size_t k) const;
  double mean_wait(std::size_t k) const;
  double mean_backlog(std::size_t k) const;
  double accepted_rate(std::size_t k) const;
};

struct TraceEntry {
  double time = 0.0;
  char kind = '?';  // 'a' arrival, 'g' token grant
  int size = 0;
  int tokens = 0;
  int backlog = 0;
  int head = 0;
};

std::string to_string(const TraceEntry& e);

struct ViolationReport {
  std::string message;
  std::vector<TraceEntry> trace;  // most recent event last

  bool empty() const { return message.empty(); }
  std::string describe() const;
};

class InvariantViolation : public std::runtime_error {
 public:
  explicit InvariantViolation(ViolationReport report);
  const ViolationReport& report() const { return report_; }

 private:
  ViolationReport report_;
};

/// Post-event checks: Q*T = 0 for the fixed variant; T <= M, |z| <= L and
/// a stuck head (T < z_1) for the variable variant; FCFS departure order.
class InvariantChecker {
 public:
  InvariantChecker(int bucket, int buffer, std::size_t depth = 16);

  void record(const TraceEntry& e);
  std::optional<std::string> check(const FixedState& x) const;
  std::optional<std::string> check(const SystemState& x) const;
  std::optional<std::string> departure(std::uint64_t packet_id);

  /// Report with the current trace tail attached.
  ViolationReport report(std::string message) const;

 private:
  int bucket_;
  int buffer_;
  std::size_t depth_;
  std::deque<TraceEntry> trace_;
  std::optional<std::uint64_t> last_departed_;
};

/// Event-driven run of the filter for `horizon` periods. Arrivals form a
/// compound Poisson process; inter-arrival times and packet sizes come from
/// separate random streams derived from the seed. A token grant coinciding
/// with an arrival is processed first. The fixed variant requires sizes {1}.
/// Throws InvariantViolation when checking is enabled and a check fails.
SimStats simulate(const TrafficSpec& traffic, const FilterConfig& filter, const SimOptions& options);

struct Estimate {
  double mean = 0.0;
  double half_width = 0.0;  // 95% Student-t interval
};

struct ClassEstimates {
  Estimate loss;
  Estimate wait;
  Estimate backlog;
};

struct BatchEstimates {
  std::size_t batches = 0;
  std::vector<Estimate> occupancy;  // per (T, backlog) cell
  std::vector<ClassEstimates> classes;
};

/// Batch means over `batches` consecutive groups of recorded segments.
/// Throws std::invalid_argument for fewer than 2 batches or when there are
/// fewer post-warmup segments than batches.
BatchEstimates batch_confidence(const SimStats& stats, std::size_t batches);

/// Mean and 95% half-width (Student t, n-1 degrees of freedom) of
/// independent samples; NaN samples are skipped.
Estimate mean_confidence(const std::vector<double>& samples);

}  // namespace tbf
