#include "tbf/des.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

namespace tbf {

SimOptions SimOptions::for_horizon(std::uint64_t horizon, std::uint64_t seed) {
  SimOptions o;
  o.horizon = horizon;
  o.warmup = horizon / 10;
  o.seed = seed;
  return o;
}

SimAccumulator::SimAccumulator(std::size_t cells, std::size_t classes)
    : occupancy(cells, 0.0),
      embedded(cells, 0),
      arrivals(classes, 0),
      losses(classes, 0),
      served(classes, 0),
      wait_sum(classes, 0.0),
      backlog_time(classes, 0.0) {}

void SimAccumulator::merge(const SimAccumulator& other) {
  elapsed += other.elapsed;
  periods += other.periods;
  for (std::size_t c = 0; c < occupancy.size(); ++c) {
    occupancy[c] += other.occupancy[c];
    embedded[c] += other.embedded[c];
  }
  for (std::size_t k = 0; k < arrivals.size(); ++k) {
    arrivals[k] += other.arrivals[k];
    losses[k] += other.losses[k];
    served[k] += other.served[k];
    wait_sum[k] += other.wait_sum[k];
    backlog_time[k] += other.backlog_time[k];
  }
}

Vector SimStats::occupancy_distribution() const {
  Vector out = total.occupancy;
  for (double& x : out) x /= total.elapsed;
  return out;
}

Vector SimStats::embedded_distribution() const {
  Vector out(total.embedded.size());
  for (std::size_t c = 0; c < out.size(); ++c)
    out[c] = static_cast<double>(total.embedded[c]) / static_cast<double>(total.periods);
  return out;
}

double SimStats::loss_ratio(std::size_t k) const {
  if (total.arrivals[k] == 0) return 0.0;
  return static_cast<double>(total.losses[k]) / static_cast<double>(total.arrivals[k]);
}

double SimStats::mean_wait(std::size_t k) const {
  if (total.served[k] == 0) return 0.0;
  return total.wait_sum[k] / static_cast<double>(total.served[k]);
}

double SimStats::mean_backlog(std::size_t k) const { return total.backlog_time[k] / total.elapsed; }

double SimStats::accepted_rate(std::size_t k) const {
  return static_cast<double>(total.arrivals[k] - total.losses[k]) / total.elapsed;
}

std::string to_string(const TraceEntry& e) {
  std::ostringstream os;
  os << "t=" << e.time << (e.kind == 'a' ? " arrival size=" + std::to_string(e.size) : std::string(" grant"))
     << " -> T=" << e.tokens << " backlog=" << e.backlog;
  if (e.head > 0) os << " head=" << e.head;
  return os.str();
}

std::string ViolationReport::describe() const {
  std::string out = message;
  for (const auto& e : trace) out += "\n  " + to_string(e);
  return out;
}

InvariantViolation::InvariantViolation(ViolationReport report)
    : std::runtime_error("invariant violated: " + report.describe()), report_(std::move(report)) {}

InvariantChecker::InvariantChecker(int bucket, int buffer, std::size_t depth)
    : bucket_(bucket), buffer_(buffer), depth_(std::max<std::size_t>(depth, 1)) {}

void InvariantChecker::record(const TraceEntry& e) {
  if (trace_.size() == depth_) trace_.pop_front();
  trace_.push_back(e);
}

std::optional<std::string> InvariantChecker::check(const FixedState& x) const {
  if (x.q < 0 || x.q > buffer_ || x.t < 0 || x.t > bucket_) return "fixed state out of bounds";
  if (x.q * x.t != 0) return "Q*T != 0 (Q=" + std::to_string(x.q) + ", T=" + std::to_string(x.t) + ")";
  return std::nullopt;
}

std::optional<std::string> InvariantChecker::check(const SystemState& x) const {
  if (x.tokens < 0 || x.tokens > bucket_) return "token count out of bounds in " + to_string(x);
  if (backlog(x.buffer) > buffer_) return "backlog exceeds buffer in " + to_string(x);
  if (!x.buffer.empty() && x.tokens >= x.buffer.front()) return "head packet not stuck in " + to_string(x);
  return std::nullopt;
}

std::optional<std::string> InvariantChecker::departure(std::uint64_t packet_id) {
  if (last_departed_ && packet_id <= *last_departed_)
    return "packet " + std::to_string(packet_id) + " left after packet " + std::to_string(*last_departed_);
  last_departed_ = packet_id;
  return std::nullopt;
}

ViolationReport InvariantChecker::report(std::string message) const {
  return {std::move(message), std::vector<TraceEntry>(trace_.begin(), trace_.end())};
}

namespace {

class VariableFilter {
 public:
  VariableFilter(int bucket, int buffer) : bucket_(bucket), buffer_(buffer), x_{bucket, {}} {}

  ArrivalOutcome arrive(int size) {
    auto r = var_arrive(x_, size, buffer_);
    x_ = std::move(r.state);
    return r.outcome;
  }

  bool grant(Fault fault) {
    const std::size_t before = x_.buffer.size();
    const int tokens = x_.tokens;
    x_ = var_replenish(x_, bucket_);
    const bool departed = x_.buffer.size() < before;
    if (departed && fault == Fault::free_departure) x_.tokens = std::min(bucket_, tokens + 1);
    return departed;
  }

  int tokens() const { return x_.tokens; }
  int backlog() const { return tbf::backlog(x_.buffer); }
  int head() const { return x_.buffer.empty() ? 0 : x_.buffer.front(); }
  std::optional<std::string> check(const InvariantChecker& c) const { return c.check(x_); }

 private:
  int bucket_;
  int buffer_;
  SystemState x_;
};

class FixedFilter {
 public:
  FixedFilter(int bucket, int buffer) : bucket_(bucket), buffer_(buffer), x_{0, bucket} {}

  ArrivalOutcome arrive(int) {
    const auto r = fixed_arrive(x_, buffer_);
    x_ = r.state;
    return r.outcome;
  }

  bool grant(Fault fault) {
    const FixedState before = x_;
    x_ = fixed_replenish(x_, bucket_);
    const bool departed = x_.q < before.q;
    if (departed && fault == Fault::free_departure) x_.t = std::min(bucket_, before.t + 1);
    return departed;
  }

  int tokens() const { return x_.t; }
  int backlog() const { return x_.q; }
  int head() const { return x_.q > 0 ? 1 : 0; }
  std::optional<std::string> check(const InvariantChecker& c) const { return c.check(x_); }

 private:
  int bucket_;
  int buffer_;
  FixedState x_;
};

struct Packet {
  double arrival;
  std::size_t cls;
  std::uint64_t id;
};

template <typename Filter>
SimStats run(Filter filter, const TrafficSpec& traffic, const FilterConfig& config, const SimOptions& options) {
  const std::size_t classes = traffic.classes();
  const std::size_t cells = static_cast<std::size_t>(config.bucket + 1) * static_cast<std::size_t>(config.buffer + 1);
  const std::uint64_t collected = options.horizon - options.warmup;
  const std::size_t segments =
      static_cast<std::size_t>(std::min<std::uint64_t>(std::max<std::size_t>(options.segments, 1), collected));

  SimStats stats;
  stats.bucket = config.bucket;
  stats.buffer = config.buffer;
  stats.classes = classes;
  stats.segments.assign(segments, SimAccumulator(cells, classes));
  stats.lifetime_arrivals.assign(classes, 0);
  stats.lifetime_losses.assign(classes, 0);
  stats.lifetime_departures.assign(classes, 0);
  stats.in_buffer_at_end.assign(classes, 0);

  std::seed_seq time_seed{options.seed, std::uint64_t{0x7469'6d65}};
  std::seed_seq size_seed{options.seed, std::uint64_t{0x7369'7a65}};
  std::mt19937_64 time_rng(time_seed);
  std::mt19937_64 size_rng(size_seed);
  std::exponential_distribution<double> gap(traffic.rate > 0.0 ? traffic.rate : 1.0);
  std::discrete_distribution<std::size_t> pick(traffic.probs.begin(), traffic.probs.end());
  auto next_gap = [&] { return traffic.rate > 0.0 ? gap(time_rng) : std::numeric_limits<double>::infinity(); };

  InvariantChecker checker(config.bucket, config.buffer, options.trace_depth);
  auto verify = [&](std::optional<std::string> problem) {
    ++stats.invariant_checks;
    if (problem) throw InvariantViolation(checker.report(std::move(*problem)));
  };

  std::deque<Packet> queue;
  std::vector<int> buffered(classes, 0);
  std::uint64_t next_id = 0;
  double now = 0.0;
  double next_arrival = next_gap();
  SimAccumulator* acc = nullptr;

  auto advance = [&](double until) {
    if (acc) {
      const double dt = until - now;
      acc->elapsed += dt;
      acc->occupancy[stats.cell(filter.tokens(), filter.backlog())] += dt;
      for (std::size_t k = 0; k < classes; ++k) acc->backlog_time[k] += buffered[k] * dt;
    }
    now = until;
  };
  auto serve = [&](std::size_t k, double wait) {
    ++stats.lifetime_departures[k];
    if (acc) {
      ++acc->served[k];
      acc->wait_sum[k] += wait;
    }
  };

  for (std::uint64_t n = 1; n <= options.horizon; ++n) {
    const double grant_time = static_cast<double>(n) * config.period;
    acc = n > options.warmup
              ? &stats.segments[static_cast<std::size_t>((n - options.warmup - 1) * segments / collected)]
              : nullptr;

    while (next_arrival < grant_time) {
      advance(next_arrival);
      const std::size_t k = pick(size_rng);
      const int size = traffic.sizes[k];
      ++stats.lifetime_arrivals[k];
      if (acc) ++acc->arrivals[k];
      switch (filter.arrive(size)) {
        case ArrivalOutcome::transferred:
          serve(k, 0.0);
          break;
        case ArrivalOutcome::queued:
          queue.push_back({now, k, next_id++});
          ++buffered[k];
          break;
        case ArrivalOutcome::rejected:
          ++stats.lifetime_losses[k];
          if (acc) ++acc->losses[k];
          break;
      }
      ++stats.events;
      if (options.check_invariants) {
        checker.record({now, 'a', size, filter.tokens(), filter.backlog(), filter.head()});
        verify(filter.check(checker));
      }
      next_arrival = now + next_gap();
    }

    advance(grant_time);
    if (filter.grant(options.fault)) {
      const Packet p = queue.front();
      queue.pop_front();
      --buffered[p.cls];
      serve(p.cls, now - p.arrival);
      if (options.check_invariants) verify(checker.departure(p.id));
    }
    ++stats.events;
    if (options.check_invariants) {
      checker.record({now, 'g', 0, filter.tokens(), filter.backlog(), filter.head()});
      verify(filter.check(checker));
    }
    if (acc) {
      ++acc->embedded[stats.cell(filter.tokens(), filter.backlog())];
      ++acc->periods;
    }
  }

  for (const auto& p : queue) ++stats.in_buffer_at_end[p.cls];
  stats.total = SimAccumulator(cells, classes);
  for (const auto& s : stats.segments) stats.total.merge(s);
  return stats;
}

}  // namespace

SimStats simulate(const TrafficSpec& traffic, const FilterConfig& filter, const SimOptions& options) {
  if (!(traffic.rate >= 0.0)) throw std::invalid_argument("traffic.rate: must be >= 0");
  TrafficSpec checked = traffic;
  if (checked.rate == 0.0) checked.rate = 1.0;
  checked.validate();
  filter.validate();
  validate_pairing(traffic, filter);
  if (options.horizon <= options.warmup) throw std::invalid_argument("simulation horizon must exceed warmup");

  if (options.variant == FilterVariant::fixed) {
    if (traffic.sizes != std::vector<int>{1})
      throw std::invalid_argument("traffic.sizes: the fixed length filter needs unit packets");
    return run(FixedFilter(filter.bucket, filter.buffer), traffic, filter, options);
  }
  return run(VariableFilter(filter.bucket, filter.buffer), traffic, filter, options);
}

Estimate mean_confidence(const std::vector<double>& samples) {
  std::vector<double> valid;
  for (double x : samples)
    if (!std::isnan(x)) valid.push_back(x);
  if (valid.empty()) return {std::nan(""), std::numeric_limits<double>::infinity()};
  double mean = 0.0;
  for (double x : valid) mean += x;
  mean /= static_cast<double>(valid.size());
  if (valid.size() < 2) return {mean, std::numeric_limits<double>::infinity()};
  double ss = 0.0;
  for (double x : valid) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(valid.size() - 1));
  const boost::math::students_t dist(static_cast<double>(valid.size() - 1));
  const double quantile = boost::math::quantile(boost::math::complement(dist, 0.025));
  return {mean, quantile * sd / std::sqrt(static_cast<double>(valid.size()))};
}

BatchEstimates batch_confidence(const SimStats& stats, std::size_t batches) {
  if (batches < 2) throw std::invalid_argument("batch_confidence: at least 2 batches required");
  if (stats.segments.size() < batches)
    throw std::invalid_argument("batch_confidence: only " + std::to_string(stats.segments.size()) +
                                " post-warmup segments for " + std::to_string(batches) + " batches");

  std::vector<SimAccumulator> groups(batches, SimAccumulator(stats.total.occupancy.size(), stats.classes));
  for (std::size_t s = 0; s < stats.segments.size(); ++s)
    groups[s * batches / stats.segments.size()].merge(stats.segments[s]);

  const double nan = std::nan("");
  BatchEstimates out;
  out.batches = batches;
  std::vector<double> samples(batches);
  for (std::size_t c = 0; c < stats.total.occupancy.size(); ++c) {
    for (std::size_t b = 0; b < batches; ++b) samples[b] = groups[b].occupancy[c] / groups[b].elapsed;
    out.occupancy.push_back(mean_confidence(samples));
  }
  for (std::size_t k = 0; k < stats.classes; ++k) {
    ClassEstimates e;
    for (std::size_t b = 0; b < batches; ++b) {
      const auto& g = groups[b];
      samples[b] = g.arrivals[k] ? static_cast<double>(g.losses[k]) / static_cast<double>(g.arrivals[k]) : nan;
    }
    e.loss = mean_confidence(samples);
    for (std::size_t b = 0; b < batches; ++b) {
      const auto& g = groups[b];
      samples[b] = g.served[k] ? g.wait_sum[k] / static_cast<double>(g.served[k]) : nan;
    }
    e.wait = mean_confidence(samples);
    for (std::size_t b = 0; b < batches; ++b) samples[b] = groups[b].backlog_time[k] / groups[b].elapsed;
    e.backlog = mean_confidence(samples);
    out.classes.push_back(e);
  }
  return out;
}

}  // namespace tbf
