#include "tbf/analysis.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tbf {

Model::Model(TrafficSpec traffic_in, FilterConfig filter_in)
    : traffic((traffic_in.validate(), std::move(traffic_in))),
      filter((filter_in.validate(), filter_in)),
      space(traffic, filter),
      H(build_H(space)),
      Q(build_Q(space, traffic)),
      partition(build_partitioned(space, traffic)) {}

Vector StationaryResult::empty_slice() const {
  Vector out;
  for (int t = 0; t <= bucket; ++t) out.push_back(pi[static_cast<std::size_t>(t) * strings]);
  return out;
}

std::span<const double> StationaryResult::level(int tokens) const {
  return std::span<const double>(pi).subspan(static_cast<std::size_t>(tokens) * strings, strings);
}

StationaryResult solve_stationary(const Model& model, const SolverOptions& options) {
  const EmbeddedOperator g(model.Q, model.H, model.filter.period, options.expm_tol);
  Vector start(model.space.size(), 0.0);
  start[model.space.empty_index(model.space.bucket())] = 1.0;
  auto est = stationary([&](std::span<const double> v) { return g.apply(v); }, std::move(start), options.tol,
                        options.max_iters);
  return {std::move(est.pi), est.iterations, est.residual, model.space.bucket(), model.space.string_count()};
}

StationaryResult solve_stationary(const StateSpace& space, const TrafficSpec& traffic, const FilterConfig& filter,
                                  const SolverOptions& options) {
  const TransitionMatrix h = build_H(space);
  const RateMatrix q = build_Q(space, traffic);
  const EmbeddedOperator g(q, h, filter.period, options.expm_tol);
  Vector start(space.size(), 0.0);
  start[space.empty_index(space.bucket())] = 1.0;
  auto est = stationary([&](std::span<const double> v) { return g.apply(v); }, std::move(start), options.tol,
                        options.max_iters);
  return {std::move(est.pi), est.iterations, est.residual, space.bucket(), space.string_count()};
}

Vector map_s_to_q(std::span<const double> pi_s, int buffer, int bucket) {
  if (pi_s.size() != static_cast<std::size_t>(buffer + bucket + 1))
    throw std::invalid_argument("map_s_to_q: expected L+M+1 probabilities");
  Vector q(static_cast<std::size_t>(buffer) + 1, 0.0);
  for (int s = 0; s <= bucket; ++s) q[0] += pi_s[static_cast<std::size_t>(s)];
  for (int j = 1; j <= buffer; ++j) q[static_cast<std::size_t>(j)] = pi_s[static_cast<std::size_t>(j + bucket)];
  return q;
}

Vector backlog_marginal(const StateSpace& space, std::span<const double> dist) {
  Vector out(static_cast<std::size_t>(space.buffer()) + 1, 0.0);
  for (std::size_t i = 0; i < space.size(); ++i)
    out[static_cast<std::size_t>(space.string_backlog(space.string_of(i)))] += dist[i];
  return out;
}

IndicatorSet::IndicatorSet(const StateSpace& space, const Predicate& member) : member_(space.size(), 0) {
  for (std::size_t i = 0; i < space.size(); ++i)
    member_[i] = member(space.tokens_of(i), space.string(space.string_of(i))) ? 1 : 0;
}

IndicatorSet IndicatorSet::all(const StateSpace& space) {
  IndicatorSet s;
  s.member_.assign(space.size(), 1);
  return s;
}

IndicatorSet IndicatorSet::none(const StateSpace& space) {
  IndicatorSet s;
  s.member_.assign(space.size(), 0);
  return s;
}

IndicatorSet IndicatorSet::operator|(const IndicatorSet& other) const {
  if (other.member_.size() != member_.size()) throw std::invalid_argument("indicator sets of different spaces");
  IndicatorSet s = *this;
  for (std::size_t i = 0; i < member_.size(); ++i) s.member_[i] = member_[i] | other.member_[i];
  return s;
}

namespace {

Vector level_time_average(const StateSpace& space, const StationaryResult& result,
                          const PartitionedGenerator& partition, int level, double period, double tol) {
  const Uniformization u(partition.gamma(level), GeneratorKind::sub);
  return u.integral_mean(level_vector(space, result.pi, level), period, tol);
}

}  // namespace

double time_average(const StateSpace& space, const StationaryResult& result, const PartitionedGenerator& partition,
                    const IndicatorSet& set, double period, double tol, int empty_level) {
  const int m = space.bucket();
  const auto offset = static_cast<std::size_t>(m) + 1;
  double total = 0.0;
  for (int l = 0; l <= m; ++l) {
    const IndexRange block = space.nonempty_block(l);
    bool any = false;
    for (std::size_t i = block.begin; i < block.end && !any; ++i) any = set.contains(i);
    if (!any) continue;
    const Vector w = level_time_average(space, result, partition, l, period, tol);
    for (std::size_t i = block.begin; i < block.end; ++i)
      if (set.contains(i)) total += w[offset + (i - block.begin)];
  }
  bool any_empty = false;
  for (int t = 0; t <= m; ++t) any_empty = any_empty || set.contains(space.empty_index(t));
  if (any_empty) {
    const Vector w = level_time_average(space, result, partition, empty_level, period, tol);
    for (int t = 0; t <= m; ++t)
      if (set.contains(space.empty_index(t))) total += w[static_cast<std::size_t>(t)];
  }
  return total;
}

double time_average_full(const StateSpace& space, const StationaryResult& result, const RateMatrix& q,
                         const IndicatorSet& set, double period, double tol) {
  const Vector w = integrate_expm_action(q, result.pi, period, tol);
  double total = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i)
    if (set.contains(i)) total += w[i];
  return total;
}

TimeAverages::TimeAverages(const StateSpace& space, const StationaryResult& result,
                           const PartitionedGenerator& partition, double period, double tol)
    : dist_(space.size(), 0.0) {
  const int m = space.bucket();
  const auto offset = static_cast<std::size_t>(m) + 1;
  for (int l = 0; l <= m; ++l) {
    const Vector w = level_time_average(space, result, partition, l, period, tol);
    const IndexRange block = space.nonempty_block(l);
    for (std::size_t i = block.begin; i < block.end; ++i) dist_[i] = w[offset + (i - block.begin)];
    if (l == 0)
      for (int t = 0; t <= m; ++t) dist_[space.empty_index(t)] = w[static_cast<std::size_t>(t)];
  }
}

double TimeAverages::operator()(const IndicatorSet& set) const {
  double total = 0.0;
  for (std::size_t i = 0; i < dist_.size(); ++i)
    if (set.contains(i)) total += dist_[i];
  return total;
}

double OccupancyTable::total() const { return std::accumulate(cells.begin(), cells.end(), 0.0); }

OccupancyTable occupancy_table(const StateSpace& space, const TimeAverages& averages) {
  OccupancyTable table{space.bucket(), space.buffer(), {}};
  table.cells.assign(static_cast<std::size_t>(space.bucket() + 1) * static_cast<std::size_t>(space.buffer() + 1),
                     0.0);
  const auto& dist = averages.distribution();
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto cell = static_cast<std::size_t>(space.tokens_of(i)) * static_cast<std::size_t>(space.buffer() + 1) +
                      static_cast<std::size_t>(space.string_backlog(space.string_of(i)));
    table.cells[cell] += dist[i];
  }
  return table;
}

double loss_ratio(const StateSpace& space, const TimeAverages& averages, int size) {
  const int free_limit = space.buffer() - size;
  const auto& dist = averages.distribution();
  double total = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const std::size_t j = space.string_of(i);
    if (j != 0 && space.string_backlog(j) > free_limit) total += dist[i];
  }
  return total;
}

double class_backlog(const StateSpace& space, const TimeAverages& averages, std::size_t k) {
  const auto& dist = averages.distribution();
  double total = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const std::size_t j = space.string_of(i);
    if (j != 0) total += dist[i] * class_count(space.sizes(), k, space.string(j));
  }
  return total;
}

std::optional<double> waiting_time(double backlog, double loss, double rate, double prob) {
  const double effective = (1.0 - loss) * rate * prob;
  if (!(effective > 0.0)) return std::nullopt;
  return backlog / effective;
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("total_variation: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return 0.5 * sum;
}

AnalyticReport analyze(const Model& model, const SolverOptions& options) {
  AnalyticReport report;
  report.stationary = solve_stationary(model, options);
  const TimeAverages averages(model.space, report.stationary, model.partition, model.filter.period,
                              options.expm_tol);
  report.occupancy = occupancy_table(model.space, averages);
  for (std::size_t k = 0; k < model.traffic.classes(); ++k) {
    ClassMetrics c;
    c.size = model.traffic.sizes[k];
    c.prob = model.traffic.probs[k];
    c.loss = loss_ratio(model.space, averages, c.size);
    c.backlog = class_backlog(model.space, averages, k);
    c.wait = waiting_time(c.backlog, c.loss, model.traffic.rate, c.prob);
    c.throughput = (1.0 - c.loss) * model.traffic.rate * c.prob;
    report.classes.push_back(c);
  }
  report.error_bound = report.stationary.residual + options.expm_tol;
  return report;
}

}  // namespace tbf
