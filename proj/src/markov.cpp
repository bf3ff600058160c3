#include "tbf/markov.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tbf/dynamics.hpp"

namespace tbf {

namespace {

// Poisson(mean) pmf from k = 0 until the remaining mass is below `cutoff`.
Vector poisson_terms(double mean, double cutoff) {
  if (mean <= 0.0) return {1.0};
  Vector terms;
  const double log_mean = std::log(mean);
  for (std::size_t k = 0;; ++k) {
    const double kd = static_cast<double>(k);
    const double p = std::exp(-mean + kd * log_mean - std::lgamma(kd + 1.0));
    terms.push_back(p);
    if (kd + 1.0 > mean) {
      const double ratio = mean / (kd + 1.0);
      if (p == 0.0 || p * ratio / (1.0 - ratio) < cutoff) break;
    }
  }
  return terms;
}

// suffix[k] = sum_{j > k} values[j]
Vector suffix_sums(std::span<const double> values) {
  Vector suffix(values.size(), 0.0);
  double acc = 0.0;
  for (std::size_t k = values.size(); k-- > 0;) {
    suffix[k] = acc;
    acc += values[k];
  }
  return suffix;
}

std::size_t first_below(std::span<const double> suffix, double tol) {
  for (std::size_t k = 0; k < suffix.size(); ++k)
    if (suffix[k] < tol) return k;
  return suffix.size() - 1;
}

constexpr double kNegligible = 1e-40;

}  // namespace

TransitionMatrix::TransitionMatrix(SparseMatrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) throw std::invalid_argument("transition matrix must be square");
  for (std::size_t r = 0; r < m_.rows(); ++r) {
    m_.for_each_in_row(r, [](std::size_t, double v) {
      if (v < 0.0) throw std::invalid_argument("transition matrix has a negative entry");
    });
    if (std::abs(m_.row_sum(r) - 1.0) > 1e-12)
      throw std::invalid_argument("transition matrix row " + std::to_string(r) + " does not sum to 1");
  }
}

RateMatrix::RateMatrix(SparseMatrix m) : m_(std::move(m)) {
  check_generator(m_, GeneratorKind::conservative, 1e-12);
}

void check_generator(const SparseMatrix& a, GeneratorKind kind, double slack) {
  if (a.rows() != a.cols()) throw std::invalid_argument("generator must be square");
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double diag = 0.0;
    a.for_each_in_row(r, [&](std::size_t c, double v) {
      if (c == r) diag = v;
      else if (v < 0.0) throw std::invalid_argument("generator has a negative off-diagonal rate");
    });
    const double sum = a.row_sum(r);
    const double scale = std::max(1.0, std::abs(diag));
    const bool ok = kind == GeneratorKind::conservative ? std::abs(sum) <= slack * scale : sum <= slack * scale;
    if (!ok)
      throw std::invalid_argument("generator row " + std::to_string(r) + " has row sum " + std::to_string(sum));
  }
}

ArrivalDistribution ArrivalDistribution::poisson(double mean, double tail_tol, std::size_t min_terms) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("Poisson mean must be finite and >= 0");
  Vector all = poisson_terms(mean, kNegligible);
  if (all.size() < min_terms + 1) all.resize(min_terms + 1, 0.0);
  const Vector suffix = suffix_sums(all);
  std::size_t n = std::max(min_terms, first_below(suffix, tail_tol));
  ArrivalDistribution d;
  d.mean = mean;
  d.pmf.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n) + 1);
  d.tail = suffix[n];
  return d;
}

Uniformization::Uniformization(const SparseMatrix& a, GeneratorKind kind) : dim_(a.rows()), rate_(0.0) {
  check_generator(a, kind);
  for (std::size_t r = 0; r < dim_; ++r) rate_ = std::max(rate_, std::abs(a.at(r, r)));
  std::vector<SparseMatrix::Entry> entries;
  entries.reserve(a.nonzeros() + dim_);
  for (std::size_t r = 0; r < dim_; ++r) entries.push_back({r, r, 1.0});
  if (rate_ > 0.0)
    for (const auto& e : a.entries()) entries.push_back({e.row, e.col, e.value / rate_});
  jump_ = SparseMatrix(dim_, dim_, std::move(entries));
}

Vector Uniformization::series(std::span<const double> v, std::span<const double> weights) const {
  Vector result(dim_, 0.0);
  Vector term(v.begin(), v.end());
  Vector next(dim_);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (k > 0) {
      jump_.left_multiply(term, next);
      term.swap(next);
    }
    for (std::size_t i = 0; i < dim_; ++i) result[i] += weights[k] * term[i];
  }
  return result;
}

Vector Uniformization::expm(std::span<const double> v, double t, double tol) const {
  if (v.size() != dim_) throw std::invalid_argument("vector length does not match generator");
  if (!(t >= 0.0) || !(tol > 0.0)) throw std::invalid_argument("expm_action requires t >= 0 and tol > 0");
  const double mean = rate_ * t;
  if (mean == 0.0) return Vector(v.begin(), v.end());
  const Vector pmf = poisson_terms(mean, kNegligible);
  const std::size_t cut = first_below(suffix_sums(pmf), tol);
  return series(v, std::span<const double>(pmf).first(cut + 1));
}

Vector Uniformization::integral_mean(std::span<const double> v, double t, double tol) const {
  if (v.size() != dim_) throw std::invalid_argument("vector length does not match generator");
  if (!(t >= 0.0) || !(tol > 0.0)) throw std::invalid_argument("integrate_expm_action requires t >= 0 and tol > 0");
  const double mean = rate_ * t;
  if (mean == 0.0) return Vector(v.begin(), v.end());
  const Vector pmf = poisson_terms(mean, kNegligible);
  Vector weights = suffix_sums(pmf);  // P(N > k)
  for (double& w : weights) w /= mean;
  const std::size_t cut = first_below(suffix_sums(weights), tol);
  return series(v, std::span<const double>(weights).first(cut + 1));
}

Vector expm_action(const SparseMatrix& a, std::span<const double> v, double t, double tol, GeneratorKind kind) {
  return Uniformization(a, kind).expm(v, t, tol);
}

Vector integrate_expm_action(const SparseMatrix& a, std::span<const double> v, double t, double tol,
                             GeneratorKind kind) {
  return Uniformization(a, kind).integral_mean(v, t, tol);
}

ConvergenceError::ConvergenceError(std::size_t iterations, double residual)
    : std::runtime_error("stationary iteration did not converge after " + std::to_string(iterations) +
                         " iterations (residual " + std::to_string(residual) + ")"),
      iterations_(iterations),
      residual_(residual) {}

StationaryEstimate stationary(const StepFunction& step, Vector start, double tol, std::size_t max_iters) {
  if (!(tol > 0.0)) throw std::invalid_argument("stationary: tol must be positive");
  Vector pi = std::move(start);
  double residual = 0.0;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    Vector next = step(pi);
    if (next.size() != pi.size()) throw std::invalid_argument("stationary: step changed the dimension");
    residual = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) residual += std::abs(next[i] - pi[i]);
    if (residual <= tol) return {std::move(pi), it, residual};
    const double mass = std::accumulate(next.begin(), next.end(), 0.0);
    for (double& x : next) x /= mass;
    pi = std::move(next);
  }
  throw ConvergenceError(max_iters, residual);
}

StationaryEstimate chain_stationary(const TransitionMatrix& chain, std::size_t start, double tol,
                                    std::size_t max_iters) {
  Vector v(chain.dimension(), 0.0);
  v.at(start) = 1.0;
  return stationary([&](std::span<const double> x) { return chain.apply(x); }, std::move(v), tol, max_iters);
}

TransitionMatrix build_H(const StateSpace& space) {
  std::vector<SparseMatrix::Entry> entries;
  entries.reserve(space.size());
  for (std::size_t i = 0; i < space.size(); ++i)
    entries.push_back({i, space.index(var_replenish(space.state(i), space.bucket())), 1.0});
  return TransitionMatrix(SparseMatrix(space.size(), space.size(), std::move(entries)));
}

RateMatrix build_Q(const StateSpace& space, const TrafficSpec& traffic) {
  const auto sizes = space.sizes();
  std::vector<SparseMatrix::Entry> entries;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const int t = space.tokens_of(i);
    const std::size_t j = space.string_of(i);
    double out = 0.0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const double r = traffic.probs[k] * traffic.rate;
      if (j == 0) {
        const std::size_t target = t >= sizes[k] ? space.empty_index(t - sizes[k])
                                                 : space.index(t, space.append_target(0, k));
        entries.push_back({i, target, r});
        out += r;
      } else if (const std::size_t next = space.append_target(j, k); next != StateSpace::npos) {
        entries.push_back({i, space.index(t, next), r});
        out += r;
      }
    }
    entries.push_back({i, i, -out});
  }
  return RateMatrix(SparseMatrix(space.size(), space.size(), std::move(entries)));
}

PartitionedGenerator build_partitioned(const StateSpace& space, const TrafficSpec& traffic) {
  const auto sizes = space.sizes();
  const int m = space.bucket();
  const std::size_t levels = static_cast<std::size_t>(m) + 1;
  const std::size_t r = space.nonempty_count();

  PartitionedGenerator g;
  g.bucket = m;
  g.nonempty = r;

  std::vector<SparseMatrix::Entry> eps;
  for (int t = 0; t <= m; ++t) {
    const auto row = static_cast<std::size_t>(t);
    eps.push_back({row, row, -traffic.rate});
    for (std::size_t k = 0; k < sizes.size(); ++k)
      if (t - sizes[k] >= 0)
        eps.push_back({row, static_cast<std::size_t>(t - sizes[k]), traffic.probs[k] * traffic.rate});
  }
  g.empty_block = SparseMatrix(levels, levels, std::move(eps));

  // Non-empty strings j = 1..R sit at block coordinate j - 1.
  std::vector<SparseMatrix::Entry> prime;
  for (std::size_t j = 1; j <= r; ++j) {
    double out = 0.0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const std::size_t next = space.append_target(j, k);
      if (next == StateSpace::npos) continue;
      const double rate = traffic.probs[k] * traffic.rate;
      prime.push_back({j - 1, next - 1, rate});
      out += rate;
    }
    prime.push_back({j - 1, j - 1, -out});
  }
  g.nonempty_block = SparseMatrix(r, r, std::move(prime));

  for (int t = 0; t <= m; ++t) {
    const auto row = static_cast<std::size_t>(t);
    std::vector<SparseMatrix::Entry> b;
    for (std::size_t k = 0; k < sizes.size(); ++k)
      if (t - sizes[k] < 0) b.push_back({row, space.append_target(0, k) - 1, traffic.probs[k] * traffic.rate});
    g.coupling.emplace_back(levels, r, b);

    std::vector<SparseMatrix::Entry> gamma = g.empty_block.entries();
    for (const auto& e : b) gamma.push_back({e.row, levels + e.col, e.value});
    for (const auto& e : g.nonempty_block.entries()) gamma.push_back({levels + e.row, levels + e.col, e.value});
    g.levels.emplace_back(levels + r, levels + r, std::move(gamma));
  }
  return g;
}

Vector level_vector(const StateSpace& space, std::span<const double> pi, int tokens) {
  const int m = space.bucket();
  Vector v;
  v.reserve(static_cast<std::size_t>(m) + 1 + space.nonempty_count());
  for (int t = 0; t <= m; ++t) v.push_back(pi[space.empty_index(t)]);
  const IndexRange block = space.nonempty_block(tokens);
  v.insert(v.end(), pi.begin() + static_cast<std::ptrdiff_t>(block.begin),
           pi.begin() + static_cast<std::ptrdiff_t>(block.end));
  return v;
}

EmbeddedOperator::EmbeddedOperator(const RateMatrix& q, const TransitionMatrix& h, double period, double tol)
    : between_(q.matrix()), h_(h), period_(period), tol_(tol) {
  if (q.dimension() != h.dimension()) throw std::invalid_argument("Q and H dimensions differ");
}

Vector EmbeddedOperator::apply(std::span<const double> v) const {
  return h_.apply(between_.expm(v, period_, tol_));
}

namespace {

template <typename Step>
TransitionMatrix build_s_chain(double load, int buffer, int bucket, Step step) {
  if (!(load > 0.0)) throw std::invalid_argument("fixed length chain requires lambda * tau > 0");
  const int top = buffer + bucket;
  const auto arrivals = ArrivalDistribution::poisson(load, 1e-14, static_cast<std::size_t>(top));
  const auto dim = static_cast<std::size_t>(top) + 1;
  std::vector<SparseMatrix::Entry> entries;
  for (int s = 0; s <= top; ++s) {
    const auto row = static_cast<std::size_t>(s);
    for (std::size_t a = 0; a < arrivals.pmf.size(); ++a)
      entries.push_back({row, static_cast<std::size_t>(step(s, static_cast<int>(a), buffer, bucket)),
                         arrivals.pmf[a]});
    // At least L+M arrivals saturate the buffer, so the tail shares one target.
    const int saturated = step(s, static_cast<int>(arrivals.pmf.size()), buffer, bucket);
    entries.push_back({row, static_cast<std::size_t>(saturated), arrivals.tail});
  }
  return TransitionMatrix(SparseMatrix(dim, dim, std::move(entries)));
}

}  // namespace

TransitionMatrix build_fixed_chain(double load, int buffer, int bucket) {
  return build_s_chain(load, buffer, bucket, s_step);
}

TransitionMatrix build_md1_chain(double load, int buffer, int bucket) {
  return build_s_chain(load, buffer, bucket, md1_step);
}

}  // namespace tbf
