#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tbf/sparse.hpp"
#include "tbf/statespace.hpp"

namespace tbf {

/// Row-stochastic matrix (rows sum to 1 within 1e-12, entries >= 0).
class TransitionMatrix {
 public:
  explicit TransitionMatrix(SparseMatrix m);
  const SparseMatrix& matrix() const { return m_; }
  std::size_t dimension() const { return m_.rows(); }
  Vector apply(std::span<const double> v) const { return m_.left_multiply(v); }

 private:
  SparseMatrix m_;
};

/// Conservative generator (rows sum to 0, off-diagonals >= 0).
class RateMatrix {
 public:
  explicit RateMatrix(SparseMatrix m);
  const SparseMatrix& matrix() const { return m_; }
  std::size_t dimension() const { return m_.rows(); }

 private:
  SparseMatrix m_;
};

/// Which generators a kernel accepts. Sub-generators (rows summing to <= 0)
/// describe a block of a larger chain whose leaving mass is not tracked.
enum class GeneratorKind { conservative, sub };

/// Throws std::invalid_argument if `a` is not a generator of the given kind
/// (row sums checked to within `slack`).
void check_generator(const SparseMatrix& a, GeneratorKind kind, double slack = 1e-9);

/// Poisson pmf p(0..n) with the mass beyond n reported separately.
struct ArrivalDistribution {
  double mean = 0.0;
  Vector pmf;
  double tail = 0.0;

  /// Smallest cutoff with tail < tail_tol, but never fewer than
  /// min_terms + 1 pmf terms.
  static ArrivalDistribution poisson(double mean, double tail_tol = 1e-14, std::size_t min_terms = 0);
};

/// Uniformized form of a generator, reusable for many actions.
///   v exp(A t)                 = sum_k Pois(k; Lt) v P^k
///   (1/t) int_0^t v exp(A s) ds = sum_k P(Pois(Lt) > k) / (Lt) v P^k
/// with L = max |A_ii| and P = I + A / L.
class Uniformization {
 public:
  explicit Uniformization(const SparseMatrix& a, GeneratorKind kind = GeneratorKind::conservative);

  double rate() const { return rate_; }
  std::size_t dimension() const { return dim_; }

  Vector expm(std::span<const double> v, double t, double tol = 1e-12) const;
  Vector integral_mean(std::span<const double> v, double t, double tol = 1e-12) const;

 private:
  Vector series(std::span<const double> v, std::span<const double> weights) const;

  std::size_t dim_;
  double rate_;
  SparseMatrix jump_;
};

Vector expm_action(const SparseMatrix& a, std::span<const double> v, double t, double tol = 1e-12,
                   GeneratorKind kind = GeneratorKind::conservative);
inline Vector expm_action(const RateMatrix& a, std::span<const double> v, double t, double tol = 1e-12) {
  return expm_action(a.matrix(), v, t, tol);
}

/// Time average (1/t) * integral over [0, t] of v exp(A s).
Vector integrate_expm_action(const SparseMatrix& a, std::span<const double> v, double t, double tol = 1e-12,
                             GeneratorKind kind = GeneratorKind::conservative);
inline Vector integrate_expm_action(const RateMatrix& a, std::span<const double> v, double t,
                                    double tol = 1e-12) {
  return integrate_expm_action(a.matrix(), v, t, tol);
}

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(std::size_t iterations, double residual);
  std::size_t iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

struct StationaryEstimate {
  Vector pi;
  std::size_t iterations = 0;
  double residual = 0.0;  // ||step(pi) - pi||_1
};

using StepFunction = std::function<Vector(std::span<const double>)>;

/// Power iteration from `start` until ||step(pi) - pi||_1 <= tol. Iterates
/// are renormalised to unit mass. Throws ConvergenceError after max_iters.
StationaryEstimate stationary(const StepFunction& step, Vector start, double tol = 1e-10,
                              std::size_t max_iters = 1'000'000);

/// Stationary distribution of a DTMC by power iteration from a point mass.
StationaryEstimate chain_stationary(const TransitionMatrix& chain, std::size_t start, double tol = 1e-10,
                                    std::size_t max_iters = 1'000'000);

/// Replenishment map: H[i][j] = 1 iff var_replenish(X_i) = X_j.
TransitionMatrix build_H(const StateSpace& space);

/// Arrival-driven generator between token grants.
RateMatrix build_Q(const StateSpace& space, const TrafficSpec& traffic);

/// Per-token-level decomposition of Q. Coordinates of a level generator are
/// the M+1 empty-buffer states (T' = 0..M) followed by the R non-empty strings
/// of that level, in string order.
struct PartitionedGenerator {
  int bucket = 0;
  std::size_t nonempty = 0;
  SparseMatrix empty_block;              // Q^eps, (M+1) x (M+1), sub-stochastic
  SparseMatrix nonempty_block;           // Q', R x R, shared by every level
  std::vector<SparseMatrix> coupling;    // B^T, (M+1) x R, only row T nonzero
  std::vector<SparseMatrix> levels;      // Gamma^T = [[Q^eps, B^T], [0, Q']]

  std::size_t level_dimension() const { return static_cast<std::size_t>(bucket) + 1 + nonempty; }
  const SparseMatrix& gamma(int tokens) const { return levels[static_cast<std::size_t>(tokens)]; }
};

PartitionedGenerator build_partitioned(const StateSpace& space, const TrafficSpec& traffic);

/// [pi^eps  pi_T]: empty-buffer probabilities of every level followed by the
/// non-empty probabilities of level T.
Vector level_vector(const StateSpace& space, std::span<const double> pi, int tokens);

/// One embedded step v -> v exp(Q tau) H, never forming exp(Q tau).
class EmbeddedOperator {
 public:
  EmbeddedOperator(const RateMatrix& q, const TransitionMatrix& h, double period, double tol = 1e-12);
  Vector apply(std::span<const double> v) const;
  std::size_t dimension() const { return h_.dimension(); }

 private:
  Uniformization between_;
  TransitionMatrix h_;
  double period_;
  double tol_;
};

/// Fixed packet length chains on S in {0..L+M} observed after each grant,
/// driven by Poisson(lambda tau) arrivals per period.
TransitionMatrix build_fixed_chain(double load, int buffer, int bucket);
TransitionMatrix build_md1_chain(double load, int buffer, int bucket);

}  // namespace tbf
