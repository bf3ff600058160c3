#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace tbf {

/// Compound Poisson input: packet sizes (in tokens), their probabilities and
/// the total arrival rate.
struct TrafficSpec {
  std::vector<int> sizes;
  std::vector<double> probs;
  double rate = 0.0;

  std::size_t classes() const { return sizes.size(); }
  int max_size() const { return sizes.back(); }
  int min_size() const { return sizes.front(); }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct FilterConfig {
  int bucket = 1;      // M
  int buffer = 1;      // L, in tokens
  double period = 1.0; // tau

  void validate() const;
};

/// Throws unless the traffic fits the filter (every packet size <= L).
void validate_pairing(const TrafficSpec& traffic, const FilterConfig& filter);

/// Buffered packet sizes, head first.
using BufferString = std::vector<int>;

int backlog(std::span<const int> z);
int class_count(std::span<const int> sizes, std::size_t k, std::span<const int> z);

struct SystemState {
  int tokens = 0;
  BufferString buffer;

  auto operator<=>(const SystemState&) const = default;
};

std::string to_string(const SystemState& x);

/// All strings over `sizes` whose backlog is at most `limit`, in
/// lexicographic order (empty string first, prefixes before extensions).
std::vector<BufferString> enumerate_strings(std::span<const int> sizes, int limit);

/// Same count as enumerate_strings().size() without building the strings.
std::uint64_t count_strings(std::span<const int> sizes, int limit);

/// Growth estimate beta^L with beta = (#Z)^(1/min Z). Not a certified bound:
/// singleton alphabets give 1 while the true count grows with L.
double cardinality_bound(std::span<const int> sizes, int limit);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// {0..M} x Z*_L, stored token-major: index = T * #Z*_L + j, where j is the
/// lexicographic rank of the buffer string (j = 0 is the empty buffer).
class StateSpace {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  StateSpace(const TrafficSpec& traffic, const FilterConfig& filter);

  std::size_t size() const { return strings_.size() * static_cast<std::size_t>(bucket_ + 1); }
  std::size_t string_count() const { return strings_.size(); }
  std::size_t nonempty_count() const { return strings_.size() - 1; }
  int bucket() const { return bucket_; }
  int buffer() const { return buffer_; }
  std::span<const int> sizes() const { return sizes_; }

  const std::vector<BufferString>& strings() const { return strings_; }
  const BufferString& string(std::size_t j) const { return strings_[j]; }
  int string_backlog(std::size_t j) const { return backlogs_[j]; }

  SystemState state(std::size_t i) const;
  int tokens_of(std::size_t i) const { return static_cast<int>(i / strings_.size()); }
  std::size_t string_of(std::size_t i) const { return i % strings_.size(); }

  std::size_t index(int tokens, std::size_t string_idx) const {
    return static_cast<std::size_t>(tokens) * strings_.size() + string_idx;
  }
  /// Throws std::out_of_range for states outside the space.
  std::size_t index(const SystemState& x) const;
  /// npos when the string is not in Z*_L.
  std::size_t string_index(const BufferString& z) const;

  std::size_t empty_index(int tokens) const { return index(tokens, 0); }
  /// Non-empty-buffer states with `tokens` stored tokens.
  IndexRange nonempty_block(int tokens) const {
    const std::size_t base = index(tokens, 0);
    return {base + 1, base + strings_.size()};
  }

  /// String index of z_j followed by a packet of class k; npos if it overflows L.
  std::size_t append_target(std::size_t j, std::size_t k) const {
    return append_[j * sizes_.size() + k];
  }
  /// String index of z_j with its head removed (j must be non-empty).
  std::size_t head_removed(std::size_t j) const { return pop_head_[j]; }

 private:
  int bucket_;
  int buffer_;
  std::vector<int> sizes_;
  std::vector<BufferString> strings_;
  std::vector<int> backlogs_;
  std::map<BufferString, std::size_t> lookup_;
  std::vector<std::size_t> append_;
  std::vector<std::size_t> pop_head_;
};

StateSpace build_state_space(const TrafficSpec& traffic, const FilterConfig& filter);

/// States reachable from (M, empty) under arrivals and replenishments.
/// Optional pruning aid; the solvers work on the full enumeration.
std::vector<bool> reachable_states(const StateSpace& space);

}  // namespace tbf
