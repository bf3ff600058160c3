#include "tbf/statespace.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "tbf/dynamics.hpp"

namespace tbf {

void TrafficSpec::validate() const {
  if (sizes.empty()) throw std::invalid_argument("traffic.sizes: at least one packet size required");
  if (probs.size() != sizes.size())
    throw std::invalid_argument("traffic.probs: expected one probability per packet size");
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] < 1) throw std::invalid_argument("traffic.sizes: sizes must be >= 1");
    if (k > 0 && sizes[k] <= sizes[k - 1])
      throw std::invalid_argument("traffic.sizes: sizes must be strictly increasing");
    if (!(probs[k] > 0.0) || !std::isfinite(probs[k]))
      throw std::invalid_argument("traffic.probs: probabilities must be positive");
  }
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("traffic.probs: probabilities must sum to 1");
  if (!(rate > 0.0) || !std::isfinite(rate)) throw std::invalid_argument("traffic.rate: must be a finite positive number");
}

void FilterConfig::validate() const {
  if (bucket < 1) throw std::invalid_argument("filter.bucket: must be >= 1");
  if (buffer < 1) throw std::invalid_argument("filter.buffer: must be >= 1");
  if (!(period > 0.0) || !std::isfinite(period))
    throw std::invalid_argument("filter.period: must be a finite positive number");
}

void validate_pairing(const TrafficSpec& traffic, const FilterConfig& filter) {
  if (!traffic.sizes.empty() && traffic.max_size() > filter.buffer)
    throw std::invalid_argument("traffic.sizes: largest packet exceeds filter.buffer");
}

int backlog(std::span<const int> z) { return std::accumulate(z.begin(), z.end(), 0); }

int class_count(std::span<const int> sizes, std::size_t k, std::span<const int> z) {
  return static_cast<int>(std::count(z.begin(), z.end(), sizes[k]));
}

std::string to_string(const SystemState& x) {
  std::string out = "(" + std::to_string(x.tokens) + ", ";
  if (x.buffer.empty()) return out + "eps)";
  out += "[";
  for (std::size_t i = 0; i < x.buffer.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(x.buffer[i]);
  }
  return out + "])";
}

namespace {

// Preorder DFS with children in increasing size order yields lexicographic order.
void extend(std::span<const int> sizes, int room, BufferString& prefix, std::vector<BufferString>& out) {
  for (int l : sizes) {
    if (l > room) break;
    prefix.push_back(l);
    out.push_back(prefix);
    extend(sizes, room - l, prefix, out);
    prefix.pop_back();
  }
}

std::vector<int> sorted_alphabet(std::span<const int> sizes) {
  std::vector<int> alphabet(sizes.begin(), sizes.end());
  std::sort(alphabet.begin(), alphabet.end());
  alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
  return alphabet;
}

}  // namespace

std::vector<BufferString> enumerate_strings(std::span<const int> sizes, int limit) {
  const auto alphabet = sorted_alphabet(sizes);
  std::vector<BufferString> out{BufferString{}};
  BufferString prefix;
  extend(alphabet, limit, prefix, out);
  return out;
}

std::uint64_t count_strings(std::span<const int> sizes, int limit) {
  if (limit < 0) return 0;
  const auto alphabet = sorted_alphabet(sizes);
  // exact[n] = number of strings with backlog exactly n
  std::vector<std::uint64_t> exact(static_cast<std::size_t>(limit) + 1, 0);
  exact[0] = 1;
  std::uint64_t total = 1;
  for (int n = 1; n <= limit; ++n) {
    for (int l : alphabet) {
      if (l > n) break;
      exact[n] += exact[n - l];
    }
    total += exact[n];
  }
  return total;
}

double cardinality_bound(std::span<const int> sizes, int limit) {
  const auto alphabet = sorted_alphabet(sizes);
  const double beta = std::pow(static_cast<double>(alphabet.size()), 1.0 / alphabet.front());
  return std::pow(beta, limit);
}

StateSpace::StateSpace(const TrafficSpec& traffic, const FilterConfig& filter)
    : bucket_(filter.bucket), buffer_(filter.buffer), sizes_(traffic.sizes) {
  if (bucket_ < 0) throw std::invalid_argument("filter.bucket: must be >= 0");
  if (sizes_.empty()) throw std::invalid_argument("traffic.sizes: at least one packet size required");
  validate_pairing(traffic, filter);

  strings_ = enumerate_strings(sizes_, buffer_);
  backlogs_.reserve(strings_.size());
  for (std::size_t j = 0; j < strings_.size(); ++j) {
    backlogs_.push_back(backlog(strings_[j]));
    lookup_.emplace(strings_[j], j);
  }

  const std::size_t classes = sizes_.size();
  append_.assign(strings_.size() * classes, npos);
  pop_head_.assign(strings_.size(), npos);
  for (std::size_t j = 0; j < strings_.size(); ++j) {
    BufferString z = strings_[j];
    for (std::size_t k = 0; k < classes; ++k) {
      if (backlogs_[j] + sizes_[k] > buffer_) continue;
      z.push_back(sizes_[k]);
      append_[j * classes + k] = lookup_.at(z);
      z.pop_back();
    }
    if (!z.empty()) pop_head_[j] = lookup_.at(BufferString(z.begin() + 1, z.end()));
  }
}

SystemState StateSpace::state(std::size_t i) const { return {tokens_of(i), strings_[string_of(i)]}; }

std::size_t StateSpace::string_index(const BufferString& z) const {
  auto it = lookup_.find(z);
  return it == lookup_.end() ? npos : it->second;
}

std::size_t StateSpace::index(const SystemState& x) const {
  const std::size_t j = string_index(x.buffer);
  if (x.tokens < 0 || x.tokens > bucket_ || j == npos)
    throw std::out_of_range("state outside the state space: " + to_string(x));
  return index(x.tokens, j);
}

StateSpace build_state_space(const TrafficSpec& traffic, const FilterConfig& filter) {
  return StateSpace(traffic, filter);
}

std::vector<bool> reachable_states(const StateSpace& space) {
  std::vector<bool> seen(space.size(), false);
  std::deque<std::size_t> frontier;
  const std::size_t start = space.empty_index(space.bucket());
  seen[start] = true;
  frontier.push_back(start);
  auto visit = [&](const SystemState& x) {
    const std::size_t i = space.index(x);
    if (!seen[i]) {
      seen[i] = true;
      frontier.push_back(i);
    }
  };
  while (!frontier.empty()) {
    const SystemState x = space.state(frontier.front());
    frontier.pop_front();
    visit(var_replenish(x, space.bucket()));
    for (int l : space.sizes()) visit(var_arrive(x, l, space.buffer()).state);
  }
  return seen;
}

}  // namespace tbf
