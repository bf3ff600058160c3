#include "tbf/dynamics.hpp"

#include <algorithm>

namespace tbf {

FixedState fixed_replenish(FixedState x, int bucket) {
  if (x.q > 0) return {x.q - 1, x.t};
  return {0, std::min(bucket, x.t + 1)};
}

FixedArrival fixed_arrive(FixedState x, int buffer) {
  if (x.t > 0) return {{x.q, x.t - 1}, ArrivalOutcome::transferred};
  if (x.q >= buffer) return {x, ArrivalOutcome::rejected};
  return {{x.q + 1, x.t}, ArrivalOutcome::queued};
}

UnifiedCoord to_unified(FixedState x, int bucket) {
  const int k = x.q - x.t;
  return {k, k + bucket};
}

FixedState from_unified(UnifiedCoord c) { return {std::max(0, c.k), -std::min(0, c.k)}; }

int s_step(int s, int arrivals, int buffer, int bucket) {
  return std::max(0, std::min(buffer + bucket, s + arrivals) - 1);
}

int md1_step(int s, int arrivals, int buffer, int bucket) {
  if (s > 0) return s_step(s, arrivals, buffer, bucket);
  return std::max(0, std::min(buffer + bucket, arrivals));
}

SystemState var_replenish(const SystemState& x, int bucket) {
  if (!x.buffer.empty()) {
    const int left = x.tokens - x.buffer.front() + 1;
    if (left >= 0) return {left, BufferString(x.buffer.begin() + 1, x.buffer.end())};
  }
  return {std::min(bucket, x.tokens + 1), x.buffer};
}

VarArrival var_arrive(const SystemState& x, int size, int buffer) {
  if (x.buffer.empty()) {
    if (x.tokens >= size) return {{x.tokens - size, {}}, ArrivalOutcome::transferred};
    return {{x.tokens, {size}}, ArrivalOutcome::queued};
  }
  if (backlog(x.buffer) + size > buffer) return {x, ArrivalOutcome::rejected};
  SystemState next = x;
  next.buffer.push_back(size);
  return {std::move(next), ArrivalOutcome::queued};
}

}  // namespace tbf
