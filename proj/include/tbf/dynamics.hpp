#pragma once

#include "tbf/statespace.hpp"

namespace tbf {

// Single-event transition functions of the two token bucket variants.
// All functions are pure; capacities are passed explicitly.

enum class ArrivalOutcome {
  transferred,  // passed straight through using stored tokens
  queued,       // appended to the ingress buffer
  rejected,     // not enough buffer space; state unchanged
};

inline bool accepted(ArrivalOutcome o) { return o != ArrivalOutcome::rejected; }

/// Fixed packet length filter: Q packets buffered, T tokens stored.
struct FixedState {
  int q = 0;
  int t = 0;

  auto operator<=>(const FixedState&) const = default;
};

struct FixedArrival {
  FixedState state;
  ArrivalOutcome outcome;
};

FixedState fixed_replenish(FixedState x, int bucket);
FixedArrival fixed_arrive(FixedState x, int buffer);

/// K = Q - T and S = K + M. Only meaningful while Q * T = 0.
struct UnifiedCoord {
  int k = 0;
  int s = 0;
};

UnifiedCoord to_unified(FixedState x, int bucket);
FixedState from_unified(UnifiedCoord c);

/// Periodic Transfer recursion over one replenishment period with `arrivals`
/// packets: max{0, min{L+M, s+a} - 1}.
int s_step(int s, int arrivals, int buffer, int bucket);

/// The M/D/1/L+M contrast recursion: an empty system jumps to min{L+M, a}.
int md1_step(int s, int arrivals, int buffer, int bucket);

/// Token grant for the variable length filter. At most one packet leaves.
SystemState var_replenish(const SystemState& x, int bucket);

struct VarArrival {
  SystemState state;
  ArrivalOutcome outcome;
};

/// Arrival of a packet of `size` tokens. A non-empty buffer blocks instant
/// transfer (FCFS), so the packet is appended or dropped.
VarArrival var_arrive(const SystemState& x, int size, int buffer);

}  // namespace tbf
