#include <doctest.h>

#include <random>

#include "tbf/dynamics.hpp"

using namespace tbf;

TEST_CASE("fixed_replenish") {
  CHECK(fixed_replenish({3, 0}, 5) == FixedState{2, 0});
  CHECK(fixed_replenish({0, 5}, 5) == FixedState{0, 5});
  CHECK(fixed_replenish({0, 0}, 5) == FixedState{0, 1});
}

TEST_CASE("fixed_arrive") {
  const int L = 4;
  auto r = fixed_arrive({0, 2}, L);
  CHECK(r.state == FixedState{0, 1});
  CHECK(r.outcome == ArrivalOutcome::transferred);
  r = fixed_arrive({L, 0}, L);
  CHECK(r.state == FixedState{L, 0});
  CHECK(r.outcome == ArrivalOutcome::rejected);
  r = fixed_arrive({1, 0}, L);
  CHECK(r.state == FixedState{2, 0});
  CHECK(accepted(r.outcome));
}

TEST_CASE("s_step and md1_step") {
  for (int L = 1; L <= 4; ++L)
    for (int M = 1; M <= 4; ++M) {
      CHECK(s_step(0, 0, L, M) == 0);
      CHECK(s_step(L + M, 3, L, M) == L + M - 1);
      CHECK(md1_step(0, 0, L, M) == 0);
    }
  CHECK(s_step(2, 1, 5, 5) == 2);
  CHECK(md1_step(0, 2, 5, 5) == 2);
  CHECK(s_step(0, 2, 5, 5) == 1);
  CHECK(md1_step(3, 0, 5, 5) == 2);
  CHECK(md1_step(0, 20, 5, 5) == 10);
}

TEST_CASE("unified coordinates") {
  const UnifiedCoord c = to_unified({3, 0}, 5);
  CHECK(c.k == 3);
  CHECK(c.s == 8);
  CHECK(from_unified({-2, 3}) == FixedState{0, 2});
  CHECK(from_unified({4, 9}) == FixedState{4, 0});
}

TEST_CASE("var_replenish") {
  CHECK(var_replenish({2, {3, 1}}, 5) == SystemState{0, {1}});
  CHECK(var_replenish({1, {3, 2}}, 5) == SystemState{2, {3, 2}});
  CHECK(var_replenish({5, {}}, 5) == SystemState{5, {}});
  CHECK(var_replenish({2, {}}, 5) == SystemState{3, {}});
  // enumerated but unreachable: one departure only
  CHECK(var_replenish({4, {1, 1}}, 5) == SystemState{4, {1}});
}

TEST_CASE("var_arrive") {
  const int L = 5;
  auto r = var_arrive({3, {}}, 2, L);
  CHECK(r.state == SystemState{1, {}});
  CHECK(r.outcome == ArrivalOutcome::transferred);
  r = var_arrive({0, {}}, 2, L);
  CHECK(r.state == SystemState{0, {2}});
  CHECK(r.outcome == ArrivalOutcome::queued);
  r = var_arrive({0, {2, 3}}, 1, L);
  CHECK(r.state == SystemState{0, {2, 3}});
  CHECK(r.outcome == ArrivalOutcome::rejected);
  r = var_arrive({1, {2}}, 1, L);
  CHECK(r.state == SystemState{1, {2, 1}});  // FCFS: no overtaking the stuck head
  r = var_arrive({1, {}}, 2, L);
  CHECK(r.state == SystemState{1, {2}});     // T = l - 1 is not enough
}

TEST_CASE("fixed filter never holds tokens and a backlog at once") {
  std::mt19937_64 rng(7);
  for (int run = 0; run < 2000; ++run) {
    const int L = 1 + static_cast<int>(rng() % 8);
    const int M = 1 + static_cast<int>(rng() % 8);
    FixedState x{0, static_cast<int>(rng() % (M + 1))};
    for (int e = 0; e < 200; ++e) {
      x = rng() % 2 ? fixed_replenish(x, M) : fixed_arrive(x, L).state;
      REQUIRE(x.q * x.t == 0);
      REQUIRE(x.q <= L);
      REQUIRE(x.t <= M);
    }
  }
}

TEST_CASE("fixed dynamics match the S recursion over whole periods") {
  std::mt19937_64 rng(11);
  for (int run = 0; run < 5000; ++run) {
    const int L = 1 + static_cast<int>(rng() % 8);
    const int M = 1 + static_cast<int>(rng() % 8);
    FixedState x{0, M};
    int s = to_unified(x, M).s;
    for (int n = 0; n < 30; ++n) {
      const int a = static_cast<int>(rng() % 12);
      for (int i = 0; i < a; ++i) x = fixed_arrive(x, L).state;
      x = fixed_replenish(x, M);
      s = s_step(s, a, L, M);
      REQUIRE(to_unified(x, M).s == s);
      REQUIRE(from_unified({s - M, s}) == x);
    }
  }
}

TEST_CASE("variable dynamics with unit packets reproduce the fixed filter") {
  std::mt19937_64 rng(3);
  for (int run = 0; run < 2000; ++run) {
    const int L = 1 + static_cast<int>(rng() % 6);
    const int M = 1 + static_cast<int>(rng() % 6);
    FixedState f{0, M};
    SystemState v{M, {}};
    for (int e = 0; e < 100; ++e) {
      if (rng() % 2) {
        f = fixed_replenish(f, M);
        v = var_replenish(v, M);
      } else {
        const auto fa = fixed_arrive(f, L);
        const auto va = var_arrive(v, 1, L);
        REQUIRE(fa.outcome == va.outcome);
        f = fa.state;
        v = va.state;
      }
      REQUIRE(f.t == v.tokens);
      REQUIRE(f.q == static_cast<int>(v.buffer.size()));
    }
  }
}

TEST_CASE("variable dynamics keep FCFS order and a stuck head") {
  std::mt19937_64 rng(5);
  const std::vector<int> sizes{1, 2, 3, 4};
  const int L = 7, M = 5;
  SystemState x{M, {}};
  for (int e = 0; e < 100000; ++e) {
    const SystemState before = x;
    if (rng() % 3 == 0) {
      x = var_replenish(x, M);
      if (x.buffer.size() < before.buffer.size())
        REQUIRE(BufferString(before.buffer.begin() + 1, before.buffer.end()) == x.buffer);
      else
        REQUIRE(x.buffer == before.buffer);
    } else {
      x = var_arrive(x, sizes[rng() % 4], L).state;
      REQUIRE(std::equal(before.buffer.begin(), before.buffer.end(), x.buffer.begin()));
    }
    if (!x.buffer.empty()) REQUIRE(x.tokens < x.buffer.front());
    REQUIRE(backlog(x.buffer) <= L);
  }
}
