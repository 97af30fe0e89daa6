#pragma once

#include <algorithm>
#include <random>
#include <set>

#include "hybridplan/composition.hpp"
#include "hybridplan/planning.hpp"

namespace fixture {

using namespace hybridplan;

inline constexpr PrimitiveId H = 0, F = 1, B = 2;

struct ThreeBox {
  Workspace ws;
  ManeuverAutomaton ma;
  ProductAutomaton pa;
  std::uint32_t q1, q2, q3, q4, q5, q6, q7;
};

// Three boxes on a line with the turnaround automaton; the goal is (l3, B).
inline ThreeBox three_box() {
  GridSpec g;
  g.counts = {3};
  g.d = {1.0};
  g.goals = {{2}};
  Workspace ws(g);
  auto ma = build_turnaround_ma(1.0, 1.0);
  auto pa = enumerate_pa(ws, ma);
  auto at = [&](int l, PrimitiveId m) { return *pa.find({ws.encode({l}), m}); };
  ThreeBox t{ws, ma, pa, at(0, F), at(0, H), at(1, F), at(1, H), at(1, B), at(2, H), at(2, B)};
  std::fill(t.pa.final.begin(), t.pa.final.end(), 0);
  t.pa.final[t.q7] = 1;
  return t;
}

// Forward to the end, turn around, come back one box.
inline ControlPolicy policy_c1(const ThreeBox& t) {
  ControlPolicy c;
  c.table[t.pa.state(t.q1)] = {{{1}, F}};
  c.table[t.pa.state(t.q3)] = {{{1}, B}};
  c.table[t.pa.state(t.q5)] = {{{-1}, F}};
  c.table[t.pa.state(t.q7)] = {{{-1}, B}};
  return c;
}

// Random obstacle grid up to 20x20x3 with one or two vehicles whose starts
// and goals are distinct free boxes. Odd trials are flat.
inline GridSpec random_grid(std::mt19937_64& rng, int trial) {
  GridSpec g;
  const bool flat = trial % 2;
  g.counts = {2 + static_cast<int>(rng() % 19), 2 + static_cast<int>(rng() % 19),
              flat ? 1 : 1 + static_cast<int>(rng() % 3)};
  g.d = {1.0, 1.0, 1.0};
  const std::size_t vehicles = 1 + rng() % 2;
  std::set<Box> used;
  auto random_box = [&] {
    return Box{static_cast<int>(rng() % g.counts[0]), static_cast<int>(rng() % g.counts[1]),
               static_cast<int>(rng() % g.counts[2])};
  };
  const std::size_t nobs = (g.counts[0] * g.counts[1] * g.counts[2]) / (3 + rng() % 5);
  for (std::size_t i = 0; i < nobs; ++i) used.insert(random_box());
  g.obstacles.assign(used.begin(), used.end());
  for (std::size_t v = 0; v < vehicles; ++v) {
    for (auto* list : {&g.starts, &g.goals}) {
      Box b;
      do b = random_box();
      while (used.count(b));
      used.insert(b);
      list->push_back(b);
    }
  }
  return g;
}

}  // namespace fixture
