#pragma once

#include <stdexcept>
#include <vector>

#include "hybridplan/geometry.hpp"
#include "hybridplan/ma_core.hpp"

namespace hybridplan {

inline ManeuverAutomaton parallel_compose(const ManeuverAutomaton& a, const ManeuverAutomaton& b) {
  return ManeuverAutomaton::compose(a, b);
}

// Left fold of parallel_compose; k = 1 returns ma unchanged.
inline ManeuverAutomaton compose_n(const ManeuverAutomaton& ma, std::size_t k) {
  if (k == 0) throw std::invalid_argument("compose_n: k must be at least 1");
  ManeuverAutomaton out = ma;
  for (std::size_t i = 1; i < k; ++i) out = parallel_compose(out, ma);
  return out;
}

// One double-integrator automaton per output axis, composed left to right.
inline ManeuverAutomaton compose_double_integrators(const std::vector<DoubleIntegratorParams>& axes) {
  if (axes.empty()) throw std::invalid_argument("compose_double_integrators: no axes");
  // Axes with identical parameters share one component.
  std::vector<std::pair<DoubleIntegratorParams, std::shared_ptr<const AtomicMA>>> built;
  auto get = [&](const DoubleIntegratorParams& p) {
    for (const auto& [q, ptr] : built) {
      if (q.d == p.d && q.u_max == p.u_max) return ptr;
    }
    built.emplace_back(p, build_double_integrator_atomic(p));
    return built.back().second;
  };
  ManeuverAutomaton out(get(axes[0]));
  for (std::size_t i = 1; i < axes.size(); ++i) out = parallel_compose(out, ManeuverAutomaton(get(axes[i])));
  return out;
}

// I(m): the invariant minus every outgoing guard, as a factored set.
inline ProductSet inner_invariant(const ManeuverAutomaton& ma, PrimitiveId m) {
  ProductSet out(ma.invariant(m));
  for (const auto& s : ma.sigma(m)) out = out.subtract(ProductSet(ma.guard(m, s)));
  return out;
}

// The augmented edge set: every edge plus the epsilon edges, generated by
// the component-wise product of augmented edges.
inline std::vector<CompositeEdge> augmented_edges(const ManeuverAutomaton& ma, std::size_t limit = 10'000'000) {
  std::vector<CompositeEdge> out;
  for (PrimitiveId m = 0; m < ma.num_primitives(); ++m) {
    for (const auto& s : ma.sigma_bar(m)) {
      for (auto t : ma.augmented_successors(m, s)) {
        out.push_back({m, s, t});
        if (out.size() > limit) throw std::length_error("augmented edge enumeration exceeds limit");
      }
    }
  }
  return out;
}

// Epsilon edges straight from the definition: (m, eps, m') when
// I(m) is inside the invariant of m' and misses every outgoing guard of m'.
// Exponential in the number of components; meant for small automata.
inline std::vector<CompositeEdge> epsilon_edges_by_definition(const ManeuverAutomaton& ma) {
  const Label eps(ma.p(), 0);
  std::vector<ProductSet> inner;
  for (PrimitiveId m = 0; m < ma.num_primitives(); ++m) inner.push_back(inner_invariant(ma, m));
  std::vector<CompositeEdge> out;
  for (PrimitiveId m = 0; m < ma.num_primitives(); ++m) {
    for (PrimitiveId t = 0; t < ma.num_primitives(); ++t) {
      if (!inner[m].subset_of(ProductSet(ma.invariant(t)))) continue;
      bool clear = true;
      for (const auto& s : ma.sigma(t)) {
        if (!inner[m].disjoint(ProductSet(ma.guard(t, s)))) {
          clear = false;
          break;
        }
      }
      if (clear) out.push_back({m, eps, t});
    }
  }
  return out;
}

}  // namespace hybridplan
