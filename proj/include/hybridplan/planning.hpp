#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hybridplan/product.hpp"

namespace hybridplan {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Edge cost per successor entry and terminal cost per state. Empty vectors
// mean the defaults 1 and 0.
struct CostModel {
  std::vector<double> edge;
  std::vector<double> terminal;

  double edge_cost(std::size_t k) const { return edge.empty() ? 1.0 : edge[k]; }
  double terminal_cost(std::size_t i) const { return terminal.empty() ? 0.0 : terminal[i]; }

  void validate(const ProductAutomaton& pa) const {
    if (!edge.empty() && edge.size() != pa.num_edges()) throw std::invalid_argument("cost model: edge cost count mismatch");
    if (!terminal.empty() && terminal.size() != pa.num_states()) {
      throw std::invalid_argument("cost model: terminal cost count mismatch");
    }
    for (double c : edge) {
      if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("cost model: edge costs must be positive and finite");
    }
    for (double c : terminal) {
      if (!std::isfinite(c)) throw std::invalid_argument("cost model: terminal costs must be finite");
    }
  }

  // Edges under label s cost label_costs[s]; other labels cost 1.
  static CostModel from_label_costs(const ProductAutomaton& pa, const std::map<Label, double>& label_costs) {
    CostModel c;
    if (label_costs.empty()) return c;
    c.edge.assign(pa.num_edges(), 1.0);
    for (std::size_t g = 0; g < pa.num_groups(); ++g) {
      auto it = label_costs.find(pa.label(g));
      if (it == label_costs.end()) continue;
      for (auto k = pa.succ_begin[g]; k < pa.succ_begin[g + 1]; ++k) c.edge[k] = it->second;
    }
    c.validate(pa);
    return c;
  }
};

using ValueMap = std::vector<double>;

struct NddStats {
  std::uint64_t expanded = 0;
  std::uint64_t pushes = 0;
};

// Predecessor index: for each state, the successor entries that point at it.
struct ReverseIndex {
  std::vector<std::uint64_t> begin;  // per state, size S + 1
  std::vector<std::uint64_t> entry;  // successor entry ids
  std::vector<std::uint32_t> entry_group;
  std::vector<std::uint32_t> group_state;

  explicit ReverseIndex(const ProductAutomaton& pa) {
    const std::size_t s = pa.num_states();
    entry_group.resize(pa.num_edges());
    group_state.resize(pa.num_groups());
    for (std::size_t i = 0; i < s; ++i) {
      for (auto g = pa.group_begin[i]; g < pa.group_begin[i + 1]; ++g) group_state[g] = static_cast<std::uint32_t>(i);
    }
    for (std::size_t g = 0; g < pa.num_groups(); ++g) {
      for (auto k = pa.succ_begin[g]; k < pa.succ_begin[g + 1]; ++k) entry_group[k] = static_cast<std::uint32_t>(g);
    }
    begin.assign(s + 1, 0);
    for (auto t : pa.succ) ++begin[t + 1];
    for (std::size_t i = 0; i < s; ++i) begin[i + 1] += begin[i];
    entry.resize(pa.num_edges());
    auto fill = begin;
    for (std::size_t k = 0; k < pa.num_edges(); ++k) entry[fill[pa.succ[k]]++] = k;
  }
};

// Non-deterministic Dijkstra: V(q) = max over labels of min over successors
// of D + V, propagated backwards from the final states in increasing value
// order. A state is settled once every one of its groups has a settled
// successor; states with an empty group, or without groups off the goal,
// stay at infinity.
inline ValueMap ndd_value(const ProductAutomaton& pa, const CostModel& cost = {}, NddStats* stats = nullptr) {
  cost.validate(pa);
  const std::size_t s = pa.num_states();
  const ReverseIndex rev(pa);
  ValueMap v(s, kInf);
  std::vector<char> done(s, 0);
  std::vector<double> best(pa.num_groups(), kInf);
  std::vector<std::uint32_t> ready(s, 0);
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  NddStats local;
  for (std::size_t i = 0; i < s; ++i) {
    if (pa.final[i]) {
      heap.push({cost.terminal_cost(i), static_cast<std::uint32_t>(i)});
      ++local.pushes;
    }
  }
  auto key_of = [&](std::size_t i) {
    double k = -kInf;
    for (auto g = pa.group_begin[i]; g < pa.group_begin[i + 1]; ++g) k = std::max(k, best[g]);
    return k;
  };
  while (!heap.empty()) {
    const auto [key, i] = heap.top();
    heap.pop();
    if (done[i]) continue;
    if (!pa.final[i] && key != key_of(i)) continue;
    done[i] = 1;
    v[i] = key;
    ++local.expanded;
    for (auto r = rev.begin[i]; r < rev.begin[i + 1]; ++r) {
      const auto k = rev.entry[r];
      const auto g = rev.entry_group[k];
      const auto src = rev.group_state[g];
      if (done[src] || pa.final[src]) continue;
      const double c = cost.edge_cost(k) + key;
      if (c < best[g]) {
        if (best[g] == kInf) ++ready[src];
        best[g] = c;
        if (ready[src] == pa.group_begin[src + 1] - pa.group_begin[src]) {
          heap.push({key_of(src), src});
          ++local.pushes;
        }
      }
    }
  }
  if (stats) *stats = local;
  return v;
}

// Policy over an explicit product automaton: the chosen successor entry of
// every group, or kUncovered.
struct IndexedPolicy {
  static constexpr std::uint64_t kUncovered = std::numeric_limits<std::uint64_t>::max();
  std::vector<std::uint64_t> choice;  // per group
};

// Argmin over each group of D + V, lowest primitive on ties. Final states
// get the empty assignment; empty groups stay uncovered.
inline IndexedPolicy extract_optimal_policy(const ProductAutomaton& pa, const ValueMap& v, const CostModel& cost = {}) {
  IndexedPolicy pol;
  pol.choice.assign(pa.num_groups(), IndexedPolicy::kUncovered);
  for (std::size_t i = 0; i < pa.num_states(); ++i) {
    if (pa.final[i]) continue;
    for (auto g = pa.group_begin[i]; g < pa.group_begin[i + 1]; ++g) {
      double bestc = kInf;
      std::uint64_t arg = IndexedPolicy::kUncovered;
      for (auto k = pa.succ_begin[g]; k < pa.succ_begin[g + 1]; ++k) {
        const double c = cost.edge_cost(k) + v[pa.succ[k]];
        // Entries are sorted by target, hence by primitive within the
        // shared location; strict less keeps the lowest.
        if (arg == IndexedPolicy::kUncovered || c < bestc) {
          bestc = c;
          arg = k;
        }
      }
      pol.choice[g] = arg;
    }
  }
  return pol;
}

class UncoveredStateError : public std::runtime_error {
 public:
  explicit UncoveredStateError(const std::string& what) : std::runtime_error(what) {}
};

// Worst-case cost to the first final state for every state under the policy.
// Off-goal cycles and dead ends give infinity. A reachable group without a
// choice raises UncoveredStateError.
inline std::vector<double> cost_to_go_all(const ProductAutomaton& pa, const IndexedPolicy& pol, const CostModel& cost = {},
                                          const std::vector<std::uint32_t>& roots = {}) {
  const std::size_t s = pa.num_states();
  std::vector<double> j(s, kInf);
  std::vector<char> color(s, 0);  // 0 new, 1 on stack, 2 done
  struct Frame {
    std::uint32_t state;
    std::uint64_t group;
    double acc;
  };
  std::vector<Frame> stack;
  auto visit = [&](std::uint32_t root) {
    if (color[root]) return;
    auto open = [&](std::uint32_t q) {
      if (pa.final[q]) {
        j[q] = cost.terminal_cost(q);
        color[q] = 2;
        return false;
      }
      color[q] = 1;
      // No groups off the goal: no run continues, so none reaches the goal.
      const double acc = pa.group_begin[q] == pa.group_begin[q + 1] ? kInf : -kInf;
      stack.push_back({q, pa.group_begin[q], acc});
      return true;
    };
    open(root);
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.group == pa.group_begin[f.state + 1] || f.acc == kInf) {
        j[f.state] = f.acc;
        color[f.state] = 2;
        stack.pop_back();
        continue;
      }
      const auto g = f.group;
      if (pa.succ_begin[g] == pa.succ_begin[g + 1]) {
        f.acc = kInf;  // dead-end label
        continue;
      }
      const auto k = pol.choice[g];
      if (k == IndexedPolicy::kUncovered) {
        throw UncoveredStateError("cost_to_go: policy does not cover state " + std::to_string(f.state));
      }
      if (k < pa.succ_begin[g] || k >= pa.succ_begin[g + 1]) {
        throw std::invalid_argument("cost_to_go: policy choice outside its group");
      }
      const auto t = pa.succ[k];
      if (color[t] == 1) {
        f.acc = kInf;  // off-goal cycle
        continue;
      }
      if (color[t] == 2) {
        f.acc = std::max(f.acc, cost.edge_cost(k) + j[t]);
        ++f.group;
        continue;
      }
      open(t);  // final targets settle immediately; revisit this frame
    }
  };
  if (roots.empty()) {
    for (std::uint32_t q = 0; q < s; ++q) visit(q);
  } else {
    for (auto q : roots) visit(q);
  }
  return j;
}

inline double cost_to_go(const ProductAutomaton& pa, const IndexedPolicy& pol, const CostModel& cost, std::uint32_t q) {
  return cost_to_go_all(pa, pol, cost, {q})[q];
}

// States from which every induced run reaches the final set.
inline std::vector<std::uint32_t> initial_state_set(const ProductAutomaton& pa, const IndexedPolicy& pol,
                                                    const CostModel& cost = {}) {
  const auto j = cost_to_go_all(pa, pol, cost);
  std::vector<std::uint32_t> out;
  for (std::uint32_t q = 0; q < pa.num_states(); ++q) {
    if (j[q] < kInf) out.push_back(q);
  }
  return out;
}

// Portable policy keyed by product state: for each covered state, the
// chosen primitive per exit label, in label order.
struct ControlPolicy {
  std::map<ProductState, std::vector<std::pair<Label, PrimitiveId>>> table;

  bool covers(const ProductState& q) const { return table.count(q) > 0; }

  std::optional<PrimitiveId> next(const ProductState& q, const Label& s) const {
    auto it = table.find(q);
    if (it == table.end()) return std::nullopt;
    for (const auto& [l, m] : it->second) {
      if (l == s) return m;
    }
    return std::nullopt;
  }

  bool operator==(const ControlPolicy&) const = default;
};

// Covered states are those with every group chosen (final states included,
// with an empty assignment). Restricting to `states` keeps the table small.
inline ControlPolicy to_control_policy(const ProductAutomaton& pa, const IndexedPolicy& pol,
                                       const std::vector<std::uint32_t>& states) {
  ControlPolicy out;
  for (auto i : states) {
    std::vector<std::pair<Label, PrimitiveId>> a;
    bool covered = true;
    if (!pa.final[i]) {
      for (auto g = pa.group_begin[i]; g < pa.group_begin[i + 1] && covered; ++g) {
        if (pol.choice[g] == IndexedPolicy::kUncovered) {
          covered = false;
        } else {
          a.emplace_back(pa.label(g), pa.primitive[pa.succ[pol.choice[g]]]);
        }
      }
    }
    if (covered) out.table.emplace(pa.state(i), std::move(a));
  }
  return out;
}

// Inverse of to_control_policy; rejects choices that are not successors.
inline IndexedPolicy to_indexed_policy(const ProductAutomaton& pa, const ControlPolicy& pol) {
  IndexedPolicy out;
  out.choice.assign(pa.num_groups(), IndexedPolicy::kUncovered);
  for (const auto& [q, assign] : pol.table) {
    const auto i = pa.find(q);
    if (!i) throw std::invalid_argument("policy names a state outside the product automaton");
    for (const auto& [s, m] : assign) {
      const auto g = pa.group_of(*i, label_code(s));
      if (!g) throw std::invalid_argument("policy uses a label outside Sigma_PA(q)");
      bool found = false;
      for (auto k = pa.succ_begin[*g]; k < pa.succ_begin[*g + 1]; ++k) {
        if (pa.primitive[pa.succ[k]] == m) {
          out.choice[*g] = k;
          found = true;
        }
      }
      if (!found) throw std::invalid_argument("policy assigns a primitive outside M(q, sigma)");
    }
  }
  return out;
}

struct PlanStats {
  std::uint64_t expanded = 0;
  std::uint64_t states = 0;
  std::uint64_t edges = 0;
  double wall_ms = 0.0;
};

struct PlanResult {
  std::string algorithm;
  bool success = false;
  std::string message;
  ControlPolicy policy;
  std::map<ProductState, double> value;  // finite values, NDD only
  std::vector<ProductState> initial;     // Q_PA^0
  std::vector<Location> path;            // deterministic planners
  std::vector<PrimitiveId> path_primitives;
  PlanStats stats;
};

struct NddOptions {
  ProductBuildOptions build;
  std::map<Label, double> label_costs;
};

// Start state for an NDD policy: the lowest-value covered state on the
// start location, lowest primitive on ties.
inline std::optional<ProductState> best_start_state(const PlanResult& r, LocationCode start) {
  std::optional<ProductState> best;
  double bv = kInf;
  for (auto it = r.value.lower_bound({start, 0}); it != r.value.end() && it->first.location == start; ++it) {
    if (it->second < bv) {
      bv = it->second;
      best = it->first;
    }
  }
  return best;
}

// Fills value, policy and initial set of r from a solved product.
inline void fill_ndd_result(PlanResult& r, const ProductAutomaton& pa, const ValueMap& v, const IndexedPolicy& pol) {
  std::vector<std::uint32_t> finite;
  for (std::uint32_t i = 0; i < pa.num_states(); ++i) {
    if (v[i] < kInf) {
      finite.push_back(i);
      r.value.emplace(pa.state(i), v[i]);
      r.initial.push_back(pa.state(i));
    }
  }
  r.policy = to_control_policy(pa, pol, finite);
}

inline PlanResult plan_ndd(const Workspace& ws, const ManeuverAutomaton& ma, const NddOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  PlanResult r;
  r.algorithm = "ndd";
  const auto pa = enumerate_pa(ws, ma, opt.build);
  const auto cost = CostModel::from_label_costs(pa, opt.label_costs);
  NddStats st;
  const auto v = ndd_value(pa, cost, &st);
  const auto pol = extract_optimal_policy(pa, v, cost);
  fill_ndd_result(r, pa, v, pol);
  r.stats = {st.expanded, pa.num_states(), pa.num_edges(), 0.0};
  if (!ws.spec().starts.empty()) {
    r.success = best_start_state(r, ws.encode(ws.start_location())).has_value();
    if (!r.success) r.message = "no product state on the start boxes reaches the goal";
  } else {
    r.success = !r.initial.empty();
    if (!r.success) r.message = "no product state reaches the goal";
  }
  r.stats.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace hybridplan
