#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridplan/planning.hpp"
#include "hybridplan/search.hpp"

namespace hybridplan {

enum class ChainMode { once, loop };

struct ChainResult {
  bool success = false;
  std::string message;
  std::optional<std::size_t> failed_stage;
  std::optional<ProductState> witness;
  std::vector<PlanResult> stages;
};

// Workspace of stage i: goals from the stage, starts from the previous
// stage's goals (or the scenario's starts for stage 0).
inline Workspace stage_workspace(const Workspace& base, const std::vector<std::vector<Box>>& goals, std::size_t i) {
  GridSpec g = base.spec();
  g.goals = goals.at(i);
  if (i > 0) g.starts = goals[i - 1];
  return Workspace(g);
}

namespace detail {

inline ChainResult chain_ndd(const Workspace& base, const ManeuverAutomaton& ma,
                             const std::vector<std::vector<Box>>& goals, ChainMode mode, const NddOptions& opt) {
  const std::size_t n = goals.size();
  ChainResult out;
  auto pa = enumerate_pa(base, ma, opt.build);
  const auto cost = CostModel::from_label_costs(pa, opt.label_costs);
  auto has_next = [&](std::size_t i) { return mode == ChainMode::loop || i + 1 < n; };
  auto next_of = [&](std::size_t i) { return (i + 1) % n; };

  // Candidate final sets: goal location, still moving unless the stage is
  // the last one of a single pass.
  std::vector<std::vector<char>> fin(n, std::vector<char>(pa.num_states(), 0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ws = stage_workspace(base, goals, i);
    for (std::size_t s = 0; s < pa.num_states(); ++s) {
      if (!ws.is_goal(ws.decode(pa.state(s).location))) continue;
      const bool moving = !ma.sigma(pa.primitive[s]).empty();
      fin[i][s] = has_next(i) ? moving : !moving;
    }
  }
  // Shrink each final set to the next stage's initial set until stable.
  std::vector<ValueMap> v(n);
  std::uint64_t expanded = 0;
  for (std::size_t round = 0;; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      pa.final = fin[i];
      NddStats st;
      v[i] = ndd_value(pa, cost, &st);
      expanded += st.expanded;
    }
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!has_next(i)) continue;
      for (std::size_t s = 0; s < pa.num_states(); ++s) {
        if (fin[i][s] && v[next_of(i)][s] == kInf) {
          fin[i][s] = 0;
          changed = true;
        }
      }
    }
    if (!changed) break;
    if (round > pa.num_states() * n) throw std::logic_error("chain fixed point did not converge");
  }

  for (std::size_t i = 0; i < n; ++i) {
    pa.final = fin[i];
    const auto pol = extract_optimal_policy(pa, v[i], cost);
    PlanResult r;
    r.algorithm = "ndd";
    fill_ndd_result(r, pa, v[i], pol);
    r.stats = {expanded, pa.num_states(), pa.num_edges(), 0.0};
    const auto ws = stage_workspace(base, goals, i);
    r.success = best_start_state(r, ws.encode(ws.start_location())).has_value();
    bool any_final = false;
    for (char f : fin[i]) any_final = any_final || f;
    if (!any_final) r.success = false;
    if (!r.success) r.message = "stage " + std::to_string(i) + " cannot be solved";
    out.stages.push_back(std::move(r));
  }
  // Containment check, independent of how the final sets were produced.
  for (std::size_t i = 0; i < n && !out.failed_stage; ++i) {
    if (!has_next(i)) continue;
    for (std::size_t s = 0; s < pa.num_states(); ++s) {
      if (fin[i][s] && v[next_of(i)][s] == kInf) {
        out.failed_stage = i;
        out.witness = pa.state(s);
        out.message = "final state of stage " + std::to_string(i) + " is not initial for the next stage";
        break;
      }
    }
  }
  for (std::size_t i = 0; i < n && !out.failed_stage; ++i) {
    if (!out.stages[i].success) {
      out.failed_stage = i;
      out.message = out.stages[i].message;
    }
  }
  out.success = !out.failed_stage;
  return out;
}

inline ChainResult chain_search(const Workspace& base, const ManeuverAutomaton& ma,
                                const std::vector<std::vector<Box>>& goals, ChainMode mode, bool greedy,
                                const SearchOptions& base_opt) {
  const std::size_t n = goals.size();
  PrunedMoves pm(ma);
  ChainResult out;
  if (mode == ChainMode::loop && goals.back() != base.spec().starts) {
    throw std::invalid_argument("chain_specs: a looping path chain must end on the start boxes");
  }
  out.stages.resize(n);
  std::vector<std::optional<std::size_t>> first(n);
  auto has_next = [&](std::size_t i) { return mode == ChainMode::loop || i + 1 < n; };
  // First move of the next non-empty stage after i, if any.
  auto next_first = [&](std::size_t i) -> std::optional<std::size_t> {
    for (std::size_t k = 1; k <= n; ++k) {
      const std::size_t j = i + k;
      if (j >= n && mode == ChainMode::once) return std::nullopt;
      if (first[j % n]) return first[j % n];
    }
    return std::nullopt;
  };
  // Later stages first; loops repeat until the first moves settle.
  for (int round = 0; round < 4; ++round) {
    auto before = first;
    for (std::size_t i = n; i-- > 0;) {
      const auto ws = stage_workspace(base, goals, i);
      SearchOptions opt = base_opt;
      if (has_next(i)) {
        opt.next_move = next_first(i);
        opt.goal_primitive = opt.next_move ? pm.primitive(*opt.next_move) : pm.hold();
      }
      out.stages[i] = greedy ? greedy_plan(ws, ma, opt) : astar_plan(ws, ma, opt);
      if (!out.stages[i].success) {
        out.failed_stage = i;
        out.message = "stage " + std::to_string(i) + ": " + out.stages[i].message;
        return out;
      }
      first[i].reset();
      if (out.stages[i].path.size() > 1) {
        const auto& p = out.stages[i].path;
        for (std::size_t o = 0; o < ws.p(); ++o) {
          if (p[1][o] != p[0][o]) first[i] = 2 * o + (p[1][o] > p[0][o] ? 0 : 1);
        }
      }
    }
    if (mode == ChainMode::once || first == before) break;
  }
  // Every stage hand-over must be an automaton edge.
  for (std::size_t i = 0; i < n; ++i) {
    if (!has_next(i)) continue;
    const auto& r = out.stages[i];
    if (r.path.size() < 2) continue;
    const auto next = next_first(i);
    const PrimitiveId last = r.path_primitives[r.path_primitives.size() - 2];
    const PrimitiveId to = next ? pm.primitive(*next) : pm.hold();
    Label s(base.p(), 0);
    for (std::size_t o = 0; o < s.size(); ++o) s[o] = r.path.back()[o] - r.path[r.path.size() - 2][o];
    if (!ma.has_edge(last, s, to)) {
      out.failed_stage = i;
      out.witness = ProductState{base.encode(r.path[r.path.size() - 2]), last};
      out.message = "stage " + std::to_string(i) + " cannot hand over to the next stage";
      return out;
    }
  }
  out.success = true;
  return out;
}

}  // namespace detail

// Plans a sequence of reach-avoid stages so that every final state of a
// stage is an initial state of the next one (and last to first in loop
// mode). algo is "ndd", "astar" or "greedy".
inline ChainResult chain_specs(const Workspace& base, const ManeuverAutomaton& ma,
                               const std::vector<std::vector<Box>>& goals, ChainMode mode, const std::string& algo,
                               const NddOptions& ndd = {}, const SearchOptions& search = {}) {
  if (goals.empty()) throw std::invalid_argument("chain_specs: no stages");
  for (std::size_t i = 0; i < goals.size(); ++i) {
    if (goals[i].size() != base.vehicles()) {
      throw std::invalid_argument("chain_specs: stage " + std::to_string(i) + " has the wrong number of goals");
    }
    stage_workspace(base, goals, i);  // validates the boxes
  }
  if (algo == "ndd") return detail::chain_ndd(base, ma, goals, mode, ndd);
  if (algo == "astar") return detail::chain_search(base, ma, goals, mode, false, search);
  if (algo == "greedy") return detail::chain_search(base, ma, goals, mode, true, search);
  throw std::invalid_argument("chain_specs: unknown algorithm " + algo);
}

}  // namespace hybridplan
