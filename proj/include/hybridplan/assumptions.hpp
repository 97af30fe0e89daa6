#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "hybridplan/integrator.hpp"
#include "hybridplan/ma_core.hpp"

namespace hybridplan {

enum class CheckStatus { pass, fail, sampled_pass, inconclusive };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::sampled_pass: return "sampled-pass";
    case CheckStatus::inconclusive: return "inconclusive";
  }
  return "?";
}

struct ConditionResult {
  CheckStatus status = CheckStatus::pass;
  std::vector<std::string> witnesses;
  std::uint64_t checked = 0;  // pairs, edges or samples examined
  double max_exit_time = 0.0;
};

struct AssumptionReport {
  std::array<ConditionResult, 7> conditions;  // in condition_name order

  bool ok() const {
    for (const auto& c : conditions) {
      if (c.status == CheckStatus::fail || c.status == CheckStatus::inconclusive) return false;
    }
    return true;
  }
};

inline const char* condition_name(std::size_t i) {
  static const char* names[] = {"no-epsilon-edges", "shared-guards", "disjoint-guards", "reset-clears-guards",
                                "reset-in-invariant", "hold-stays", "move-exits"};
  return names[i];
}

namespace detail {

inline void record_failure(ConditionResult& c, std::string w) {
  c.status = CheckStatus::fail;
  if (c.witnesses.size() < 16) c.witnesses.push_back(std::move(w));
}

// Grid points of a polytopic set: a regular lattice over its bounding box,
// refined until at least `want` points are members.
inline std::vector<Vector> invariant_grid(const PolytopicSet& set, std::size_t want) {
  const auto bb = set.bounding_box();
  const std::size_t n = bb.size();
  std::size_t g = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(std::pow(double(want), 1.0 / n))));
  for (int round = 0; round < 40; ++round) {
    std::vector<Vector> out;
    std::vector<std::size_t> idx(n, 0);
    while (true) {
      Vector x(n);
      for (std::size_t k = 0; k < n; ++k) {
        x[k] = bb[k].first + (bb[k].second - bb[k].first) * double(idx[k]) / double(g - 1);
      }
      if (set.contains(x)) out.push_back(std::move(x));
      std::size_t k = 0;
      while (k < n && ++idx[k] == g) idx[k++] = 0;
      if (k == n) break;
    }
    if (out.size() >= want) return out;
    g = g + g / 4 + 1;
  }
  throw std::runtime_error("invariant_grid: could not place enough samples (degenerate invariant)");
}

}  // namespace detail

// Well-posedness conditions: the first five by exact set algebra, the last two by
// simulating from sampled initial states.
inline AssumptionReport check_ma_assumptions(const ManeuverAutomaton& ma, SimConfig cfg_in = {},
                                             std::size_t edge_limit = 1'000'000) {
  const SimConfig cfg = resolve_sim_config(ma, cfg_in);
  AssumptionReport rep;
  auto& c1 = rep.conditions[0];
  auto& c2 = rep.conditions[1];
  auto& c3 = rep.conditions[2];
  auto& c4 = rep.conditions[3];
  auto& c5 = rep.conditions[4];
  auto& c6 = rep.conditions[5];
  auto& c7 = rep.conditions[6];

  // Component base edges: epsilon labels and guards shared by equal labels.
  for (std::size_t j = 0; j < ma.num_components(); ++j) {
    const auto& c = ma.component(j);
    const auto& edges = c.edges();
    for (std::size_t a = 0; a < edges.size(); ++a) {
      ++c1.checked;
      if (is_epsilon(edges[a].sigma)) {
        detail::record_failure(c1, "component " + std::to_string(j) + " edge (" +
                                       c.primitives()[edges[a].source].name + "," +
                                       label_to_string(edges[a].sigma) + "," +
                                       c.primitives()[edges[a].target].name + ") carries epsilon");
      }
      for (std::size_t b = a + 1; b < edges.size(); ++b) {
        if (edges[a].source != edges[b].source || edges[a].sigma != edges[b].sigma) continue;
        ++c2.checked;
        if (!edges[a].guard.to_region().same_set(edges[b].guard.to_region())) {
          detail::record_failure(c2, "component " + std::to_string(j) + " edges from " +
                                         c.primitives()[edges[a].source].name + " with label " +
                                         label_to_string(edges[a].sigma) + " to " +
                                         c.primitives()[edges[a].target].name + " and " +
                                         c.primitives()[edges[b].target].name + " have different guards");
        }
      }
    }
  }

  const auto edges = ma.enumerate_edges(edge_limit);
  for (const auto& e : edges) {
    ++c1.checked;
    if (is_epsilon(e.sigma)) {
      detail::record_failure(c1, "edge from " + ma.primitive_name(e.source) + " carries epsilon");
    }
  }

  // Blockwise set algebra is memoised per component: the composite checks
  // only ever combine a handful of distinct component queries.
  using Key4 = std::tuple<std::size_t, std::size_t, Label, std::size_t, Label>;
  std::map<Key4, bool> disjoint_memo;
  std::map<std::tuple<std::size_t, std::size_t, Label, std::size_t>, bool> subset_memo;

  // Distinct labels from one source have disjoint guards.
  for (PrimitiveId m = 0; m < ma.num_primitives(); ++m) {
    const auto labels = ma.sigma(m);
    const auto parts = ma.decode(m);
    for (std::size_t a = 0; a < labels.size(); ++a) {
      for (std::size_t b = a + 1; b < labels.size(); ++b) {
        ++c3.checked;
        bool disjoint = false;
        for (std::size_t j = 0; j < parts.size() && !disjoint; ++j) {
          const Label sa = ma.component_label(labels[a], j);
          const Label sb = ma.component_label(labels[b], j);
          auto key = std::make_tuple(j, parts[j], sa, parts[j], sb);
          auto it = disjoint_memo.find(key);
          bool v;
          if (it != disjoint_memo.end()) {
            v = it->second;
          } else {
            const auto& c = ma.component(j);
            v = c.guard_region(parts[j], sa).disjoint(c.guard_region(parts[j], sb));
            disjoint_memo.emplace(key, v);
          }
          disjoint = v;
        }
        if (!disjoint) {
          detail::record_failure(c3, "guards of " + ma.primitive_name(m) + " for labels " +
                                         label_to_string(labels[a]) + " and " + label_to_string(labels[b]) +
                                         " intersect");
        }
      }
    }
  }

  // A reset guard misses every guard of the next edge and lies in
  // the target invariant.
  std::map<Key4, bool> chain_memo;
  for (const auto& e : edges) {
    const auto src = ma.decode(e.source);
    const auto dst = ma.decode(e.target);
    bool g_empty = false;
    for (std::size_t j = 0; j < src.size() && !g_empty; ++j) {
      const Label sj = ma.component_label(e.sigma, j);
      g_empty = ma.component(j).edge_guard_region(src[j], sj, dst[j]).empty();
    }
    ++c5.checked;
    bool inside = g_empty;
    if (!inside) {
      inside = true;
      for (std::size_t j = 0; j < src.size() && inside; ++j) {
        const Label sj = ma.component_label(e.sigma, j);
        auto key = std::make_tuple(j, src[j], sj, dst[j]);
        auto it = subset_memo.find(key);
        bool v;
        if (it != subset_memo.end()) {
          v = it->second;
        } else {
          const auto& c = ma.component(j);
          v = c.edge_guard_region(src[j], sj, dst[j])
                  .translated(-1.0 * c.label_shift(sj))
                  .subset_of(c.invariant_region(dst[j]));
          subset_memo.emplace(key, v);
        }
        inside = v;
      }
    }
    if (!inside) {
      detail::record_failure(c5, "reset guard of (" + ma.primitive_name(e.source) + "," +
                                     label_to_string(e.sigma) + "," + ma.primitive_name(e.target) +
                                     ") leaves the target invariant");
    }
    if (g_empty) continue;
    for (const auto& s2 : ma.sigma(e.target)) {
      ++c4.checked;
      bool disjoint = false;
      for (std::size_t j = 0; j < src.size() && !disjoint; ++j) {
        const Label s1j = ma.component_label(e.sigma, j);
        const Label s2j = ma.component_label(s2, j);
        auto key = std::make_tuple(j, src[j], s1j, dst[j], s2j);
        auto it = chain_memo.find(key);
        bool v;
        if (it != chain_memo.end()) {
          v = it->second;
        } else {
          const auto& c = ma.component(j);
          v = c.edge_guard_region(src[j], s1j, dst[j])
                  .translated(-1.0 * c.label_shift(s1j))
                  .disjoint(c.guard_region(dst[j], s2j));
          chain_memo.emplace(key, v);
        }
        disjoint = v;
      }
      if (!disjoint) {
        detail::record_failure(c4, "reset guard of (" + ma.primitive_name(e.source) + "," +
                                       label_to_string(e.sigma) + "," + ma.primitive_name(e.target) +
                                       ") meets the guard of label " + label_to_string(s2));
      }
    }
  }

  // Hold and move behaviour, sampled.
  const AffineFlow flow(ma, cfg.dt);
  std::mt19937_64 rng(cfg.seed);
  std::map<std::pair<std::size_t, std::size_t>, std::vector<Vector>> grids;
  std::uint64_t steps_used = 0;
  c6.status = CheckStatus::sampled_pass;
  c7.status = CheckStatus::sampled_pass;
  bool any_hold = false, any_move = false;
  for (PrimitiveId m = 0; m < ma.num_primitives(); ++m) {
    const auto parts = ma.decode(m);
    std::vector<const std::vector<Vector>*> block_pts;
    for (std::size_t j = 0; j < parts.size(); ++j) {
      auto key = std::make_pair(j, parts[j]);
      auto it = grids.find(key);
      if (it == grids.end()) {
        it = grids.emplace(key, detail::invariant_grid(ma.component(j).primitives()[parts[j]].invariant,
                                                       cfg.samples))
                 .first;
      }
      block_pts.push_back(&it->second);
    }
    const bool hold = ma.sigma(m).empty();
    auto& cond = hold ? c6 : c7;
    (hold ? any_hold : any_move) = true;
    const std::size_t count = parts.size() == 1 ? block_pts[0]->size() : cfg.samples;
    for (std::size_t k = 0; k < count; ++k) {
      std::vector<Vector> blocks;
      for (std::size_t j = 0; j < parts.size(); ++j) {
        const auto& pts = *block_pts[j];
        const std::size_t idx = parts.size() == 1 ? k : static_cast<std::size_t>(rng() % pts.size());
        blocks.push_back(pts[idx]);
      }
      const Vector x0 = ma.join_state(blocks);
      if (steps_used >= cfg.step_budget) {
        if (cond.status != CheckStatus::fail) cond.status = CheckStatus::inconclusive;
        break;
      }
      const FlowResult r = flow_until_exit(flow, m, x0, cfg.t_max, cfg, cfg.step_budget - steps_used);
      steps_used += r.steps;
      ++cond.checked;
      auto where = [&] {
        std::string s = ma.primitive_name(m) + " from [";
        for (std::size_t i = 0; i < x0.size(); ++i) s += (i ? "," : "") + std::to_string(x0[i]);
        return s + "]";
      };
      if (r.outcome == FlowOutcome::budget) {
        if (cond.status != CheckStatus::fail) cond.status = CheckStatus::inconclusive;
        continue;
      }
      if (hold) {
        if (r.outcome != FlowOutcome::stayed) {
          detail::record_failure(cond, where() + " leaves the invariant at t=" + std::to_string(r.time) +
                                           (r.detail.empty() ? "" : ": " + r.detail));
        }
      } else if (r.outcome == FlowOutcome::exited) {
        cond.max_exit_time = std::max(cond.max_exit_time, r.time);
      } else if (r.outcome == FlowOutcome::stayed) {
        detail::record_failure(cond, where() + " does not reach a guard within t_max");
      } else {
        detail::record_failure(cond, where() + ": " + r.detail);
      }
    }
  }
  if (!any_hold) c6.status = CheckStatus::pass;  // vacuous
  if (!any_move) c7.status = CheckStatus::pass;
  return rep;
}

}  // namespace hybridplan
