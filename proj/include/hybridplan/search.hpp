#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "hybridplan/planning.hpp"

namespace hybridplan {

// The pruned automaton: F or B on one output with H elsewhere, plus all-H.
// Requires single-output components with primitives named H, F and B.
class PrunedMoves {
 public:
  explicit PrunedMoves(const ManeuverAutomaton& ma) : ma_(&ma) {
    std::vector<std::size_t> hold;
    for (std::size_t j = 0; j < ma.num_components(); ++j) {
      const auto& c = ma.component(j);
      if (c.p() != 1) throw std::invalid_argument("pruned moves need single-output components");
      hold.push_back(c.primitive_index("H"));
      fwd_.push_back(c.primitive_index("F"));
      bwd_.push_back(c.primitive_index("B"));
    }
    hold_parts_ = hold;
    hold_ = ma.encode(hold);
  }

  PrimitiveId hold() const { return hold_; }

  // Move index: 2 * output + (0 for +1, 1 for -1).
  PrimitiveId primitive(std::size_t move) const {
    auto parts = hold_parts_;
    const std::size_t i = move / 2;
    parts[i] = move % 2 == 0 ? fwd_[i] : bwd_[i];
    return ma_->encode(parts);
  }

  Label label(std::size_t move) const {
    Label s(ma_->p(), 0);
    s[move / 2] = move % 2 == 0 ? 1 : -1;
    return s;
  }

  static std::size_t reverse(std::size_t move) { return move ^ 1u; }

 private:
  const ManeuverAutomaton* ma_;
  std::vector<std::size_t> hold_parts_, fwd_, bwd_;
  PrimitiveId hold_ = 0;
};

struct SearchOptions {
  std::uint64_t max_expansions = 50'000'000;
  // Chaining: the first move of the next stage. The last move into the goal
  // must not be its reverse, because F and B on one output do not follow
  // each other directly.
  std::optional<std::size_t> next_move;
  // Successor on reaching the goal, instead of all-Hold.
  std::optional<PrimitiveId> goal_primitive;
};

inline int manhattan(const Location& a, const Location& b) {
  int h = 0;
  for (std::size_t i = 0; i < a.size(); ++i) h += std::abs(a[i] - b[i]);
  return h;
}

// Moves in tie-break order: axis, then vehicle, then +1 before -1.
inline std::vector<std::size_t> move_order(const Workspace& ws) {
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < ws.axes(); ++a) {
    for (std::size_t v = 0; v < ws.vehicles(); ++v) {
      const std::size_t i = v * ws.axes() + a;
      out.push_back(2 * i);
      out.push_back(2 * i + 1);
    }
  }
  return out;
}

// Turns a box path and its moves into a policy along the path.
inline void fill_path_policy(PlanResult& r, const Workspace& ws, const PrunedMoves& pm, const std::vector<Location>& path,
                             const std::vector<std::size_t>& moves, const SearchOptions& opt) {
  r.path = path;
  r.path_primitives.clear();
  const PrimitiveId end = opt.goal_primitive.value_or(pm.hold());
  for (std::size_t j = 0; j < moves.size(); ++j) r.path_primitives.push_back(pm.primitive(moves[j]));
  r.path_primitives.push_back(end);
  if (moves.empty()) {
    const ProductState q{ws.encode(path[0]), end};
    r.initial = {q};
    if (end == pm.hold()) r.policy.table[q] = {};
    return;
  }
  for (std::size_t j = 0; j < moves.size(); ++j) {
    const ProductState q{ws.encode(path[j]), r.path_primitives[j]};
    r.policy.table[q] = {{pm.label(moves[j]), r.path_primitives[j + 1]}};
    r.initial.push_back(q);
  }
  if (end == pm.hold()) r.policy.table[{ws.encode(path.back()), end}] = {};
}

// A* over joint locations with unit steps and the Manhattan heuristic. With
// a next move set, nodes also remember the last move.
inline PlanResult astar_plan(const Workspace& ws, const ManeuverAutomaton& ma, const SearchOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  PrunedMoves pm(ma);
  if (ma.p() != ws.p()) throw std::invalid_argument("astar_plan: automaton and workspace disagree on outputs");
  PlanResult r;
  r.algorithm = "astar";
  const Location start = ws.start_location(), goal = ws.goal_location();
  if (!ws.joint_location_safe(start)) {
    r.message = "start location is not safe";
    return r;
  }
  const std::size_t none = 2 * ws.p();
  const bool track = opt.next_move.has_value();
  auto key = [&](LocationCode c, std::size_t last) { return std::make_pair(c, track ? last : 0); };
  struct PairHash {
    std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const {
      return std::hash<std::uint64_t>()(p.first * 0x9E3779B97F4A7C15ull ^ p.second);
    }
  };
  struct Info {
    int g;
    std::pair<std::uint64_t, std::uint64_t> parent;
    std::size_t move;
    bool closed;
  };
  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, Info, PairHash> info;
  // (f, h, sequence) keeps expansion order deterministic.
  using Item = std::tuple<int, int, std::uint64_t, std::uint64_t, std::uint64_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  std::uint64_t seq = 0;
  const auto order = move_order(ws);
  const auto k0 = key(ws.encode(start), none);
  info[k0] = {0, k0, none, false};
  open.push({manhattan(start, goal), manhattan(start, goal), seq++, k0.first, k0.second});
  std::optional<std::pair<std::uint64_t, std::uint64_t>> found;
  while (!open.empty()) {
    const auto [f, h, sq, code, last] = open.top();
    open.pop();
    (void)sq;
    const auto kk = std::make_pair(code, last);
    Info& cur = info[kk];
    if (cur.closed || f != cur.g + h) continue;
    cur.closed = true;
    if (++r.stats.expanded > opt.max_expansions) {
      r.message = "expansion budget exhausted";
      return r;
    }
    const Location l = ws.decode(code);
    if (h == 0) {
      const std::size_t lm = track ? static_cast<std::size_t>(last) : cur.move;
      const bool reversal = opt.next_move && lm != none && PrunedMoves::reverse(lm) == *opt.next_move;
      if (!reversal) {
        found = kk;
        break;
      }
    }
    const int g = cur.g;
    for (auto mv : order) {
      if (track && last != none && PrunedMoves::reverse(mv) == last) continue;
      Location n = l;
      n[mv / 2] += mv % 2 == 0 ? 1 : -1;
      if (!ws.joint_location_safe(n)) continue;
      const auto nk = key(ws.encode(n), mv);
      auto it = info.find(nk);
      if (it != info.end() && (it->second.closed || it->second.g <= g + 1)) continue;
      info[nk] = {g + 1, kk, mv, false};
      const int nh = manhattan(n, goal);
      open.push({g + 1 + nh, nh, seq++, nk.first, nk.second});
    }
  }
  if (!found) {
    if (r.message.empty()) r.message = "no path between start and goal";
    r.stats.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }
  std::vector<Location> path;
  std::vector<std::size_t> moves;
  for (auto k = *found; k != k0; k = info[k].parent) {
    path.push_back(ws.decode(k.first));
    moves.push_back(info[k].move);
  }
  path.push_back(start);
  std::reverse(path.begin(), path.end());
  std::reverse(moves.begin(), moves.end());
  fill_path_policy(r, ws, pm, path, moves, opt);
  r.success = true;
  r.stats.states = info.size();
  r.stats.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Greedy descent: take the first safe single-axis move that strictly
// lowers the Manhattan distance; fail when none exists.
inline PlanResult greedy_plan(const Workspace& ws, const ManeuverAutomaton& ma, const SearchOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  PrunedMoves pm(ma);
  if (ma.p() != ws.p()) throw std::invalid_argument("greedy_plan: automaton and workspace disagree on outputs");
  PlanResult r;
  r.algorithm = "greedy";
  const Location goal = ws.goal_location();
  Location l = ws.start_location();
  if (!ws.joint_location_safe(l)) {
    r.message = "start location is not safe";
    return r;
  }
  std::vector<Location> path{l};
  std::vector<std::size_t> moves;
  const auto order = move_order(ws);
  while (manhattan(l, goal) > 0) {
    ++r.stats.expanded;
    const int h = manhattan(l, goal);
    bool moved = false;
    for (auto mv : order) {
      Location n = l;
      n[mv / 2] += mv % 2 == 0 ? 1 : -1;
      if (manhattan(n, goal) >= h || !ws.joint_location_safe(n)) continue;
      l = n;
      path.push_back(l);
      moves.push_back(mv);
      moved = true;
      break;
    }
    if (!moved) {
      r.message = "greedy search is stuck at " + label_to_string(l) + " with distance " + std::to_string(h);
      r.path = path;
      r.stats.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      return r;
    }
  }
  if (opt.next_move && !moves.empty() && PrunedMoves::reverse(moves.back()) == *opt.next_move) {
    r.message = "greedy path ends with the reverse of the next stage's first move";
    r.path = path;
    return r;
  }
  fill_path_policy(r, ws, pm, path, moves, opt);
  r.success = true;
  r.stats.states = path.size();
  r.stats.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace hybridplan
