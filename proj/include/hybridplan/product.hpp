#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hybridplan/ma_core.hpp"
#include "hybridplan/workspace.hpp"

namespace hybridplan {

struct ProductState {
  LocationCode location = 0;
  PrimitiveId primitive = 0;
  auto operator<=>(const ProductState&) const = default;
};

// Labels packed in base 3, first entry most significant, so numeric order of
// codes equals lexicographic order of labels.
using LabelCode = std::uint64_t;

inline LabelCode label_code(const Label& s) {
  if (s.size() > 40) throw std::invalid_argument("label_code: at most 40 outputs");
  LabelCode c = 0;
  for (int v : s) c = c * 3 + static_cast<LabelCode>(v + 1);
  return c;
}

inline Label label_from_code(LabelCode c, std::size_t p) {
  Label s(p);
  for (std::size_t i = p; i-- > 0;) {
    s[i] = static_cast<int>(c % 3) - 1;
    c /= 3;
  }
  return s;
}

// Lazy product of a workspace OTS and a maneuver automaton. Nothing is
// materialized; every query re-checks validity.
class ProductView {
 public:
  ProductView(const Workspace& ws, const ManeuverAutomaton& ma) : ws_(&ws), ma_(&ma) {
    if (ma.p() != ws.p()) {
      throw std::invalid_argument("product: automaton has " + std::to_string(ma.p()) + " outputs, workspace needs " +
                                  std::to_string(ws.p()));
    }
    const auto& d = ws.spec().d;
    for (std::size_t i = 0; i < ws.p(); ++i) {
      if (std::abs(ma.box().d[i] - d[i % ws.axes()]) > 1e-12) {
        throw std::invalid_argument("product: automaton box length on output " + std::to_string(i) +
                                    " differs from the grid");
      }
    }
  }

  const Workspace& workspace() const { return *ws_; }
  const ManeuverAutomaton& ma() const { return *ma_; }

  // Necessary condition checked per component: every label of component j
  // alone (others idle) leads to a safe location.
  bool component_ok(Location& l, std::size_t j, std::size_t mj) const {
    const auto& c = ma_->component(j);
    const std::size_t off = ma_->output_offset(j);
    for (const auto& s : c.sigma(mj)) {
      for (std::size_t i = 0; i < s.size(); ++i) l[off + i] += s[i];
      const bool ok = ws_->joint_location_safe(l);
      for (std::size_t i = 0; i < s.size(); ++i) l[off + i] -= s[i];
      if (!ok) return false;
    }
    return true;
  }

  std::vector<std::vector<std::size_t>> component_candidates(const Location& l) const {
    Location tmp = l;
    std::vector<std::vector<std::size_t>> out(ma_->num_components());
    for (std::size_t j = 0; j < out.size(); ++j) {
      for (std::size_t mj = 0; mj < ma_->component(j).num_primitives(); ++mj) {
        if (component_ok(tmp, j, mj)) out[j].push_back(mj);
      }
    }
    return out;
  }

  // True iff l is safe and every label in Sigma_MA(m) has an OTS successor.
  bool state_valid(const Location& l, PrimitiveId m) const {
    if (!ws_->joint_location_safe(l)) return false;
    return labels_safe(l, ma_->decode(m));
  }

  bool labels_safe(const Location& l, const std::vector<std::size_t>& parts) const {
    Location tmp = l;
    return labels_safe_rec(tmp, parts, 0, false);
  }

  // Valid primitives at a safe location, ascending.
  std::vector<PrimitiveId> valid_primitives(const Location& l) const {
    if (!ws_->joint_location_safe(l)) return {};
    const auto cands = component_candidates(l);
    std::vector<PrimitiveId> out;
    std::vector<std::size_t> parts(cands.size());
    std::vector<std::size_t> pos(cands.size(), 0);
    for (const auto& c : cands) {
      if (c.empty()) return out;
    }
    while (true) {
      for (std::size_t j = 0; j < cands.size(); ++j) parts[j] = cands[j][pos[j]];
      if (labels_safe(l, parts)) out.push_back(ma_->encode(parts));
      std::size_t j = cands.size();
      while (j > 0) {
        --j;
        if (++pos[j] < cands[j].size()) break;
        pos[j] = 0;
        if (j == 0) return out;
      }
      if (cands.empty()) return out;
    }
  }

  // Successors (l', m') of q under s, sorted by primitive. Empty when s is
  // not an MA label of q's primitive.
  std::vector<ProductState> successors(const ProductState& q, const Label& s) const {
    if (is_epsilon(s) || s.size() != ws_->p()) return {};
    const Location l = ws_->decode(q.location);
    const auto next = ws_->ots_successor(l, s);
    if (!next) return {};
    std::vector<ProductState> out;
    const LocationCode lc = ws_->encode(*next);
    for (auto t : ma_->successors(q.primitive, s)) {
      if (state_valid(*next, t)) out.push_back({lc, t});
    }
    return out;
  }

  // Sigma_PA(q): MA labels of q's primitive with at least one successor.
  std::vector<Label> sigma_pa(const ProductState& q) const {
    std::vector<Label> out;
    for (const auto& s : ma_->sigma(q.primitive)) {
      if (!successors(q, s).empty()) out.push_back(s);
    }
    return out;
  }

  std::vector<PrimitiveId> admissible_primitives(const ProductState& q, const Label& s) const {
    const auto succ = successors(q, s);
    if (succ.empty()) throw std::invalid_argument("admissible_primitives: label not in Sigma_PA(q)");
    std::vector<PrimitiveId> out;
    for (const auto& t : succ) out.push_back(t.primitive);
    return out;
  }

  // M(q): Cartesian product of M(q, s) over Sigma_PA(q) in label order.
  std::vector<std::vector<PrimitiveId>> admissible_assignments(const ProductState& q,
                                                               std::size_t limit = 1'000'000) const {
    std::vector<std::vector<PrimitiveId>> acc{{}};
    for (const auto& s : sigma_pa(q)) {
      const auto opts = admissible_primitives(q, s);
      std::vector<std::vector<PrimitiveId>> next;
      for (const auto& pre : acc) {
        for (auto m : opts) {
          auto v = pre;
          v.push_back(m);
          next.push_back(std::move(v));
          if (next.size() > limit) throw std::length_error("admissible_assignments exceeds limit");
        }
      }
      acc = std::move(next);
    }
    return acc;
  }

 private:
  bool labels_safe_rec(Location& l, const std::vector<std::size_t>& parts, std::size_t j, bool moved) const {
    if (j == parts.size()) return !moved || ws_->joint_location_safe(l);
    const auto& c = ma_->component(j);
    const std::size_t off = ma_->output_offset(j);
    for (const auto& s : c.sigma_bar(parts[j])) {
      const bool here = !is_epsilon(s);
      for (std::size_t i = 0; i < s.size(); ++i) l[off + i] += s[i];
      const bool ok = labels_safe_rec(l, parts, j + 1, moved || here);
      for (std::size_t i = 0; i < s.size(); ++i) l[off + i] -= s[i];
      if (!ok) return false;
    }
    return true;
  }

  const Workspace* ws_;
  const ManeuverAutomaton* ma_;
};

inline bool pa_state_valid(const Location& l, PrimitiveId m, const Workspace& ws, const ManeuverAutomaton& ma) {
  return ProductView(ws, ma).state_valid(l, m);
}

// Explicit product automaton in compressed sparse row form. States are
// sorted by (location, primitive). Each state owns one successor group per
// label of Sigma_MA(m), in label order; a group may be empty when no
// successor primitive is valid, which makes the label a dead end.
struct ProductAutomaton {
  std::size_t p = 0;
  std::vector<LocationCode> locations;     // ascending
  std::vector<std::uint64_t> loc_begin;    // per location, size L + 1
  std::vector<std::uint32_t> state_loc;    // per state
  std::vector<PrimitiveId> primitive;      // per state
  std::vector<std::uint64_t> group_begin;  // per state, size S + 1
  std::vector<LabelCode> group_label;      // per group
  std::vector<std::uint64_t> succ_begin;   // per group, size G + 1
  std::vector<std::uint32_t> succ;         // target state, ascending within a group
  std::vector<char> final;                 // per state

  std::size_t num_states() const { return primitive.size(); }
  std::size_t num_groups() const { return group_label.size(); }
  std::size_t num_edges() const { return succ.size(); }

  ProductState state(std::size_t i) const { return {locations[state_loc[i]], primitive[i]}; }
  Label label(std::size_t g) const { return label_from_code(group_label[g], p); }

  std::optional<std::uint32_t> find(const ProductState& q) const {
    auto it = std::lower_bound(locations.begin(), locations.end(), q.location);
    if (it == locations.end() || *it != q.location) return std::nullopt;
    const auto li = static_cast<std::size_t>(it - locations.begin());
    auto b = primitive.begin() + static_cast<long>(loc_begin[li]);
    auto e = primitive.begin() + static_cast<long>(loc_begin[li + 1]);
    auto jt = std::lower_bound(b, e, q.primitive);
    if (jt == e || *jt != q.primitive) return std::nullopt;
    return static_cast<std::uint32_t>(jt - primitive.begin());
  }

  // Group of state i for label s, if any.
  std::optional<std::size_t> group_of(std::size_t i, LabelCode s) const {
    for (auto g = group_begin[i]; g < group_begin[i + 1]; ++g) {
      if (group_label[g] == s) return static_cast<std::size_t>(g);
    }
    return std::nullopt;
  }

  // Structural sanity: sorted states, monotone offsets, in-range targets.
  void validate() const {
    const std::size_t s = num_states();
    if (state_loc.size() != s || final.size() != s || group_begin.size() != s + 1 ||
        loc_begin.size() != locations.size() + 1 || succ_begin.size() != num_groups() + 1) {
      throw std::logic_error("product automaton: inconsistent array sizes");
    }
    for (std::size_t i = 1; i < s; ++i) {
      if (!(state(i - 1) < state(i))) throw std::logic_error("product automaton: states not sorted");
    }
    for (std::size_t g = 0; g < num_groups(); ++g) {
      for (auto k = succ_begin[g]; k < succ_begin[g + 1]; ++k) {
        if (succ[k] >= s) throw std::logic_error("product automaton: successor out of range");
        if (k > succ_begin[g] && succ[k - 1] >= succ[k]) throw std::logic_error("product automaton: unsorted group");
      }
    }
  }
};

struct ProductBuildOptions {
  std::uint64_t budget_states = 5'000'000;
  std::uint64_t budget_edges = 200'000'000;
  unsigned workers = 0;  // 0 = hardware concurrency, at most 8
};

namespace detail {

inline unsigned worker_count(unsigned requested, std::size_t items) {
  unsigned w = requested ? requested : std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  if (items < 64) w = 1;
  return std::max(1u, std::min<unsigned>(w, static_cast<unsigned>(std::max<std::size_t>(items, 1))));
}

// Runs fn(begin, end, worker) over contiguous chunks of [0, n).
inline void parallel_chunks(std::size_t n, unsigned workers,
                            const std::function<void(std::size_t, std::size_t, unsigned)>& fn) {
  if (workers <= 1) {
    fn(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t b = std::min(n, w * chunk), e = std::min(n, b + chunk);
    pool.emplace_back([&, b, e, w] {
      try {
        fn(b, e, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

// Upper bound (prod counts)^N * |M| on the number of product states,
// saturating at UINT64_MAX.
inline std::uint64_t pa_size_bound(const Workspace& ws, const ManeuverAutomaton& ma) {
  unsigned __int128 b = ws.location_space_size();
  b *= ma.num_primitives();
  return b > UINT64_MAX ? UINT64_MAX : static_cast<std::uint64_t>(b);
}

// Number of valid product states without building edges.
inline std::uint64_t count_pa_states(const Workspace& ws, const ManeuverAutomaton& ma,
                                     std::uint64_t budget = 50'000'000) {
  ProductView view(ws, ma);
  std::uint64_t total = 0;
  for (auto code : ws.safe_locations(budget)) {
    total += view.valid_primitives(ws.decode(code)).size();
    if (total > budget) throw std::length_error("product state count exceeds budget");
  }
  return total;
}

inline ProductAutomaton enumerate_pa(const Workspace& ws, const ManeuverAutomaton& ma,
                                     const ProductBuildOptions& opt = {}) {
  ProductView view(ws, ma);
  for (std::size_t j = 0; j < ma.num_components(); ++j) {
    if (ma.component(j).num_primitives() > 64) {
      throw std::invalid_argument("enumerate_pa: components with more than 64 primitives are not supported");
    }
  }
  ProductAutomaton pa;
  pa.p = ws.p();
  pa.locations = ws.safe_locations(opt.budget_states);
  const std::size_t nl = pa.locations.size();
  const std::size_t nc = ma.num_components();
  const unsigned workers = detail::worker_count(opt.workers, nl);

  // Pass 1: valid primitives and per-component candidate masks per location.
  std::vector<std::vector<PrimitiveId>> prims(nl);
  std::vector<std::uint64_t> masks(nl * nc, 0);
  std::atomic<std::uint64_t> count{0};
  detail::parallel_chunks(nl, workers, [&](std::size_t b, std::size_t e, unsigned) {
    for (std::size_t li = b; li < e; ++li) {
      const Location l = ws.decode(pa.locations[li]);
      const auto cands = view.component_candidates(l);
      for (std::size_t j = 0; j < nc; ++j) {
        for (auto mj : cands[j]) masks[li * nc + j] |= std::uint64_t{1} << mj;
      }
      prims[li] = view.valid_primitives(l);
      if ((count += prims[li].size()) > opt.budget_states) {
        throw std::length_error("product automaton exceeds the state budget of " +
                                std::to_string(opt.budget_states) + "; use astar or greedy instead");
      }
    }
  });

  pa.loc_begin.assign(nl + 1, 0);
  for (std::size_t li = 0; li < nl; ++li) pa.loc_begin[li + 1] = pa.loc_begin[li] + prims[li].size();
  const std::size_t ns = pa.loc_begin[nl];
  if (ns > UINT32_MAX) throw std::length_error("product automaton: too many states for 32-bit indices");
  pa.state_loc.resize(ns);
  pa.primitive.resize(ns);
  pa.final.assign(ns, 0);
  for (std::size_t li = 0; li < nl; ++li) {
    const bool goal = ws.is_goal(ws.decode(pa.locations[li]));
    for (std::size_t k = 0; k < prims[li].size(); ++k) {
      const auto i = pa.loc_begin[li] + k;
      pa.state_loc[i] = static_cast<std::uint32_t>(li);
      pa.primitive[i] = prims[li][k];
      pa.final[i] = goal && ma.sigma(prims[li][k]).empty();
    }
  }
  prims.clear();
  prims.shrink_to_fit();

  // Pass 2: successor groups, built per chunk and concatenated in order.
  struct Chunk {
    std::vector<std::uint32_t> groups_per_state;
    std::vector<LabelCode> labels;
    std::vector<std::uint32_t> group_size;
    std::vector<std::uint32_t> succ;
  };
  std::vector<Chunk> chunks(workers);
  std::vector<std::pair<std::size_t, std::size_t>> ranges(workers);
  std::atomic<std::uint64_t> edges{0};
  detail::parallel_chunks(ns, workers, [&](std::size_t b, std::size_t e, unsigned w) {
    Chunk& ch = chunks[w];
    ranges[w] = {b, e};
    std::vector<std::size_t> parts, tparts(nc), pos(nc);
    std::vector<std::vector<std::size_t>> opts(nc);
    for (std::size_t i = b; i < e; ++i) {
      const Location l = ws.decode(pa.locations[pa.state_loc[i]]);
      parts = ma.decode(pa.primitive[i]);
      const auto labels = ma.sigma(pa.primitive[i]);
      ch.groups_per_state.push_back(static_cast<std::uint32_t>(labels.size()));
      for (const auto& s : labels) {
        ch.labels.push_back(label_code(s));
        const std::size_t before = ch.succ.size();
        Location n = l;
        for (std::size_t t = 0; t < n.size(); ++t) n[t] += s[t];
        const auto li2 = std::lower_bound(pa.locations.begin(), pa.locations.end(), ws.encode(n));
        if (li2 == pa.locations.end() || *li2 != ws.encode(n)) {
          throw std::logic_error("product automaton: valid state lacks an OTS successor");
        }
        const auto lj = static_cast<std::size_t>(li2 - pa.locations.begin());
        bool any = true;
        for (std::size_t j = 0; j < nc && any; ++j) {
          opts[j].clear();
          for (auto t : ma.component(j).successors_bar(parts[j], ma.component_label(s, j))) {
            if (masks[lj * nc + j] >> t & 1) opts[j].push_back(t);
          }
          any = !opts[j].empty();
        }
        if (any) {
          const auto pb = pa.primitive.begin() + static_cast<long>(pa.loc_begin[lj]);
          const auto pe = pa.primitive.begin() + static_cast<long>(pa.loc_begin[lj + 1]);
          std::fill(pos.begin(), pos.end(), 0);
          while (true) {
            for (std::size_t j = 0; j < nc; ++j) tparts[j] = opts[j][pos[j]];
            const auto m2 = ma.encode(tparts);
            const auto it = std::lower_bound(pb, pe, m2);
            if (it != pe && *it == m2) ch.succ.push_back(static_cast<std::uint32_t>(it - pa.primitive.begin()));
            std::size_t j = nc;
            bool done = false;
            while (true) {
              if (j == 0) {
                done = true;
                break;
              }
              --j;
              if (++pos[j] < opts[j].size()) break;
              pos[j] = 0;
            }
            if (done) break;
          }
        }
        ch.group_size.push_back(static_cast<std::uint32_t>(ch.succ.size() - before));
        if ((edges += ch.succ.size() - before) > opt.budget_edges) {
          throw std::length_error("product automaton exceeds the edge budget");
        }
      }
    }
  });

  pa.group_begin.reserve(ns + 1);
  pa.group_begin.push_back(0);
  pa.succ_begin.push_back(0);
  for (unsigned w = 0; w < workers; ++w) {
    if (ranges[w].first == ranges[w].second) continue;
    const Chunk& ch = chunks[w];
    for (auto g : ch.groups_per_state) pa.group_begin.push_back(pa.group_begin.back() + g);
    pa.group_label.insert(pa.group_label.end(), ch.labels.begin(), ch.labels.end());
    for (auto g : ch.group_size) pa.succ_begin.push_back(pa.succ_begin.back() + g);
    pa.succ.insert(pa.succ.end(), ch.succ.begin(), ch.succ.end());
  }
  if (pa.group_begin.size() != ns + 1) pa.group_begin.resize(ns + 1, pa.group_begin.back());

  if (ns >= pa_size_bound(ws, ma)) {
    throw std::logic_error("product automaton violates the state-count bound");
  }
  return pa;
}

// Human-readable dump: one line per state followed by its labeled groups.
inline std::string dump_pa(const ProductAutomaton& pa, const Workspace& ws, const ManeuverAutomaton& ma) {
  std::ostringstream os;
  os << "states " << pa.num_states() << " edges " << pa.num_edges() << "\n";
  auto loc = [&](std::size_t i) {
    const auto l = ws.decode(pa.locations[pa.state_loc[i]]);
    return label_to_string(l);
  };
  for (std::size_t i = 0; i < pa.num_states(); ++i) {
    os << i << " " << loc(i) << " " << ma.primitive_name(pa.primitive[i]) << (pa.final[i] ? " final" : "") << "\n";
    for (auto g = pa.group_begin[i]; g < pa.group_begin[i + 1]; ++g) {
      os << "  " << label_to_string(pa.label(g)) << " ->";
      for (auto k = pa.succ_begin[g]; k < pa.succ_begin[g + 1]; ++k) os << " " << pa.succ[k];
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace hybridplan
