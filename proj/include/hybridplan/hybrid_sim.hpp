#pragma once

#include <charconv>
#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hybridplan/integrator.hpp"
#include "hybridplan/planning.hpp"

namespace hybridplan {

struct TraceInterval {
  double t0 = 0.0, t1 = 0.0;
  ProductState state;
};

struct TraceEvent {
  double t = 0.0;
  Label sigma;
  ProductState from, to;  // the guard is identified by (from.primitive, sigma)
};

struct TraceSample {
  double t = 0.0;
  Vector x;  // world frame
  std::size_t interval = 0;
  std::optional<std::size_t> event;
};

enum class TraceStatus { held, horizon, zeno, invariant_exit, ambiguous_event, policy_miss, invalid_transition, budget };

inline const char* to_string(TraceStatus s) {
  switch (s) {
    case TraceStatus::held: return "held";
    case TraceStatus::horizon: return "horizon";
    case TraceStatus::zeno: return "zeno";
    case TraceStatus::invariant_exit: return "invariant_exit";
    case TraceStatus::ambiguous_event: return "ambiguous_event";
    case TraceStatus::policy_miss: return "policy_miss";
    case TraceStatus::invalid_transition: return "invalid_transition";
    case TraceStatus::budget: return "budget";
  }
  return "unknown";
}

struct StageSwitch {
  double t = 0.0;
  std::size_t stage = 0;
};

struct HybridTrace {
  std::vector<TraceInterval> intervals;
  std::vector<TraceEvent> events;
  std::vector<TraceSample> samples;
  std::vector<StageSwitch> stages;  // chained runs only
  TraceStatus status = TraceStatus::horizon;
  std::string detail;
  bool zeno = false;
  double dwell = 0.0;  // time spent in the final all-Hold interval

  // Error statuses; held and horizon are normal ends.
  bool error() const { return status != TraceStatus::held && status != TraceStatus::horizon; }
  double end_time() const { return intervals.empty() ? 0.0 : intervals.back().t1; }
};

// Draws `count` pairs (q, x0) with q uniform over `states` and x0 uniform in
// the invariant of q's primitive, translated to q's location.
inline std::vector<std::pair<ProductState, Vector>> sample_initial_conditions(
    const std::vector<ProductState>& states, const Workspace& ws, const ManeuverAutomaton& ma, std::size_t count,
    std::uint64_t seed, std::size_t max_attempts = 100'000) {
  if (states.empty()) throw std::invalid_argument("sample_initial_conditions: no initial states");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, states.size() - 1);
  std::vector<std::pair<ProductState, Vector>> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto& q = states[pick(rng)];
    const auto parts = ma.decode(q.primitive);
    std::vector<Vector> blocks;
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const auto& inv = ma.component(j).primitives()[parts[j]].invariant;
      const auto bb = inv.bounding_box();
      Vector z(bb.size());
      bool ok = false;
      for (std::size_t a = 0; a < max_attempts && !ok; ++a) {
        for (std::size_t i = 0; i < bb.size(); ++i) {
          z[i] = std::uniform_real_distribution<double>(bb[i].first, bb[i].second)(rng);
        }
        ok = inv.contains(z, 0.0);
      }
      if (!ok) {
        throw std::runtime_error("sample_initial_conditions: rejection sampling failed for primitive " +
                                 ma.primitive_name(q.primitive));
      }
      blocks.push_back(z);
    }
    const Vector z = ma.join_state(blocks);
    const Location l = ws.decode(q.location);
    Vector x = z + ma.label_shift(l);
    out.emplace_back(q, std::move(x));
  }
  return out;
}

// Earliest face crossing of primitive m within one step from canonical z,
// refined by bisection, and the guard it lands in. Returns the crossing time
// offset and the classification, or nothing when the step stays in the box.
inline std::optional<std::pair<double, ExitClassification>> locate_guard_event(const AffineFlow& flow, PrimitiveId m,
                                                                               const Vector& z, double h,
                                                                               const SimConfig& cfg) {
  const auto parts = flow.ma().decode(m);
  Vector x = z, scratch;
  const auto s = advance(flow, parts, x, h, cfg, scratch);
  if (!s.crossed) return std::nullopt;
  return std::make_pair(s.h, classify_exit(flow.ma(), m, x, cfg.snap_tol));
}

namespace detail {

using NextFn = std::function<std::optional<PrimitiveId>(const ProductState&, const Label&)>;
using EnterFn = std::function<void(double, const ProductState&)>;

// Outputs within snap_tol outside [0, d_i] are put back on the face.
inline void clamp_outputs(const ManeuverAutomaton& ma, Vector& z, double tol) {
  const auto& o = ma.output_index();
  for (std::size_t i = 0; i < o.size(); ++i) {
    double& y = z[o[i]];
    const double d = ma.box().d[i];
    if (y < 0.0 && y >= -tol) y = 0.0;
    if (y > d && y <= d + tol) y = d;
  }
}

// Shared execution loop. The canonical state is integrated and the world
// state is recorded as z + d∘l; since the fields are translated copies of
// one another this is the world-frame flow, and the state is never reset.
inline HybridTrace run_hybrid(const Workspace& ws, const ManeuverAutomaton& ma, const ProductState& start,
                              const Vector& x0, const SimConfig& cfg_in, const NextFn& next, const EnterFn& enter) {
  const SimConfig cfg = resolve_sim_config(ma, cfg_in);
  if (cfg.dt <= 0.0 || cfg.t_max <= 0.0 || cfg.max_rate <= 0.0 || cfg.dwell <= 0.0) {
    throw std::invalid_argument("simulate: dt, t_max, max_rate and dwell must be positive");
  }
  if (x0.size() != ma.n()) throw std::invalid_argument("simulate: state dimension mismatch");
  const AffineFlow flow(ma, cfg.dt);
  HybridTrace tr;
  ProductState q = start;
  Location l = ws.decode(q.location);
  Vector shift = ma.label_shift(l);
  Vector z = x0 - shift;
  if (!ma.invariant_contains(q.primitive, z, cfg.hull_tol)) {
    throw std::invalid_argument("simulate: x0 is not in the translated invariant of the start state");
  }
  double t = 0.0;
  std::deque<double> recent;
  std::uint64_t steps = 0;
  tr.intervals.push_back({0.0, 0.0, q});
  tr.samples.push_back({0.0, x0, 0, std::nullopt});
  if (enter) enter(0.0, q);
  Vector scratch;
  auto parts = ma.decode(q.primitive);
  bool hold = ma.sigma(q.primitive).empty();
  auto finish = [&](TraceStatus s, std::string detail) {
    tr.status = s;
    tr.detail = std::move(detail);
    tr.intervals.back().t1 = t;
    return tr;
  };
  while (true) {
    const double hold_start = tr.intervals.back().t0;
    if (hold && t - hold_start >= cfg.dwell - 1e-12) {
      tr.dwell = t - hold_start;
      return finish(TraceStatus::held, "");
    }
    if (t >= cfg.t_max) return finish(TraceStatus::horizon, "");
    if (steps++ >= cfg.step_budget) return finish(TraceStatus::budget, "step budget exhausted");
    double h = std::min(cfg.dt, cfg.t_max - t);
    if (hold) h = std::min(h, hold_start + cfg.dwell - t);
    const StepOutcome so = advance(flow, parts, z, h, cfg, scratch);
    t += so.h;
    const std::size_t iv = tr.intervals.size() - 1;
    if (!so.crossed) {
      std::size_t bad = 0;
      tr.samples.push_back({t, z + shift, iv, std::nullopt});
      if (!flow.hull_contains(parts, z, cfg.hull_tol, &bad)) {
        return finish(TraceStatus::invariant_exit,
                      "left the invariant of component " + std::to_string(bad) + " away from the box faces");
      }
      continue;
    }
    tr.samples.push_back({t, z + shift, iv, tr.events.size()});
    if (hold) return finish(TraceStatus::invariant_exit, "an all-Hold primitive left its box");
    const auto cls = classify_exit(ma, q.primitive, z, cfg.snap_tol);
    if (cls.kind == ExitKind::ambiguous) return finish(TraceStatus::ambiguous_event, cls.detail);
    if (cls.kind == ExitKind::invariant_exit) return finish(TraceStatus::invariant_exit, cls.detail);
    const auto m2 = next(q, cls.sigma);
    if (!m2) {
      return finish(TraceStatus::policy_miss, "no policy entry for " + ma.primitive_name(q.primitive) + " at " +
                                                  label_to_string(l) + " on " + label_to_string(cls.sigma));
    }
    Location l2 = l;
    for (std::size_t i = 0; i < l2.size(); ++i) l2[i] += cls.sigma[i];
    const ProductState q2{ws.joint_location_safe(l2) ? ws.encode(l2) : 0, *m2};
    tr.events.push_back({t, cls.sigma, q, q2});
    if (!ma.has_edge(q.primitive, cls.sigma, *m2) || !pa_state_valid(l2, *m2, ws, ma)) {
      return finish(TraceStatus::invalid_transition,
                    "transition on " + label_to_string(cls.sigma) + " to " + ma.primitive_name(*m2) + " at " +
                        label_to_string(l2) + " is not a product edge");
    }
    // Zeno guard: too many transitions in the last time unit, or two at once.
    if (!recent.empty() && t - recent.back() <= cfg.time_tol) {
      tr.zeno = true;
      return finish(TraceStatus::zeno, "two transitions within the event tolerance");
    }
    recent.push_back(t);
    while (!recent.empty() && recent.front() <= t - 1.0) recent.pop_front();
    if (static_cast<double>(recent.size()) > cfg.max_rate) {
      tr.zeno = true;
      return finish(TraceStatus::zeno, "transition rate above the configured bound");
    }
    tr.intervals.back().t1 = t;
    const Vector world = z + shift;
    q = q2;
    l = std::move(l2);
    shift = ma.label_shift(l);
    z = world - shift;
    clamp_outputs(ma, z, cfg.snap_tol);
    parts = ma.decode(q.primitive);
    hold = ma.sigma(q.primitive).empty();
    tr.intervals.push_back({t, t, q});
    if (enter) enter(t, q);
  }
}

}  // namespace detail

// Runs the closed loop from (start, x0) under the policy until an all-Hold
// primitive has dwelt cfg.dwell time units, t_max passes, or an error.
inline HybridTrace simulate_execution(const Workspace& ws, const ManeuverAutomaton& ma, const ControlPolicy& policy,
                                      const ProductState& start, const Vector& x0, const SimConfig& cfg = {}) {
  if (!policy.covers(start)) throw std::invalid_argument("simulate_execution: start state is not covered by the policy");
  return detail::run_hybrid(
      ws, ma, start, x0, cfg, [&](const ProductState& q, const Label& s) { return policy.next(q, s); }, nullptr);
}

// Chained execution: the policy of stage i is used until the run enters a
// state at stage i's goal for which that policy has no choice to make; the
// next stage (wrapping in loop mode) takes over from there.
inline HybridTrace simulate_chain(const Workspace& base, const ManeuverAutomaton& ma,
                                  const std::vector<std::vector<Box>>& goals, const std::vector<ControlPolicy>& policies,
                                  bool loop, const ProductState& start, const Vector& x0, const SimConfig& cfg = {}) {
  if (policies.empty() || policies.size() != goals.size()) {
    throw std::invalid_argument("simulate_chain: need one policy per stage");
  }
  std::vector<Workspace> stage_ws;
  for (std::size_t i = 0; i < goals.size(); ++i) {
    GridSpec g = base.spec();
    g.goals = goals[i];
    stage_ws.emplace_back(g);
  }
  std::size_t stage = 0;
  std::vector<StageSwitch> switches{{0.0, 0}};
  auto done_with = [&](std::size_t i, const ProductState& q) {
    if (!stage_ws[i].is_goal(stage_ws[i].decode(q.location))) return false;
    auto it = policies[i].table.find(q);
    return it == policies[i].table.end() || it->second.empty();
  };
  auto enter = [&](double t, const ProductState& q) {
    for (std::size_t k = 0; k < goals.size() && done_with(stage, q); ++k) {
      if (stage + 1 == goals.size() && !loop) return;
      stage = (stage + 1) % goals.size();
      switches.push_back({t, stage});
    }
  };
  auto next = [&](const ProductState& q, const Label& s) { return policies[stage].next(q, s); };
  auto tr = detail::run_hybrid(base, ma, start, x0, cfg, next, enter);
  tr.stages = std::move(switches);
  return tr;
}

struct Verdict {
  bool pass = false;
  bool avoid = false;
  bool reach = false;
  std::optional<double> violation_time;  // first sample outside the safe set
  std::optional<double> reach_time;      // T with all later samples in the goal box
  std::string reason;
};

namespace detail {

// Box index candidates for coordinate y on an axis of width d: the box
// holding y and, within tol of a face, the neighbour across it.
inline void box_candidates(double y, double d, double tol, std::vector<int>& out) {
  out.clear();
  const int b = static_cast<int>(std::floor(y / d));
  out.push_back(b);
  if (y - b * d <= tol) out.push_back(b - 1);
  if ((b + 1) * d - y <= tol) out.push_back(b + 1);
}

inline bool in_safe_set(const Workspace& ws, const ManeuverAutomaton& ma, const Vector& x, double tol) {
  const std::size_t p = ws.p(), k = ws.axes();
  std::vector<std::vector<int>> cand(p);
  for (std::size_t i = 0; i < p; ++i) box_candidates(x[ma.output_index()[i]], ws.spec().d[i % k], tol, cand[i]);
  Location l(p);
  std::vector<std::size_t> pick(p, 0);
  while (true) {
    for (std::size_t i = 0; i < p; ++i) l[i] = cand[i][pick[i]];
    if (ws.joint_location_safe(l)) return true;
    std::size_t i = 0;
    while (i < p && ++pick[i] == cand[i].size()) pick[i++] = 0;
    if (i == p) return false;
  }
}

inline bool in_goal_box(const Workspace& ws, const ManeuverAutomaton& ma, const Vector& x, double tol) {
  const auto goal = ws.goal_location();
  const std::size_t k = ws.axes();
  for (std::size_t i = 0; i < ws.p(); ++i) {
    const double d = ws.spec().d[i % k];
    const double y = x[ma.output_index()[i]];
    if (y < goal[i] * d - tol || y > (goal[i] + 1) * d + tol) return false;
  }
  return true;
}

}  // namespace detail

// Avoid: every sample lies in some safe joint box, with tol of slack at
// faces. Reach: the run ended with a full all-Hold dwell and a time exists
// after which every sample is in the goal box.
inline Verdict verify_reach_avoid(const HybridTrace& tr, const Workspace& ws, const ManeuverAutomaton& ma,
                                  double min_dwell = 1.0, double tol = kEpsGeo) {
  Verdict v;
  v.avoid = true;
  for (const auto& s : tr.samples) {
    if (!detail::in_safe_set(ws, ma, s.x, tol)) {
      v.avoid = false;
      v.violation_time = s.t;
      break;
    }
  }
  std::optional<double> t_reach;
  for (std::size_t i = tr.samples.size(); i-- > 0;) {
    if (!detail::in_goal_box(ws, ma, tr.samples[i].x, tol)) break;
    t_reach = tr.samples[i].t;
  }
  v.reach_time = t_reach;
  v.reach = t_reach.has_value() && tr.status == TraceStatus::held && tr.dwell >= min_dwell - 1e-12;
  v.pass = v.avoid && v.reach && !tr.error();
  if (tr.error()) {
    v.reason = std::string("trace ended with ") + to_string(tr.status) + ": " + tr.detail;
  } else if (!v.avoid) {
    v.reason = "left the safe set";
  } else if (!v.reach) {
    v.reason = "did not settle in the goal box";
  }
  return v;
}

// Chained runs. Avoid is checked over the whole trace. Progress: every
// stage's goal reached in order; loop mode needs one full lap, a single pass
// also needs the final dwell in the last goal.
inline Verdict verify_chain(const HybridTrace& tr, const Workspace& base, const ManeuverAutomaton& ma,
                            const std::vector<std::vector<Box>>& goals, bool loop, double min_dwell = 1.0,
                            double tol = kEpsGeo) {
  GridSpec g = base.spec();
  g.goals = goals.back();
  Verdict v = verify_reach_avoid(tr, Workspace(g), ma, min_dwell, tol);
  const std::size_t n = goals.size();
  if (loop) {
    v.reach = tr.stages.size() >= n + 1;
    v.reach_time = v.reach ? std::optional<double>(tr.stages[n].t) : std::nullopt;
  } else {
    v.reach = v.reach && tr.stages.size() == n;
  }
  v.pass = v.avoid && v.reach && !tr.error();
  if (v.pass) {
    v.reason.clear();
  } else if (!tr.error() && v.avoid) {
    v.reason = "completed " + std::to_string(tr.stages.empty() ? 0 : tr.stages.size() - 1) + " of " +
               std::to_string(n) + " stages";
  }
  return v;
}

namespace detail {

inline std::string fmt_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string colon_join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ":" : "") + v[i];
  return out;
}

inline std::string colon_join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ":" : "") + std::to_string(v[i]);
  return out;
}

}  // namespace detail

// Column names of trace_csv. Double-integrator style components (two states,
// output first) get vehicle/axis names, anything else x<i>.
inline std::vector<std::string> trace_columns(const Workspace& ws, const ManeuverAutomaton& ma) {
  std::vector<std::string> cols{"t", "interval", "stage", "location", "primitive", "primitive_name", "event"};
  static const char* axis = "xyz";
  bool di = ma.num_components() == ws.p();
  for (std::size_t j = 0; di && j < ma.num_components(); ++j) {
    const auto& c = ma.component(j);
    di = c.n() == 2 && c.p() == 1 && c.output_index()[0] == 0;
  }
  const std::size_t k = ws.axes();
  if (di && k <= 3) {
    for (std::size_t i = 0; i < ws.p(); ++i) {
      const std::string base = "v" + std::to_string(i / k) + "_" + axis[i % k];
      cols.push_back(base + "_pos");
      cols.push_back(base + "_vel");
    }
    for (std::size_t i = 0; i < ws.p(); ++i) cols.push_back("v" + std::to_string(i / k) + "_" + axis[i % k] + "_box");
  } else {
    for (std::size_t i = 0; i < ma.n(); ++i) cols.push_back("x" + std::to_string(i));
    for (std::size_t i = 0; i < ws.p(); ++i) cols.push_back("l" + std::to_string(i));
  }
  return cols;
}

// One row per written sample: time, interval index, chain stage, location code,
// primitive id and names, the event label at that sample (empty if none),
// the full world state, then the box index of every output.
// With every > 1 only every k-th sample is written, plus event samples and
// the last one.
inline std::string trace_csv(const HybridTrace& tr, const Workspace& ws, const ManeuverAutomaton& ma,
                             std::size_t every = 1) {
  if (every == 0) every = 1;
  std::ostringstream os;
  const auto cols = trace_columns(ws, ma);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  std::size_t sw = 0;
  for (std::size_t k = 0; k < tr.samples.size(); ++k) {
    const auto& s = tr.samples[k];
    if (k % every != 0 && !s.event && k + 1 != tr.samples.size()) continue;
    while (sw + 1 < tr.stages.size() && tr.stages[sw + 1].t <= s.t &&
           (!s.event || tr.stages[sw + 1].t < s.t)) {
      ++sw;
    }
    const auto& q = tr.intervals[s.interval].state;
    os << detail::fmt_double(s.t) << ',' << s.interval << ',' << (tr.stages.empty() ? 0 : tr.stages[sw].stage) << ','
       << q.location << ',' << q.primitive << ',' << detail::colon_join(ma.primitive_names(q.primitive)) << ',';
    if (s.event) os << detail::colon_join(tr.events[*s.event].sigma);
    for (double x : s.x) os << ',' << detail::fmt_double(x);
    for (const int b : ws.decode(q.location)) os << ',' << b;
    os << '\n';
  }
  return os.str();
}

}  // namespace hybridplan
