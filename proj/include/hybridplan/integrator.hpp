#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hybridplan/ma_core.hpp"

namespace hybridplan {

struct SimConfig {
  double dt = 0.0;      // 0 picks min_i d_i / (200 * speed_i)
  double t_max = 0.0;   // 0 picks 50 * max_i d_i / speed_i
  double time_tol = 1e-9;
  double snap_tol = 1e-7;   // output coordinates this close to a face are put on it
  double hull_tol = 1e-7;   // slack allowed when re-checking invariants along a flow
  double max_rate = 50.0;   // transitions per unit time before the Zeno guard trips
  double dwell = 1.0;       // goal dwell before reach is declared
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
  std::uint64_t step_budget = 2'000'000'000ULL;
};

// Largest |d y_i / dt| of the drift over the invariant bounding boxes. For
// the double integrator this is u_bar.
inline double output_speed_scale(const AtomicMA& ma) {
  double best = 0.0;
  for (const auto& prim : ma.primitives()) {
    const auto bb = prim.invariant.bounding_box();
    const std::size_t n = bb.size();
    for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
      Vector x(n);
      for (std::size_t k = 0; k < n; ++k) x[k] = (mask >> k) & 1U ? bb[k].second : bb[k].first;
      const Vector ax = ma.A() * x;
      for (auto i : ma.output_index()) best = std::max(best, std::abs(ax[i]));
    }
  }
  return best > 0.0 ? best : 1.0;
}

inline SimConfig resolve_sim_config(const ManeuverAutomaton& ma, SimConfig cfg) {
  double dt = 0.0, horizon = 0.0;
  for (std::size_t j = 0; j < ma.num_components(); ++j) {
    const auto& c = ma.component(j);
    const double speed = output_speed_scale(c);
    for (double d : c.box().d) {
      const double step = d / (200.0 * speed);
      dt = dt == 0.0 ? step : std::min(dt, step);
      horizon = std::max(horizon, 50.0 * d / speed);
    }
  }
  if (cfg.dt <= 0.0) cfg.dt = dt;
  if (cfg.t_max <= 0.0) cfg.t_max = horizon;
  return cfg;
}

// Classical RK4 on the field of primitive m evaluated at x - shift. Reference
// form; the simulators use AffineFlow.
inline Vector rk4_step(const ManeuverAutomaton& ma, PrimitiveId m, const Vector& x, const Vector& shift,
                       double h) {
  auto f = [&](const Vector& s) { return ma.field(m, s - shift); };
  const Vector k1 = f(x);
  const Vector k2 = f(x + (0.5 * h) * k1);
  const Vector k3 = f(x + (0.5 * h) * k2);
  const Vector k4 = f(x + h * k3);
  Vector out = x;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

// Per component primitive the closed loop is z' = M z + c, so one RK4 step of
// size h is the affine map z -> T z + s with
//   T = I + N + N^2/2 + N^3/6 + N^4/24,  s = h (I + N/2 + N^2/6 + N^3/24) c,  N = hM.
// T and s are precomputed for the nominal step.
class AffineFlow {
 public:
  AffineFlow(const ManeuverAutomaton& ma, double h) : ma_(&ma), h_(h) {
    for (std::size_t j = 0; j < ma.num_components(); ++j) {
      const auto& c = ma.component(j);
      const std::size_t n = c.n();
      off_.push_back(ma.state_offset(j));
      std::vector<Block> per;
      for (const auto& prim : c.primitives()) {
        Block b;
        b.n = n;
        const Matrix BK = mul(c.B(), prim.K);
        b.M.resize(n * n);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t k = 0; k < n; ++k) b.M[r * n + k] = c.A()(r, k) + BK(r, k);
        }
        b.c = c.B() * prim.g;
        Matrix N(n, n);
        for (std::size_t i = 0; i < n * n; ++i) N(i / n, i % n) = h * b.M[i];
        const Matrix N2 = mul(N, N), N3 = mul(N2, N), N4 = mul(N3, N);
        Matrix T(n, n), S(n, n);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t k = 0; k < n; ++k) {
            const double id = r == k ? 1.0 : 0.0;
            T(r, k) = id + N(r, k) + N2(r, k) / 2.0 + N3(r, k) / 6.0 + N4(r, k) / 24.0;
            S(r, k) = h * (id + N(r, k) / 2.0 + N2(r, k) / 6.0 + N3(r, k) / 24.0);
          }
        }
        b.T = T.data();
        b.s = S * b.c;
        per.push_back(std::move(b));
      }
      blocks_.push_back(std::move(per));
    }
  }

  double h() const { return h_; }
  const ManeuverAutomaton& ma() const { return *ma_; }

  // One nominal step in canonical coordinates.
  void step(const std::vector<std::size_t>& parts, const Vector& z, Vector& out) const {
    out.resize(z.size());
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const Block& b = blocks_[j][parts[j]];
      const double* zj = z.data() + off_[j];
      double* oj = out.data() + off_[j];
      for (std::size_t r = 0; r < b.n; ++r) {
        double acc = b.s[r];
        for (std::size_t k = 0; k < b.n; ++k) acc += b.T[r * b.n + k] * zj[k];
        oj[r] = acc;
      }
    }
  }

  // RK4 with an arbitrary step size.
  void rk4(const std::vector<std::size_t>& parts, const Vector& z, double h, Vector& out) const {
    out.resize(z.size());
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const Block& b = blocks_[j][parts[j]];
      const std::size_t n = b.n;
      const double* zj = z.data() + off_[j];
      double k[4][8];
      double tmp[8];
      if (n > 8) throw std::invalid_argument("AffineFlow: component state too large");
      auto f = [&](const double* x, double* dx) {
        for (std::size_t r = 0; r < n; ++r) {
          double acc = b.c[r];
          for (std::size_t q = 0; q < n; ++q) acc += b.M[r * n + q] * x[q];
          dx[r] = acc;
        }
      };
      f(zj, k[0]);
      for (std::size_t r = 0; r < n; ++r) tmp[r] = zj[r] + 0.5 * h * k[0][r];
      f(tmp, k[1]);
      for (std::size_t r = 0; r < n; ++r) tmp[r] = zj[r] + 0.5 * h * k[1][r];
      f(tmp, k[2]);
      for (std::size_t r = 0; r < n; ++r) tmp[r] = zj[r] + h * k[2][r];
      f(tmp, k[3]);
      for (std::size_t r = 0; r < n; ++r) {
        out[off_[j] + r] = zj[r] + h / 6.0 * (k[0][r] + 2.0 * k[1][r] + 2.0 * k[2][r] + k[3][r]);
      }
    }
  }

  // Closed invariant hulls of every block, with slack tol.
  bool hull_contains(const std::vector<std::size_t>& parts, const Vector& z, double tol,
                     std::size_t* failed_block = nullptr) const {
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const auto& inv = ma_->component(j).primitives()[parts[j]].invariant;
      const double* zj = z.data() + off_[j];
      for (const auto& hs : inv.halfspaces()) {
        double m = hs.offset;
        for (std::size_t k = 0; k < hs.normal.size(); ++k) m -= hs.normal[k] * zj[k];
        if (m < -tol) {
          if (failed_block) *failed_block = j;
          return false;
        }
      }
    }
    return true;
  }

 private:
  static Matrix mul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t k = 0; k < a.cols(); ++k) {
        for (std::size_t c = 0; c < b.cols(); ++c) out(r, c) += a(r, k) * b(k, c);
      }
    }
    return out;
  }

  struct Block {
    std::size_t n = 0;
    std::vector<double> M, c, T, s;
  };
  const ManeuverAutomaton* ma_;
  double h_;
  std::vector<std::size_t> off_;
  std::vector<std::vector<Block>> blocks_;
};

enum class ExitKind { guard, invariant_exit, ambiguous };

struct ExitClassification {
  ExitKind kind = ExitKind::invariant_exit;
  Label sigma;
  std::string detail;
};

// Which guard of m holds the canonical state z. Output coordinates within
// snap_tol of a face are moved onto it first.
inline ExitClassification classify_exit(const ManeuverAutomaton& ma, PrimitiveId m, const Vector& z,
                                        double snap_tol) {
  const auto parts = ma.decode(m);
  auto blocks = ma.split_state(z);
  ExitClassification out;
  out.sigma.assign(ma.p(), 0);
  for (std::size_t j = 0; j < parts.size(); ++j) {
    const auto& c = ma.component(j);
    Vector zj = blocks[j];
    for (std::size_t i = 0; i < c.p(); ++i) {
      double& y = zj[c.output_index()[i]];
      if (std::abs(y) <= snap_tol) y = 0.0;
      if (std::abs(y - c.box().d[i]) <= snap_tol) y = c.box().d[i];
    }
    std::vector<Label> hits;
    for (const auto& s : c.sigma(parts[j])) {
      if (c.guard_region(parts[j], s).contains(zj)) hits.push_back(s);
    }
    if (hits.size() > 1) {
      out.kind = ExitKind::ambiguous;
      out.detail = "component " + std::to_string(j) + " lies in guards " + label_to_string(hits[0]) + " and " +
                   label_to_string(hits[1]);
      return out;
    }
    if (hits.empty()) {
      bool beyond = false;
      for (std::size_t i = 0; i < c.p(); ++i) {
        const double y = zj[c.output_index()[i]];
        beyond = beyond || y < 0.0 || y > c.box().d[i];
      }
      if (beyond || !c.primitives()[parts[j]].invariant.hull_contains(zj, snap_tol)) {
        out.detail = "component " + std::to_string(j) + " left its invariant outside every guard";
        return out;
      }
      continue;
    }
    for (std::size_t i = 0; i < c.p(); ++i) out.sigma[ma.output_offset(j) + i] = hits[0][i];
  }
  if (is_epsilon(out.sigma)) {
    out.detail = "output left the box but no guard holds the state";
    return out;
  }
  out.kind = ExitKind::guard;
  return out;
}

// True when some canonical output coordinate is strictly outside [0, d_i].
inline bool outside_box(const ManeuverAutomaton& ma, const Vector& z) {
  const auto& o = ma.output_index();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double y = z[o[i]];
    if (y < 0.0 || y > ma.box().d[i]) return true;
  }
  return false;
}

struct StepOutcome {
  bool crossed = false;
  double h = 0.0;  // time actually advanced
};

// Advances the canonical state z by h (in place), cutting the step short at
// the first face crossing, located by bisection to time_tol. On a crossing z
// ends just past the face.
inline StepOutcome advance(const AffineFlow& flow, const std::vector<std::size_t>& parts, Vector& z, double h,
                           const SimConfig& cfg, Vector& scratch) {
  const auto& ma = flow.ma();
  if (h == flow.h()) {
    flow.step(parts, z, scratch);
  } else {
    flow.rk4(parts, z, h, scratch);
  }
  if (!outside_box(ma, scratch)) {
    z.swap(scratch);
    return {false, h};
  }
  double lo = 0.0, hi = h;
  Vector x_hi = scratch;
  while (hi - lo > cfg.time_tol) {
    const double mid = 0.5 * (lo + hi);
    flow.rk4(parts, z, mid, scratch);
    if (outside_box(ma, scratch)) {
      hi = mid;
      x_hi = scratch;
    } else {
      lo = mid;
    }
  }
  z = std::move(x_hi);
  return {true, hi};
}

enum class FlowOutcome { exited, stayed, invariant_exit, ambiguous, budget };

struct FlowResult {
  FlowOutcome outcome = FlowOutcome::stayed;
  double time = 0.0;
  Label sigma;
  Vector state;
  std::string detail;
  std::uint64_t steps = 0;
};

// Integrates primitive m from canonical state x0 until it leaves the box or
// t_max passes, checking the invariant hull along the way.
inline FlowResult flow_until_exit(const AffineFlow& flow, PrimitiveId m, Vector x0, double t_max,
                                  const SimConfig& cfg, std::uint64_t step_budget) {
  const auto& ma = flow.ma();
  FlowResult r;
  const auto parts = ma.decode(m);
  double t = 0.0;
  Vector x = std::move(x0);
  Vector scratch;
  while (t < t_max) {
    if (r.steps++ >= step_budget) {
      r.outcome = FlowOutcome::budget;
      r.time = t;
      r.state = x;
      return r;
    }
    const double h = std::min(flow.h(), t_max - t);
    const StepOutcome s = advance(flow, parts, x, h, cfg, scratch);
    t += s.h;
    if (s.crossed) {
      const auto cls = classify_exit(ma, m, x, cfg.snap_tol);
      r.time = t;
      r.state = x;
      r.sigma = cls.sigma;
      r.detail = cls.detail;
      r.outcome = cls.kind == ExitKind::guard       ? FlowOutcome::exited
                  : cls.kind == ExitKind::ambiguous ? FlowOutcome::ambiguous
                                                    : FlowOutcome::invariant_exit;
      return r;
    }
    std::size_t bad = 0;
    if (!flow.hull_contains(parts, x, cfg.hull_tol, &bad)) {
      r.outcome = FlowOutcome::invariant_exit;
      r.time = t;
      r.state = x;
      r.detail = "left the invariant of component " + std::to_string(bad) + " away from the box faces";
      return r;
    }
  }
  r.outcome = FlowOutcome::stayed;
  r.time = t;
  r.state = x;
  return r;
}

}  // namespace hybridplan
