#include <gtest/gtest.h>

#include <random>
#include <set>

#include "hybridplan/assumptions.hpp"
#include "hybridplan/ma_core.hpp"

using namespace hybridplan;

namespace {

const std::size_t H = 0, F = 1, B = 2;

// Replaces the edges (and optionally primitives) of the double integrator.
std::shared_ptr<const AtomicMA> di_variant(const DoubleIntegratorParams& prm, std::vector<MAEdge> edges,
                                           std::vector<MotionPrimitive> prims = {}) {
  if (prims.empty()) prims = double_integrator_primitives(prm);
  return std::make_shared<const AtomicMA>("variant", di_A(), di_B(), std::vector<std::size_t>{0},
                                          BoxGeometry({prm.d}), std::move(prims), std::move(edges));
}

std::vector<MAEdge> di_edges(const DoubleIntegratorParams& prm) {
  const auto fg = di_forward_guard(prm);
  const auto bg = di_backward_guard(prm);
  return {{F, {1}, H, fg}, {F, {1}, F, fg}, {B, {-1}, H, bg}, {B, {-1}, B, bg}};
}

}  // namespace

TEST(FaceOfLabel, Examples) {
  auto full = face_of_label({0, 0}, BoxGeometry({1, 1}));
  EXPECT_TRUE(full.contains({0, 0}));
  EXPECT_TRUE(full.contains({1, 1}));
  EXPECT_TRUE(full.contains({0.3, 0.8}));
  EXPECT_FALSE(full.contains({1.2, 0.5}));

  auto right = face_of_label({1}, BoxGeometry({2.5}));
  EXPECT_TRUE(right.contains({2.5}));
  EXPECT_FALSE(right.contains({2.4}));

  auto corner = face_of_label({1, -1}, BoxGeometry({1, 2}));
  EXPECT_TRUE(corner.contains({1, 0}));
  EXPECT_FALSE(corner.contains({1, 0.1}));
  EXPECT_FALSE(corner.contains({0.9, 0}));

  EXPECT_THROW(face_of_label({1}, BoxGeometry({1, 1})), std::invalid_argument);
}

TEST(ApplyReset, Examples) {
  auto di = build_double_integrator_atomic({1.0, 1.0});
  const auto& e = di->edges()[1];
  Vector r = apply_reset(*di, e, {1.0, 0.7});
  EXPECT_DOUBLE_EQ(r[0], 0.0);
  EXPECT_DOUBLE_EQ(r[1], 0.7);
  EXPECT_EQ(di->apply_reset({0}, {0.4, 0.2}), (Vector{0.4, 0.2}));
  EXPECT_THROW(apply_reset(*di, e, {0.5, 0.7}, true), std::domain_error);

  // Two axes with d=(1,2): outputs (1,0) shift to (0,2).
  auto a = build_double_integrator_atomic({1.0, 1.0});
  auto b = build_double_integrator_atomic({2.0, 1.0});
  auto ma = ManeuverAutomaton::compose(ManeuverAutomaton(a), ManeuverAutomaton(b));
  Vector x = ma.apply_reset({1, -1}, {1.0, 0.3, 0.0, -0.4});
  EXPECT_DOUBLE_EQ(x[0], 0.0);
  EXPECT_DOUBLE_EQ(x[1], 0.3);
  EXPECT_DOUBLE_EQ(x[2], 2.0);
  EXPECT_DOUBLE_EQ(x[3], -0.4);
}

TEST(SigmaMa, DoubleIntegrator) {
  auto ma = build_double_integrator_ma(1.0, 1.0);
  EXPECT_TRUE(sigma_ma(ma, H).empty());
  EXPECT_EQ(sigma_ma(ma, F), (std::vector<Label>{{1}}));
  EXPECT_EQ(sigma_ma(ma, B), (std::vector<Label>{{-1}}));
  EXPECT_THROW(sigma_ma(ma, 3), std::out_of_range);
}

TEST(ClosedLoopField, Examples) {
  auto ma = build_double_integrator_ma(1.0, 1.0);
  Vector dh = closed_loop_field(ma, H, {0.5, 0.0});
  EXPECT_DOUBLE_EQ(dh[0], 0.0);
  EXPECT_DOUBLE_EQ(dh[1], 0.0);
  const double ub = 1.0;
  Vector df = closed_loop_field(ma, F, {0.0, ub});
  EXPECT_DOUBLE_EQ(df[0], ub);
  EXPECT_DOUBLE_EQ(df[1], -1.0);
  Vector dz = closed_loop_field(ma, F, {0.3, 0.0});
  EXPECT_DOUBLE_EQ(dz[0], 0.0);
  EXPECT_DOUBLE_EQ(dz[1], 1.0);
}

TEST(DoubleIntegratorBuilder, GeometryMatchesVertices) {
  EXPECT_DOUBLE_EQ((DoubleIntegratorParams{4.0, 1.0}.u_bar()), 2.0);
  EXPECT_THROW(build_double_integrator_ma(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(build_double_integrator_ma(1.0, -1.0), std::invalid_argument);

  auto di = build_double_integrator_atomic({1.0, 1.0});
  EXPECT_EQ(di->n(), 2u);
  EXPECT_EQ(di->p(), 1u);
  EXPECT_EQ(di->edges().size(), 4u);
  const auto& ih = di->primitives()[H].invariant;
  for (Vector v : {Vector{0, 1}, Vector{1, -1}, Vector{0.5, 0}, Vector{0, 0.5}}) EXPECT_TRUE(ih.contains(v));
  EXPECT_FALSE(ih.contains({0, 0}));
  EXPECT_FALSE(ih.contains({1, 0}));
  EXPECT_FALSE(ih.contains({1, 0.5}));
  EXPECT_FALSE(ih.contains({0, -0.5}));
  const auto& iff = di->primitives()[F].invariant;
  EXPECT_TRUE(iff.contains({1, 1}));
  EXPECT_TRUE(iff.contains({0.5, 1}));
  EXPECT_FALSE(iff.contains({0, -0.1}));
  const auto& ib = di->primitives()[B].invariant;
  EXPECT_TRUE(ib.contains({0, -1}));
  EXPECT_FALSE(ib.contains({1, 0.1}));

  const auto& g = di->edges()[1].guard;  // (F,1,F)
  EXPECT_TRUE(g.contains({1, 1}));
  EXPECT_TRUE(g.contains({1, 1e-6}));
  EXPECT_FALSE(g.contains({1, 0}));
  EXPECT_FALSE(g.contains({1, -0.5}));
  for (const auto& prim : di->primitives()) EXPECT_TRUE(prim.invariant.bounded());
}

TEST(DoubleIntegratorBuilder, GuardsLieOnFacesAndInInvariants) {
  for (double d : {1.0, 0.5, 3.0}) {
    auto di = build_double_integrator_atomic({d, 2.0});
    for (const auto& e : di->edges()) {
      Region g = e.guard.to_region();
      EXPECT_TRUE(g.subset_of(di->invariant_region(e.source)));
      // Lift the output face into state space.
      auto face = face_of_label(e.sigma, di->box());
      std::vector<Halfspace> lifted;
      for (const auto& h : face.halfspaces()) lifted.push_back(Halfspace{{h.normal[0], 0.0}, h.offset, h.strict});
      EXPECT_TRUE(g.subset_of(Region(ConvexPiece(2, lifted))));
      EXPECT_TRUE(g.translated(-1.0 * di->label_shift(e.sigma)).subset_of(di->invariant_region(e.target)));
    }
  }
}

TEST(InnerInvariant, Examples) {
  auto di = build_double_integrator_atomic({1.0, 1.0});
  EXPECT_TRUE(di->inner_invariant(H).same_set(di->invariant_region(H)));
  auto expect_f = di->invariant_region(F).subtract(di_forward_guard({1.0, 1.0}).to_region());
  EXPECT_TRUE(di->inner_invariant(F).same_set(expect_f));
  EXPECT_FALSE(di->inner_invariant(F).contains({1, 0.5}));
  EXPECT_TRUE(di->inner_invariant(F).contains({1, -0.5}));
  EXPECT_FALSE(di->inner_invariant(B).contains({0, -0.5}));
  EXPECT_TRUE(di->inner_invariant(B).contains({0, 0.5}));
}

TEST(AugmentedEdges, DoubleIntegratorEdgeList) {
  auto di = build_double_integrator_atomic({1.0, 1.0});
  std::set<AugmentedEdge> got(di->augmented_edges().begin(), di->augmented_edges().end());
  std::set<AugmentedEdge> want{{F, {1}, H}, {F, {1}, F}, {B, {-1}, H}, {B, {-1}, B}, {H, {0}, H},
                               {F, {0}, F}, {B, {0}, B}, {H, {0}, F}, {H, {0}, B}};
  EXPECT_EQ(got, want);
}

TEST(AugmentedEdges, SinglePrimitiveWithoutEdges) {
  std::vector<MotionPrimitive> prims{double_integrator_primitives({1.0, 1.0})[0]};
  auto a = di_variant({1.0, 1.0}, {}, prims);
  ASSERT_EQ(a->augmented_edges().size(), 1u);
  EXPECT_EQ(a->augmented_edges()[0], (AugmentedEdge{0, {0}, 0}));
}

TEST(AugmentedEdges, HoldOverlappingForwardGuardIsNotAdmitted) {
  DoubleIntegratorParams prm{1.0, 1.0};
  auto prims = double_integrator_primitives(prm);
  // Hold now shares the forward invariant, which touches F's exit guard.
  prims[H].invariant = prims[F].invariant;
  auto a = di_variant(prm, di_edges(prm), prims);
  std::set<AugmentedEdge> got(a->augmented_edges().begin(), a->augmented_edges().end());
  EXPECT_EQ(got.count({H, {0}, F}), 0u);
  EXPECT_EQ(got.count({H, {0}, H}), 1u);
}

TEST(Assumptions, DoubleIntegratorPasses) {
  auto ma = build_double_integrator_ma(1.0, 1.0);
  SimConfig cfg;
  cfg.samples = 1000;
  auto rep = check_ma_assumptions(ma, cfg);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(rep.conditions[i].status, CheckStatus::pass) << condition_name(i);
  EXPECT_EQ(rep.conditions[5].status, CheckStatus::sampled_pass);
  EXPECT_EQ(rep.conditions[6].status, CheckStatus::sampled_pass);
  EXPECT_GE(rep.conditions[5].checked, 1000u);
  EXPECT_GE(rep.conditions[6].checked, 2000u);
  EXPECT_TRUE(rep.ok());
}

TEST(Assumptions, EpsilonEdgeFailsFirstCondition) {
  DoubleIntegratorParams prm{1.0, 1.0};
  auto edges = di_edges(prm);
  edges.push_back({H, {0}, F, double_integrator_primitives(prm)[H].invariant});
  auto ma = ManeuverAutomaton(di_variant(prm, edges));
  SimConfig cfg;
  cfg.samples = 50;
  auto rep = check_ma_assumptions(ma, cfg);
  EXPECT_EQ(rep.conditions[0].status, CheckStatus::fail);
  EXPECT_FALSE(rep.conditions[0].witnesses.empty());
}

TEST(Assumptions, WidenedForwardGuardFails) {
  DoubleIntegratorParams prm{1.0, 1.0};
  auto edges = di_edges(prm);
  // (F,1,F) now includes (d,0).
  edges[1].guard = PolytopicSet::hull_2d({{1.0, 0.0}, {1.0, 1.0}});
  auto ma = ManeuverAutomaton(di_variant(prm, edges));
  SimConfig cfg;
  cfg.samples = 50;
  auto rep = check_ma_assumptions(ma, cfg);
  EXPECT_TRUE(rep.conditions[3].status == CheckStatus::fail || rep.conditions[4].status == CheckStatus::fail);
  EXPECT_EQ(rep.conditions[4].status, CheckStatus::fail);
}

TEST(Assumptions, ScalingPreservesVerdicts) {
  for (auto [d, u] : std::vector<std::pair<double, double>>{{1, 1}, {4, 1}, {0.25, 4}, {2, 0.5}}) {
    auto ma = build_double_integrator_ma(d, u);
    SimConfig cfg;
    cfg.samples = 200;
    auto rep = check_ma_assumptions(ma, cfg);
    EXPECT_TRUE(rep.ok()) << "d=" << d << " u=" << u;
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(rep.conditions[i].status, CheckStatus::pass);
  }
}

TEST(Flows, RandomForwardStartsExitThroughGuard) {
  auto ma = build_double_integrator_ma(1.0, 1.0);
  SimConfig cfg = resolve_sim_config(ma, {});
  const auto& inv = ma.component(0).primitives()[F].invariant;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uv(-1.0, 1.0);
  int n = 0;
  while (n < 1000) {
    Vector x{ux(rng), uv(rng)};
    if (!inv.contains(x)) continue;
    ++n;
    auto r = flow_until_exit(AffineFlow(ma, cfg.dt), F, x, cfg.t_max, cfg, 1'000'000);
    ASSERT_EQ(r.outcome, FlowOutcome::exited);
    EXPECT_EQ(r.sigma, (Label{1}));
    EXPECT_NEAR(r.state[0], 1.0, 1e-7);
    EXPECT_GT(r.state[1], 0.0);
    EXPECT_LE(r.state[1], 1.0 + 1e-9);
  }
}

TEST(Flows, RandomHoldStartsStayInside) {
  auto ma = build_double_integrator_ma(1.0, 1.0);
  SimConfig cfg = resolve_sim_config(ma, {});
  const auto& inv = ma.component(0).primitives()[H].invariant;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uv(-1.0, 1.0);
  int n = 0;
  while (n < 1000) {
    Vector x{ux(rng), uv(rng)};
    if (!inv.contains(x)) continue;
    ++n;
    auto r = flow_until_exit(AffineFlow(ma, cfg.dt), H, x, cfg.t_max, cfg, 1'000'000);
    ASSERT_EQ(r.outcome, FlowOutcome::stayed);
    EXPECT_NEAR(r.state[0], 0.5, 1e-3);
  }
}

TEST(Flows, AffineStepMatchesReferenceRk4) {
  auto ma = ManeuverAutomaton::compose(build_double_integrator_ma(1.0, 1.0), build_double_integrator_ma(2.0, 0.5));
  AffineFlow flow(ma, 0.01);
  const Vector shift(4, 0.0);
  for (PrimitiveId m = 0; m < ma.num_primitives(); ++m) {
    const auto parts = ma.decode(m);
    Vector z{0.3, 0.2, 1.1, -0.4}, a, b;
    flow.step(parts, z, a);
    flow.rk4(parts, z, 0.01, b);
    Vector ref = rk4_step(ma, m, z, shift, 0.01);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(a[i], ref[i], 1e-14);
      EXPECT_NEAR(b[i], ref[i], 1e-14);
    }
  }
}
