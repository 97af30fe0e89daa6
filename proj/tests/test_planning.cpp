#include <gtest/gtest.h>

#include <random>

#include "hybridplan/composition.hpp"
#include "hybridplan/planning.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace hybridplan;

using fixture::B;
using fixture::F;
using fixture::H;
using fixture::policy_c1;
using fixture::three_box;

TEST(CostToGo, ThreeBoxPolicyC1) {
  const auto t = three_box();
  EXPECT_EQ(t.pa.num_states(), 7u);
  const auto pol = to_indexed_policy(t.pa, policy_c1(t));
  const auto j = cost_to_go_all(t.pa, pol);
  EXPECT_EQ(j[t.q1], 2.0);
  EXPECT_EQ(j[t.q3], 1.0);
  EXPECT_EQ(j[t.q5], 3.0);
  EXPECT_EQ(j[t.q7], 0.0);
  EXPECT_EQ(j[t.q2], kInf);
  EXPECT_EQ(j[t.q4], kInf);
  EXPECT_EQ(j[t.q6], kInf);
  EXPECT_EQ(cost_to_go(t.pa, pol, {}, t.q5), 3.0);
  EXPECT_EQ(initial_state_set(t.pa, pol), (std::vector<std::uint32_t>{t.q1, t.q3, t.q5, t.q7}));
}

TEST(CostToGo, OffGoalCycleIsInfinite) {
  auto t = three_box();
  // With q7 no longer final, c1 cycles q1 -> q3 -> q7 -> q5 -> q1.
  ControlPolicy c = policy_c1(t);
  t.pa.final[t.q7] = 0;
  t.pa.final[t.q6] = 1;
  const auto j = cost_to_go_all(t.pa, to_indexed_policy(t.pa, c));
  EXPECT_EQ(j[t.q1], kInf);
  EXPECT_EQ(j[t.q5], kInf);
  EXPECT_EQ(j[t.q6], 0.0);
}

TEST(CostToGo, UncoveredIsAnError) {
  const auto t = three_box();
  ControlPolicy c = policy_c1(t);
  c.table.erase(t.pa.state(t.q3));
  const auto pol = to_indexed_policy(t.pa, c);
  EXPECT_THROW(cost_to_go(t.pa, pol, {}, t.q1), UncoveredStateError);
  EXPECT_EQ(cost_to_go(t.pa, pol, {}, t.q7), 0.0);
}

TEST(CostToGo, TerminalCostOnGoal) {
  const auto t = three_box();
  CostModel c;
  c.terminal.assign(t.pa.num_states(), 0.0);
  c.terminal[t.q7] = 2.5;
  const auto pol = to_indexed_policy(t.pa, policy_c1(t));
  EXPECT_EQ(cost_to_go(t.pa, pol, c, t.q7), 2.5);
  EXPECT_EQ(cost_to_go(t.pa, pol, c, t.q3), 3.5);
}

TEST(Policy, RejectsInadmissibleChoice) {
  const auto t = three_box();
  ControlPolicy c;
  c.table[t.pa.state(t.q3)] = {{{1}, F}};  // F is not valid on the last box
  EXPECT_THROW(to_indexed_policy(t.pa, c), std::invalid_argument);
  c.table[t.pa.state(t.q3)] = {{{-1}, H}};
  EXPECT_THROW(to_indexed_policy(t.pa, c), std::invalid_argument);
}

TEST(Ndd, ThreeBoxValues) {
  const auto t = three_box();
  const auto v = ndd_value(t.pa);
  EXPECT_EQ(v[t.q7], 0.0);
  EXPECT_EQ(v[t.q3], 1.0);
  EXPECT_EQ(v, oracle::exhaustive_policy_value(t.pa, {}));
  const auto pol = extract_optimal_policy(t.pa, v);
  EXPECT_EQ(cost_to_go_all(t.pa, pol), v);
}

TEST(Ndd, EmptyGoalSet) {
  auto t = three_box();
  std::fill(t.pa.final.begin(), t.pa.final.end(), 0);
  const auto v = ndd_value(t.pa);
  for (double x : v) EXPECT_EQ(x, kInf);
  EXPECT_TRUE(initial_state_set(t.pa, extract_optimal_policy(t.pa, v)).empty());
}

TEST(Ndd, MatchesExhaustivePolicyOracle) {
  std::mt19937_64 rng(2024);
  oracle::RandomPaParams prm;
  prm.max_policies = 4096;
  std::uint64_t policies = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto [pa, cost] = oracle::random_pa(rng, prm);
    const auto v = ndd_value(pa, cost);
    std::uint64_t n = 0;
    ASSERT_EQ(v, oracle::exhaustive_policy_value(pa, cost, &n)) << "trial " << trial;
    policies += n;
    ASSERT_EQ(v, oracle::value_iteration(pa, cost, oracle::apply_max_min)) << "trial " << trial;
    ASSERT_EQ(v, oracle::value_iteration(pa, cost, oracle::apply_min_max)) << "trial " << trial;
    const auto pol = extract_optimal_policy(pa, v, cost);
    const auto j = cost_to_go_all(pa, pol, cost);
    for (std::size_t q = 0; q < pa.num_states(); ++q) {
      if (v[q] < kInf) {
        ASSERT_EQ(j[q], v[q]) << "trial " << trial << " state " << q;
      }
    }
  }
  EXPECT_GT(policies, 200u);
}

TEST(Ndd, BothDppFormsAgreeOnUntrimmedProducts) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto [pa, cost] = oracle::random_pa(rng, {});
    const auto v = ndd_value(pa, cost);
    ASSERT_EQ(v, oracle::value_iteration(pa, cost, oracle::apply_max_min));
    ASSERT_EQ(v, oracle::value_iteration(pa, cost, oracle::apply_min_max));
    // Fixed point of the operator.
    for (std::size_t i = 0; i < pa.num_states(); ++i) ASSERT_EQ(oracle::apply_max_min(pa, cost, v, i), v[i]);
    const auto pol = extract_optimal_policy(pa, v, cost);
    std::vector<std::uint32_t> finite;
    for (std::uint32_t q = 0; q < pa.num_states(); ++q) {
      if (v[q] < kInf) finite.push_back(q);
    }
    EXPECT_EQ(initial_state_set(pa, pol, cost), finite);
  }
}

TEST(Ndd, SettlesEachStateOnce) {
  std::mt19937_64 rng(5);
  const auto [pa, cost] = oracle::random_pa(rng, {});
  NddStats st;
  const auto v = ndd_value(pa, cost, &st);
  std::uint64_t finite = 0;
  for (double x : v) finite += x < kInf;
  EXPECT_EQ(st.expanded, finite);
}

TEST(Ndd, PolicyPicksValueOptimalSuccessor) {
  auto t = three_box();
  // From q1 under label 1 the successors are H, F and B on l2; only F has
  // the finite value 1.
  const auto v = ndd_value(t.pa);
  const auto pol = extract_optimal_policy(t.pa, v);
  const auto g = *t.pa.group_of(t.q1, label_code({1}));
  EXPECT_EQ(t.pa.primitive[t.pa.succ[pol.choice[g]]], F);
}

TEST(PlanNdd, Fig3Pair) {
  GridSpec g;
  g.counts = {5, 4};
  g.d = {1.0, 1.0};
  g.obstacles = {{1, 1}, {1, 2}, {3, 0}, {3, 1}, {3, 2}};
  g.starts = {{0, 0}};
  g.goals = {{4, 0}};
  Workspace ws(g);
  auto ma = compose_n(build_double_integrator_ma(1.0, 1.0), 2);
  const auto r = plan_ndd(ws, ma);
  ASSERT_TRUE(r.success) << r.message;
  const auto q0 = best_start_state(r, ws.encode({0, 0}));
  ASSERT_TRUE(q0.has_value());
  EXPECT_TRUE(r.policy.covers(*q0));
  EXPECT_EQ(r.initial.size(), r.value.size());
  // Every policy entry is an automaton edge.
  for (const auto& [q, a] : r.policy.table) {
    for (const auto& [s, m] : a) EXPECT_TRUE(ma.has_edge(q.primitive, s, m));
  }
  // Label cost overrides change values but not feasibility.
  NddOptions opt;
  opt.label_costs[{1, 1}] = 3.0;
  const auto r2 = plan_ndd(ws, ma, opt);
  EXPECT_EQ(r2.initial, r.initial);
}
