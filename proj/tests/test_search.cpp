#include <gtest/gtest.h>

#include <random>

#include "hybridplan/chain.hpp"
#include "hybridplan/composition.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace hybridplan;

namespace {

GridSpec channel_grid() {
  GridSpec g;
  g.counts = {5, 2, 1};
  g.d = {1.0, 1.0, 1.0};
  g.obstacles = {{2, 1, 0}};
  g.starts = {{0, 0, 0}, {4, 0, 0}, {2, 0, 0}};
  g.goals = {{4, 0, 0}, {0, 0, 0}, {2, 0, 0}};
  return g;
}

std::vector<std::vector<Box>> channel_stages() {
  return {{{4, 0, 0}, {0, 0, 0}, {2, 0, 0}}, {{0, 0, 0}, {4, 0, 0}, {2, 0, 0}}};
}

// Checks a path: safe boxes, single-axis unit steps, endpoints.
void expect_valid_path(const Workspace& ws, const PlanResult& r) {
  ASSERT_FALSE(r.path.empty());
  EXPECT_EQ(r.path.front(), ws.start_location());
  EXPECT_EQ(r.path.back(), ws.goal_location());
  for (std::size_t i = 0; i < r.path.size(); ++i) {
    EXPECT_TRUE(ws.joint_location_safe(r.path[i]));
    if (i) {
      EXPECT_EQ(manhattan(r.path[i - 1], r.path[i]), 1);
    }
  }
}

// The policy along the path is a PA run: valid states, automaton edges.
void expect_policy_run(const Workspace& ws, const ManeuverAutomaton& ma, const PlanResult& r) {
  ProductView view(ws, ma);
  for (std::size_t i = 0; i + 1 < r.path.size(); ++i) {
    const ProductState q{ws.encode(r.path[i]), r.path_primitives[i]};
    EXPECT_TRUE(view.state_valid(r.path[i], q.primitive));
    Label s(ws.p());
    for (std::size_t o = 0; o < s.size(); ++o) s[o] = r.path[i + 1][o] - r.path[i][o];
    EXPECT_EQ(ma.sigma(q.primitive), std::vector<Label>{s});
    const auto next = r.policy.next(q, s);
    ASSERT_TRUE(next.has_value());
    EXPECT_EQ(*next, r.path_primitives[i + 1]);
    EXPECT_TRUE(ma.has_edge(q.primitive, s, *next));
  }
}

}  // namespace

TEST(AStar, StartEqualsGoal) {
  GridSpec g;
  g.counts = {3, 3};
  g.d = {1.0, 1.0};
  g.starts = {{1, 1}};
  g.goals = {{1, 1}};
  Workspace ws(g);
  auto ma = compose_n(build_double_integrator_ma(1.0, 1.0), 2);
  const auto r = astar_plan(ws, ma);
  ASSERT_TRUE(r.success);
  EXPECT_EQ(r.path.size(), 1u);
  EXPECT_EQ(r.path_primitives, std::vector<PrimitiveId>{PrunedMoves(ma).hold()});
  EXPECT_TRUE(r.policy.covers({ws.encode({1, 1}), PrunedMoves(ma).hold()}));
}

TEST(AStar, MatchesBfsOnRandomGrids) {
  std::mt19937_64 rng(99);
  auto di = build_double_integrator_ma(1.0, 1.0);
  int solved = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Workspace ws(fixture::random_grid(rng, trial));
    auto ma = compose_n(di, ws.p());
    const int want = oracle::bfs_distance(ws);
    const auto r = astar_plan(ws, ma);
    if (want < 0) {
      EXPECT_FALSE(r.success) << "trial " << trial;
      continue;
    }
    ASSERT_TRUE(r.success) << "trial " << trial;
    EXPECT_EQ(static_cast<int>(r.path.size()) - 1, want) << "trial " << trial;
    expect_valid_path(ws, r);
    expect_policy_run(ws, ma, r);
    ++solved;
  }
  EXPECT_GT(solved, 50);
}

TEST(Greedy, OpenGridSingleVehicle) {
  GridSpec g;
  g.counts = {6, 5, 2};
  g.d = {1.0, 1.0, 1.0};
  g.starts = {{0, 0, 0}};
  g.goals = {{5, 4, 1}};
  Workspace ws(g);
  auto ma = compose_n(build_double_integrator_ma(1.0, 1.0), 3);
  const auto r = greedy_plan(ws, ma);
  ASSERT_TRUE(r.success);
  EXPECT_EQ(r.path.size(), 11u);
  expect_valid_path(ws, r);
  expect_policy_run(ws, ma, r);
  // Axis order: x first.
  EXPECT_EQ(r.path[1], (Location{1, 0, 0}));
  for (std::size_t i = 1; i < r.path.size(); ++i) {
    EXPECT_LT(manhattan(r.path[i], ws.goal_location()), manhattan(r.path[i - 1], ws.goal_location()));
  }
}

TEST(Greedy, FailsInChannel) {
  Workspace ws(channel_grid());
  auto ma = compose_n(build_double_integrator_ma(1.0, 1.0), 9);
  const auto r = greedy_plan(ws, ma);
  EXPECT_FALSE(r.success);
  EXPECT_FALSE(r.message.empty());
}

TEST(Chain, ChannelLoop) {
  Workspace ws(channel_grid());
  auto ma = compose_n(build_double_integrator_ma(1.0, 1.0), 9);
  const auto stages = channel_stages();
  for (const std::string algo : {"ndd", "astar"}) {
    const auto r = chain_specs(ws, ma, stages, ChainMode::loop, algo);
    ASSERT_TRUE(r.success) << algo << ": " << r.message;
    ASSERT_EQ(r.stages.size(), 2u);
  }
  const auto g = chain_specs(ws, ma, stages, ChainMode::loop, "greedy");
  EXPECT_FALSE(g.success);
  EXPECT_TRUE(g.failed_stage.has_value());
}

TEST(Chain, AStarStagesHandOver) {
  Workspace ws(channel_grid());
  auto ma = compose_n(build_double_integrator_ma(1.0, 1.0), 9);
  const auto r = chain_specs(ws, ma, channel_stages(), ChainMode::loop, "astar");
  ASSERT_TRUE(r.success);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto sw = stage_workspace(ws, channel_stages(), i);
    expect_valid_path(sw, r.stages[i]);
    expect_policy_run(sw, ma, r.stages[i]);
    // The last primitive of stage i is the first of the other stage.
    EXPECT_EQ(r.stages[i].path_primitives.back(), r.stages[1 - i].path_primitives.front());
  }
}

TEST(Chain, NddFinalSetsAreNextInitialSets) {
  Workspace ws(channel_grid());
  auto ma = compose_n(build_double_integrator_ma(1.0, 1.0), 9);
  const auto r = chain_specs(ws, ma, channel_stages(), ChainMode::loop, "ndd");
  ASSERT_TRUE(r.success);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto sw = stage_workspace(ws, channel_stages(), i);
    for (const auto& [q, a] : r.stages[i].policy.table) {
      if (!a.empty() || !sw.is_goal(sw.decode(q.location))) continue;
      // A final state of stage i: it must carry a value in stage 1 - i.
      EXPECT_TRUE(r.stages[1 - i].value.count(q)) << "stage " << i;
    }
  }
}

TEST(Chain, SingleStageEqualsPlainPlanning) {
  GridSpec g;
  g.counts = {5, 4};
  g.d = {1.0, 1.0};
  g.obstacles = {{1, 1}, {1, 2}, {3, 0}, {3, 1}, {3, 2}};
  g.starts = {{0, 0}};
  g.goals = {{4, 0}};
  Workspace ws(g);
  auto ma = compose_n(build_double_integrator_ma(1.0, 1.0), 2);
  const auto c = chain_specs(ws, ma, {g.goals}, ChainMode::once, "ndd");
  const auto p = plan_ndd(ws, ma);
  ASSERT_TRUE(c.success);
  EXPECT_EQ(c.stages[0].value, p.value);
  EXPECT_EQ(c.stages[0].policy, p.policy);
  const auto a = chain_specs(ws, ma, {g.goals}, ChainMode::once, "astar");
  EXPECT_EQ(a.stages[0].path, astar_plan(ws, ma).path);
}

TEST(Chain, UnreachableStageReportsIndex) {
  GridSpec g;
  g.counts = {5, 1};
  g.d = {1.0, 1.0};
  g.obstacles = {{2, 0}};
  g.starts = {{0, 0}};
  g.goals = {{1, 0}};
  Workspace ws(g);
  auto ma = compose_n(build_double_integrator_ma(1.0, 1.0), 2);
  const std::vector<std::vector<Box>> stages{{{1, 0}}, {{4, 0}}};
  for (const std::string algo : {"ndd", "astar"}) {
    const auto r = chain_specs(ws, ma, stages, ChainMode::once, algo);
    EXPECT_FALSE(r.success) << algo;
    EXPECT_EQ(r.failed_stage, std::optional<std::size_t>(algo == "ndd" ? 0 : 1)) << algo;
  }
}
