// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Time budgets are wall-clock limits on this binary's own work.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "fixtures.hpp"
#include "hybridplan/assumptions.hpp"
#include "hybridplan/cli.hpp"
#include "oracles.hpp"

using namespace hybridplan;

namespace {

const std::filesystem::path kScenarios = HYBRIDPLAN_SCENARIO_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome(std::ostringstream&)> run;
};

int cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "hybridplan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::filesystem::path scratch(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / ("hybridplan_accept_" + name);
  std::filesystem::remove_all(d);
  return d;
}

std::string scn(const std::string& name) { return (kScenarios / (name + ".scn")).string(); }

Outcome turnaround_line_costs(std::ostringstream& info) {
  Outcome o;
  const auto t = fixture::three_box();
  const auto j = cost_to_go_all(t.pa, to_indexed_policy(t.pa, fixture::policy_c1(t)));
  o.require(t.pa.num_states() == 7, "expected 7 product states");
  o.require(j[t.q1] == 2.0 && j[t.q5] == 3.0 && j[t.q3] == 1.0 && j[t.q7] == 0.0, "finite costs differ");
  o.require(j[t.q2] == kInf && j[t.q4] == kInf && j[t.q6] == kInf, "uncovered states must cost infinity");
  info << "J(q1,q5,q3,q7) = " << j[t.q1] << "," << j[t.q5] << "," << j[t.q3] << "," << j[t.q7];
  return o;
}

// Criteria 2 and 3 share the random products.
struct RandomPaRun {
  Outcome oracle, optimal;
  std::uint64_t policies = 0, finite = 0;
  int trials = 0;
};

const RandomPaRun& random_pa_run() {
  static const RandomPaRun r = [] {
    RandomPaRun r;
    std::mt19937_64 rng(2024);
    oracle::RandomPaParams prm;
    prm.max_states = 200;
    prm.max_labels = 4;
    prm.max_policies = 4096;
    for (int trial = 0; trial < 200; ++trial, ++r.trials) {
      const auto [pa, cost] = oracle::random_pa(rng, prm);
      const auto tag = "trial " + std::to_string(trial);
      const auto v = ndd_value(pa, cost);
      std::uint64_t n = 0;
      r.oracle.require(v == oracle::exhaustive_policy_value(pa, cost, &n), tag + ": NDD differs from the policy oracle");
      r.policies += n;
      const auto maxmin = oracle::value_iteration(pa, cost, oracle::apply_max_min);
      const auto minmax = oracle::value_iteration(pa, cost, oracle::apply_min_max);
      r.oracle.require(maxmin == minmax, tag + ": min-max and max-min fixed points differ");
      r.oracle.require(v == maxmin, tag + ": NDD differs from the max-min fixed point");
      const auto j = cost_to_go_all(pa, extract_optimal_policy(pa, v, cost), cost);
      for (std::size_t q = 0; q < pa.num_states(); ++q) {
        if (v[q] < kInf) {
          ++r.finite;
          r.optimal.require(j[q] == v[q], tag + ": J(q,c*) != V(q) at state " + std::to_string(q));
        }
      }
    }
    return r;
  }();
  return r;
}

Outcome ndd_oracle(std::ostringstream& info) {
  const auto& r = random_pa_run();
  info << r.trials << " products, " << r.policies << " policies enumerated";
  auto o = r.oracle;
  o.require(r.trials >= 200, "too few products");
  return o;
}

Outcome ndd_policy_optimal(std::ostringstream& info) {
  const auto& r = random_pa_run();
  info << r.finite << " states with finite value";
  return r.optimal;
}

Outcome astar_vs_bfs(std::ostringstream& info) {
  Outcome o;
  std::mt19937_64 rng(99);
  const auto di = build_double_integrator_ma(1.0, 1.0);
  int solved = 0, unsolvable = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Workspace ws(fixture::random_grid(rng, trial));
    const auto ma = compose_n(di, ws.p());
    const int want = oracle::bfs_distance(ws);
    const auto r = astar_plan(ws, ma);
    const auto tag = "trial " + std::to_string(trial);
    if (want < 0) {
      o.require(!r.success, tag + ": A* solved an unreachable instance");
      ++unsolvable;
      continue;
    }
    o.require(r.success, tag + ": A* failed");
    o.require(r.success && static_cast<int>(r.path.size()) - 1 == want, tag + ": cost differs from BFS");
    ++solved;
  }
  info << solved << " solved, " << unsolvable << " unreachable";
  return o;
}

Outcome check_report(const AssumptionReport& rep, std::size_t min_samples, const std::string& tag) {
  Outcome o;
  for (std::size_t i = 0; i < rep.conditions.size(); ++i) {
    const auto& c = rep.conditions[i];
    const bool exact = i < 5;
    o.require(c.status == (exact ? CheckStatus::pass : CheckStatus::sampled_pass),
              tag + " " + condition_name(i) + " " + to_string(c.status) +
                  (c.witnesses.empty() ? "" : ": " + c.witnesses[0]));
    if (!exact) o.require(c.checked >= min_samples, tag + " " + condition_name(i) + " has too few samples");
  }
  return o;
}

Outcome di_conditions(std::ostringstream& info) {
  SimConfig cfg;
  cfg.samples = 1000;
  const auto rep = check_ma_assumptions(build_double_integrator_ma(1.0, 1.0), cfg);
  info << "hold samples " << rep.conditions[5].checked << ", move samples " << rep.conditions[6].checked;
  return check_report(rep, 1000, "DI");
}

Outcome composite_conditions(std::ostringstream& info) {
  Outcome o;
  const auto di = build_double_integrator_ma(1.0, 1.0);
  SimConfig cfg;
  cfg.samples = 1000;
  for (std::size_t k : {2u, 3u}) {
    const auto ma = compose_n(di, k);
    const auto r = check_report(check_ma_assumptions(ma, cfg), 1000, "DI^" + std::to_string(k));
    o.require(r.pass, r.detail);
    std::size_t edges = 0;
    for (const auto& e : ma.enumerate_edges()) {
      ++edges;
      o.require(!is_epsilon(e.sigma), "epsilon label in DI^" + std::to_string(k));
    }
    info << "DI^" << k << " " << edges << " edges; ";
  }
  const auto pair = compose_n(di, 2);
  using fixture::F;
  using fixture::H;
  o.require(pair.has_edge(pair.encode({F, H}), {1, 0}, pair.encode({H, F})), "edge ((F,H),(1,0),(H,F)) missing");
  info << "turn edge present";
  return o;
}

Outcome sampled_reach_avoid(std::ostringstream& info) {
  Outcome o;
  const auto d = scratch("fig3");
  const int code = cli_run({"simulate", scn("fig3"), "--algo", "ndd", "--samples", "200", "--out-dir", d.string()});
  o.require(code == cli::kOk, "simulate exited with " + std::to_string(code));
  if (!std::filesystem::exists(d / "verdicts.json")) {
    o.require(false, "no verdicts.json");
    return o;
  }
  const auto v = json::parse(read_file(d / "verdicts.json"));
  const auto box_count = scenario_workspace(load_scenario(scn("fig3"))).safe_boxes().size();
  o.require(box_count == 15, "fig3 must have 15 safe boxes");
  o.require(v["runs"] == 200 && v["passed"] == 200, "not every run passed");
  o.require(v["invariant_exits"] == 0, "invariant exits reported");
  o.require(v["zeno"] == 0, "Zeno flags reported");
  info << v["passed"].get<int>() << "/" << v["runs"].get<int>() << " pass, " << v["invariant_exits"].get<int>()
       << " invariant exits, " << v["zeno"].get<int>() << " zeno";
  std::filesystem::remove_all(d);
  return o;
}

Outcome scenario_outcomes(std::ostringstream& info) {
  Outcome o;
  auto plan = [](const std::string& name, const std::string& algo) {
    auto sc = load_scenario(scn(name));
    sc.planner.algo = algo;
    const auto ws = scenario_workspace(sc);
    const auto ma = build_scenario_ma(sc);
    const auto t0 = std::chrono::steady_clock::now();
    auto r = cli::detail::plan_scenario(sc, ws, ma).result;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::make_tuple(r, ws, s);
  };
  const auto [ndd, ws_c, t_ndd] = plan("channel", "ndd");
  const auto [astar, ws_c2, t_astar] = plan("channel", "astar");
  const auto [greedy, ws_c3, t_greedy] = plan("channel", "greedy");
  o.require(ndd.success, "channel: NDD failed: " + ndd.message);
  o.require(astar.success, "channel: A* failed: " + astar.message);
  o.require(!greedy.success, "channel: greedy should fail");

  const auto [swap, ws4, t_swap] = plan("open7x7x2_4", "greedy");
  o.require(swap.success, "open7x7x2_4: greedy failed: " + swap.message);
  std::size_t moves = 0;
  if (swap.success) {
    const auto& path = swap.stages.at(0).path;
    o.require(!path.empty() && path.front() == ws4.start_location() && path.back() == ws4.goal_location(),
              "open7x7x2_4: path endpoints");
    for (std::size_t i = 0; i < path.size(); ++i) {
      o.require(ws4.joint_location_safe(path[i]), "open7x7x2_4: collision at step " + std::to_string(i));
      if (i) o.require(manhattan(path[i - 1], path[i]) == 1, "open7x7x2_4: non-unit step " + std::to_string(i));
    }
    moves = path.size() - 1;
    const auto d = scratch("swap");
    o.require(cli_run({"simulate", scn("open7x7x2_4"), "--samples", "4", "--out-dir", d.string()}) == cli::kOk,
              "open7x7x2_4: simulated greedy runs failed");
    std::filesystem::remove_all(d);
  }

  const auto sc8 = load_scenario(scn("puzzle8"));
  o.require(puzzle8_solvable(sc8.grid), "puzzle8 instance is not solvable");
  const auto [p8, ws8, t8] = plan("puzzle8", "astar");
  o.require(p8.success, "puzzle8: A* failed: " + p8.message);
  o.require(t8 < 60.0, "puzzle8: A* over 60 s");
  info << "channel ndd/astar/greedy = " << ndd.success << "/" << astar.success << "/" << greedy.success
       << ", corner swap " << moves << " moves, puzzle8 " << (p8.success ? p8.stages[0].path.size() - 1 : 0)
       << " moves in " << t8 << " s";
  return o;
}

// Small products are built, mid-sized ones have their states counted without
// edges. Otherwise a single vehicle's count w gives the upper bound w^N: a
// joint state is valid only if every vehicle's own part is.
Outcome size_bound(std::ostringstream& info) {
  Outcome o;
  for (const auto* name :
       {"fig3", "fig7", "channel", "open7x7x2_1", "open7x7x2_2", "open7x7x2_4", "puzzle8"}) {
    const auto sc = load_scenario(scn(name));
    const auto ws = scenario_workspace(sc);
    const auto ma = build_scenario_ma(sc);
    unsigned __int128 bound = 1;
    for (std::size_t v = 0; v < ws.vehicles(); ++v) {
      for (int c : sc.grid.counts) bound *= static_cast<unsigned>(c);
    }
    for (std::size_t i = 0; i < ws.p(); ++i) bound *= 3;
    o.require(static_cast<unsigned __int128>(pa_size_bound(ws, ma)) == bound,
              std::string(name) + ": size bound formula mismatch");

    auto one = sc;
    one.grid.starts.resize(1);
    one.grid.goals.resize(1);
    one.chain.reset();
    const auto ws1 = scenario_workspace(one);
    const auto w = count_pa_states(ws1, build_scenario_ma(one));
    unsigned __int128 relaxed = 1;
    for (std::size_t v = 0; v < ws.vehicles(); ++v) relaxed *= w;

    std::string how;
    if (ws.location_space_size() <= 1'000'000) {
      std::uint64_t n = 0;
      if (ws.location_space_size() <= 1'000) {
        n = enumerate_pa(ws, ma).num_states();
        how = std::to_string(n) + " enumerated";
      } else {
        n = count_pa_states(ws, ma);
        how = std::to_string(n) + " counted";
      }
      o.require(n < bound, std::string(name) + ": product exceeds the bound");
      o.require(n <= relaxed, std::string(name) + ": per-vehicle bound violated");
    } else {
      o.require(relaxed < bound, std::string(name) + ": per-vehicle bound not below the size bound");
      how = "<= " + std::to_string(w) + "^" + std::to_string(ws.vehicles());
    }
    info << name << " " << how << "; ";
  }
  return o;
}

Outcome determinism(std::ostringstream& info) {
  Outcome o;
  std::size_t files = 0;
  for (const auto* name : {"fig3", "channel"}) {
    std::vector<std::filesystem::path> dirs{scratch(std::string(name) + "_a"), scratch(std::string(name) + "_b")};
    for (const auto& d : dirs) {
      o.require(cli_run({"plan", scn(name), "--out-dir", d.string()}) == cli::kOk, std::string(name) + ": plan failed");
      o.require(cli_run({"simulate", scn(name), "--samples", "8", "--trace-every", "1", "--out-dir", d.string()}) ==
                    cli::kOk,
                std::string(name) + ": simulate failed");
    }
    std::vector<std::filesystem::path> rel{"policy.json", "verdicts.json"};
    for (const auto& f : std::filesystem::directory_iterator(dirs[0] / "traces")) rel.push_back("traces" / f.path().filename());
    o.require(rel.size() == 10, std::string(name) + ": expected 8 traces");
    for (const auto& r : rel) {
      ++files;
      o.require(std::filesystem::exists(dirs[1] / r) && read_file(dirs[0] / r) == read_file(dirs[1] / r),
                std::string(name) + ": " + r.string() + " differs");
    }
    for (const auto& d : dirs) std::filesystem::remove_all(d);
  }
  info << files << " files compared";
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "turnaround line cost-to-go", 1.0, turnaround_line_costs},
      {2, "NDD equals exhaustive oracle and both DPP forms", 60.0, ndd_oracle},
      {3, "optimal policy attains the value", 60.0, ndd_policy_optimal},
      {4, "A* matches BFS on random grids", 60.0, astar_vs_bfs},
      {5, "double-integrator conditions", 30.0, di_conditions},
      {6, "DI^2 and DI^3 conditions", 60.0, composite_conditions},
      {7, "fig3 sampled runs reach and avoid", 300.0, sampled_reach_avoid},
      {8, "scenario outcomes", 300.0, scenario_outcomes},
      {9, "product size below the bound", 300.0, size_bound},
      {10, "byte-identical reruns", 300.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    std::ostringstream info;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(info);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(s < c.budget_s, "over the " + std::to_string(static_cast<int>(c.budget_s)) + " s budget");
    failed += !o.pass;
    char head[64];
    std::snprintf(head, sizeof head, "[%s] %2d %.2fs ", o.pass ? "PASS" : "FAIL", c.id, s);
    std::cout << head << c.name << ": " << (o.pass ? info.str() : o.detail) << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << "\n";
  return failed ? 1 : 0;
}
