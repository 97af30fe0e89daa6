#pragma once

// Command-line driver: plan, simulate, check and compose. Kept in a header
// so tests can run commands in-process.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hybridplan/assumptions.hpp"
#include "hybridplan/io.hpp"

namespace hybridplan::cli {

enum ExitCode : int { kOk = 0, kIoError = 1, kNoSolution = 2, kVerdictFailed = 3, kInvalidDocument = 4 };

struct Options {
  std::string command;
  std::string input;
  std::string out_dir = "out";
  std::optional<std::string> algo;
  std::optional<std::uint64_t> seed, samples, budget_states;
  std::optional<double> dt, t_max;
  std::string policy;  // simulate: policy file, default <out-dir>/policy.json
  unsigned workers = 0;
  std::size_t trace_every = 10;
  std::size_t copies = 1;
};

namespace detail {

inline void apply_overrides(Scenario& sc, const Options& o) {
  if (o.algo) {
    check_algo(*o.algo, "--algo");
    sc.planner.algo = *o.algo;
  }
  if (o.seed) sc.seed = *o.seed;
  if (o.samples) sc.sim.samples = *o.samples;
  if (o.budget_states) sc.planner.budget_states = *o.budget_states;
  if (o.dt) sc.sim.dt = *o.dt;
  if (o.t_max) sc.sim.t_max = *o.t_max;
}

struct Planned {
  ChainResult result;
  PolicyDocument doc;
  double wall_ms = 0.0;
};

inline Planned plan_scenario(const Scenario& sc, const Workspace& ws, const ManeuverAutomaton& ma) {
  const auto t0 = std::chrono::steady_clock::now();
  NddOptions ndd;
  ndd.build.budget_states = sc.planner.budget_states;
  for (const auto& [l, c] : sc.planner.label_costs) ndd.label_costs[l] = c;
  SearchOptions search;
  search.max_expansions = sc.planner.max_expansions;
  const std::string mode = sc.chain ? sc.chain->mode : "once";
  Planned p;
  p.result = chain_specs(ws, ma, sc.stages(), mode == "loop" ? ChainMode::loop : ChainMode::once, sc.planner.algo,
                         ndd, search);
  p.doc = policy_document(p.result, sc.planner.algo, mode);
  p.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return p;
}

inline json stats_json(const Scenario& sc, const Workspace& ws, const ManeuverAutomaton& ma, const Planned& p) {
  json stages = json::array();
  for (const auto& r : p.result.stages) {
    json s = {{"success", r.success},
              {"message", r.message},
              {"expanded", r.stats.expanded},
              {"product_states", r.stats.states},
              {"product_edges", r.stats.edges},
              {"initial_states", r.initial.size()}};
    if (!r.path.empty()) {
      s["path"] = r.path;
      s["path_cost"] = r.success ? r.path.size() - 1 : 0;
    }
    stages.push_back(s);
  }
  json j = {{"scenario", sc.name},
            {"algorithm", sc.planner.algo},
            {"success", p.result.success},
            {"message", p.result.message},
            {"size_bound", pa_size_bound(ws, ma)},
            {"wall_ms", p.wall_ms},
            {"stages", stages}};
  if (p.result.failed_stage) j["failed_stage"] = *p.result.failed_stage;
  return j;
}

inline json verdict_json(std::size_t i, const ProductState& q, const Vector& x0, const HybridTrace& tr,
                         const Verdict& v, const Workspace& ws, const ManeuverAutomaton& ma) {
  json j = {{"index", i},
            {"start", {{"location", ws.decode(q.location)}, {"primitive", ma.primitive_names(q.primitive)}}},
            {"x0", x0},
            {"status", to_string(tr.status)},
            {"pass", v.pass},
            {"avoid", v.avoid},
            {"reach", v.reach},
            {"events", tr.events.size()},
            {"zeno", tr.zeno}};
  j["violation_time"] = v.violation_time ? json(*v.violation_time) : json(nullptr);
  j["reach_time"] = v.reach_time ? json(*v.reach_time) : json(nullptr);
  if (!v.reason.empty()) j["reason"] = v.reason;
  return j;
}

inline ManeuverAutomaton load_ma_or_scenario(const std::string& path) {
  const json j = hybridplan::detail::parse_text(read_file(path));
  if (j.is_object() && j.contains("format")) return ma_from_json(j);
  return build_scenario_ma(scenario_from_json(j));
}

}  // namespace detail

inline int cmd_plan(const Options& o, std::ostream& out, std::ostream& err) {
  Scenario sc = load_scenario(o.input);
  detail::apply_overrides(sc, o);
  const auto ws = scenario_workspace(sc);
  const auto ma = build_scenario_ma(sc);
  const auto p = detail::plan_scenario(sc, ws, ma);
  const std::filesystem::path dir(o.out_dir);
  write_file_atomic(dir / "stats.json", dump_json(detail::stats_json(sc, ws, ma, p)));
  if (!p.result.success) {
    err << "no solution: " << p.result.message << "\n";
    return kNoSolution;
  }
  write_file_atomic(dir / "policy.json", dump_json(policy_to_json(p.doc, ws, ma)));
  std::size_t entries = 0;
  for (const auto& s : p.doc.stages) entries += s.policy.table.size();
  out << "plan " << sc.name << ": " << sc.planner.algo << " solved " << p.doc.stages.size() << " stage(s), "
      << entries << " policy entries\n";
  return kOk;
}

inline int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  Scenario sc = load_scenario(o.input);
  detail::apply_overrides(sc, o);
  const auto ws = scenario_workspace(sc);
  const auto ma = build_scenario_ma(sc);
  const std::filesystem::path dir(o.out_dir);
  const std::filesystem::path policy_path = o.policy.empty() ? dir / "policy.json" : std::filesystem::path(o.policy);
  PolicyDocument doc;
  if (std::filesystem::exists(policy_path)) {
    doc = policy_from_json(hybridplan::detail::parse_text(read_file(policy_path)), ws, ma);
  } else if (!o.policy.empty()) {
    throw std::runtime_error("cannot open " + policy_path.string());
  } else {
    const auto p = detail::plan_scenario(sc, ws, ma);
    if (!p.result.success) {
      err << "no solution: " << p.result.message << "\n";
      return kNoSolution;
    }
    doc = p.doc;
  }
  const auto goals = sc.stages();
  if (doc.stages.size() != goals.size()) throw SchemaError("policy.stages", "stage count does not match the scenario");
  const bool chained = goals.size() > 1;
  const bool loop = doc.mode == "loop";
  const SimConfig cfg = scenario_sim_config(sc);
  const auto starts = doc.stages[0].initial.empty()
                          ? std::vector<std::pair<ProductState, Vector>>{}
                          : sample_initial_conditions(doc.stages[0].initial, ws, ma, sc.sim.samples, sc.seed);
  if (starts.empty() && sc.sim.samples > 0) throw std::runtime_error("policy has no initial states");
  std::vector<ControlPolicy> pols;
  for (const auto& s : doc.stages) pols.push_back(s.policy);

  std::vector<json> results(starts.size());
  std::vector<std::string> csv(starts.size());
  std::vector<char> passed(starts.size(), 0), inv_exit(starts.size(), 0), zeno(starts.size(), 0);
  const unsigned workers = o.workers ? o.workers : std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  hybridplan::detail::parallel_chunks(starts.size(), std::min<unsigned>(workers, std::max<std::size_t>(1, starts.size())),
                                      [&](std::size_t b, std::size_t e, unsigned) {
                                        for (std::size_t i = b; i < e; ++i) {
                                          const auto& [q, x0] = starts[i];
                                          const auto tr = chained ? simulate_chain(ws, ma, goals, pols, loop, q, x0, cfg)
                                                                  : simulate_execution(ws, ma, pols[0], q, x0, cfg);
                                          const auto v = chained ? verify_chain(tr, ws, ma, goals, loop, cfg.dwell)
                                                                 : verify_reach_avoid(tr, ws, ma, cfg.dwell);
                                          results[i] = detail::verdict_json(i, q, x0, tr, v, ws, ma);
                                          csv[i] = trace_csv(tr, ws, ma, o.trace_every);
                                          passed[i] = v.pass;
                                          inv_exit[i] = tr.status == TraceStatus::invariant_exit;
                                          zeno[i] = tr.zeno;
                                        }
                                      });
  std::size_t n_pass = 0, n_inv = 0, n_zeno = 0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "trace_%04zu.csv", i);
    write_file_atomic(dir / "traces" / name, csv[i]);
    n_pass += passed[i];
    n_inv += inv_exit[i];
    n_zeno += zeno[i];
  }
  json summary = {{"scenario", sc.name},
                  {"seed", sc.seed},
                  {"runs", starts.size()},
                  {"passed", n_pass},
                  {"invariant_exits", n_inv},
                  {"zeno", n_zeno},
                  {"trace_columns", trace_columns(ws, ma)},
                  {"results", results}};
  write_file_atomic(dir / "verdicts.json", dump_json(summary));
  out << "simulate " << sc.name << ": " << n_pass << "/" << starts.size() << " runs pass, " << n_inv
      << " invariant exits, " << n_zeno << " zeno\n";
  return n_pass == starts.size() ? kOk : kVerdictFailed;
}

inline int cmd_check(const Options& o, std::ostream& out, std::ostream&) {
  const auto ma = detail::load_ma_or_scenario(o.input);
  SimConfig cfg;
  if (o.samples) cfg.samples = *o.samples;
  if (o.dt) cfg.dt = *o.dt;
  if (o.t_max) cfg.t_max = *o.t_max;
  if (o.seed) cfg.seed = *o.seed;
  const auto rep = check_ma_assumptions(ma, cfg);
  json conds = json::array();
  for (std::size_t i = 0; i < rep.conditions.size(); ++i) {
    const auto& c = rep.conditions[i];
    conds.push_back({{"condition", condition_name(i)},
                     {"status", to_string(c.status)},
                     {"checked", c.checked},
                     {"witnesses", c.witnesses}});
    out << condition_name(i) << " " << to_string(c.status) << " (" << c.checked << " checked)\n";
  }
  const json j = {{"components", ma.num_components()}, {"primitives", ma.num_primitives()}, {"ok", rep.ok()},
                  {"conditions", conds}};
  write_file_atomic(std::filesystem::path(o.out_dir) / "check.json", dump_json(j));
  out << (rep.ok() ? "all conditions hold\n" : "some conditions fail\n");
  return rep.ok() ? kOk : kVerdictFailed;
}

inline int cmd_compose(const Options& o, std::ostream& out, std::ostream&) {
  auto ma = detail::load_ma_or_scenario(o.input);
  if (o.copies == 0) throw CLI::ValidationError("--copies", "must be at least 1");
  ma = compose_n(ma, o.copies);
  write_file_atomic(std::filesystem::path(o.out_dir) / "composed.ma.json", serialize_ma(ma));
  out << "composed " << ma.num_components() << " component(s), " << ma.num_primitives() << " primitives\n";
  return kOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Reach-avoid planning with maneuver automata"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("input", o.input, "scenario or automaton file")->required();
    sub->add_option("--out-dir", o.out_dir, "directory for all outputs")->envname("HYBRIDPLAN_OUT_DIR");
    sub->add_option("--algo", o.algo, "ndd, astar or greedy")
        ->envname("HYBRIDPLAN_ALGO")
        ->check(CLI::IsMember({"ndd", "astar", "greedy"}));
    sub->add_option("--seed", o.seed, "random seed")->envname("HYBRIDPLAN_SEED");
    sub->add_option("--samples", o.samples, "number of sampled runs")->envname("HYBRIDPLAN_SAMPLES");
    sub->add_option("--dt", o.dt, "integration step")->envname("HYBRIDPLAN_DT");
    sub->add_option("--t-max", o.t_max, "simulation horizon")->envname("HYBRIDPLAN_T_MAX");
    sub->add_option("--budget-states", o.budget_states, "product state budget")->envname("HYBRIDPLAN_BUDGET_STATES");
    sub->add_option("--workers", o.workers, "worker threads, 0 for automatic")->envname("HYBRIDPLAN_WORKERS");
  };
  auto* plan = app.add_subcommand("plan", "compute a policy and write policy.json and stats.json");
  auto* sim = app.add_subcommand("simulate", "simulate sampled starts and write traces and verdicts.json");
  auto* check = app.add_subcommand("check", "check the automaton assumptions and write check.json");
  auto* compose = app.add_subcommand("compose", "write the composed automaton to composed.ma.json");
  for (auto* s : {plan, sim, check, compose}) add_common(s);
  sim->add_option("--policy", o.policy, "policy file, default <out-dir>/policy.json");
  sim->add_option("--trace-every", o.trace_every, "write every k-th sample to the trace files");
  compose->add_option("--copies", o.copies, "compose this many copies in parallel");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kIoError;
  }
  try {
    if (*plan) return cmd_plan(o, out, err);
    if (*sim) return cmd_simulate(o, out, err);
    if (*check) return cmd_check(o, out, err);
    return cmd_compose(o, out, err);
  } catch (const SchemaError& e) {
    err << "invalid document: " << e.what() << "\n";
    return kInvalidDocument;
  } catch (const ParseError& e) {
    err << "malformed document: " << e.what() << "\n";
    return kInvalidDocument;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  }
}

}  // namespace hybridplan::cli
