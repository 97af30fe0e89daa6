#pragma once

// JSON documents: scenarios, maneuver automata, policies and run summaries.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybridplan/chain.hpp"
#include "hybridplan/composition.hpp"
#include "hybridplan/hybrid_sim.hpp"

namespace hybridplan {

using json = nlohmann::ordered_json;

inline constexpr int kScenarioVersion = 1;
inline constexpr int kMaVersion = 1;
inline constexpr int kPolicyVersion = 1;

// A document that parsed but does not fit the schema. path names the field.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Malformed text, with the line and column of the problem.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Field access with paths for error messages.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw SchemaError(path_, "expected an object");
  }

  void only(std::initializer_list<const char*> keys) const {
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }) == keys.end()) {
        throw SchemaError(path_ + "." + it.key(), "unknown field");
      }
    }
  }

  bool has(const char* key) const { return j_->contains(key); }
  std::string at(const char* key) const { return path_ + "." + key; }

  const json& req(const char* key) const {
    if (!j_->contains(key)) throw SchemaError(at(key), "missing required field");
    return (*j_)[key];
  }

  Reader object(const char* key) const { return Reader(req(key), at(key)); }

  std::int64_t integer(const char* key) const { return as_int(req(key), at(key)); }
  double number(const char* key) const { return as_number(req(key), at(key)); }
  std::string string(const char* key) const {
    const auto& v = req(key);
    if (!v.is_string()) throw SchemaError(at(key), "expected a string");
    return v.get<std::string>();
  }
  bool boolean(const char* key) const {
    const auto& v = req(key);
    if (!v.is_boolean()) throw SchemaError(at(key), "expected true or false");
    return v.get<bool>();
  }

  static std::int64_t as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw SchemaError(path, "expected an integer");
    return v.get<std::int64_t>();
  }
  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw SchemaError(path, "expected a number");
    return v.get<double>();
  }
  static const json& as_array(const json& v, const std::string& path) {
    if (!v.is_array()) throw SchemaError(path, "expected an array");
    return v;
  }
  static std::vector<int> int_vector(const json& v, const std::string& path) {
    std::vector<int> out;
    const auto& a = as_array(v, path);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto x = as_int(a[i], path + "[" + std::to_string(i) + "]");
      if (x < INT32_MIN || x > INT32_MAX) throw SchemaError(path + "[" + std::to_string(i) + "]", "out of range");
      out.push_back(static_cast<int>(x));
    }
    return out;
  }
  static Vector number_vector(const json& v, const std::string& path) {
    Vector out;
    const auto& a = as_array(v, path);
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(as_number(a[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }
  static std::vector<Box> box_list(const json& v, const std::string& path) {
    std::vector<Box> out;
    const auto& a = as_array(v, path);
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(int_vector(a[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

  const json& raw() const { return *j_; }
  const std::string& path() const { return path_; }

 private:
  const json* j_;
  std::string path_;
};

inline json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
  }
}

inline bool flat_array(const json& j) {
  if (!j.is_array()) return false;
  for (const auto& e : j) {
    if (e.is_object()) return false;
    if (e.is_array()) {
      for (const auto& f : e) {
        if (f.is_structured()) return false;
      }
    }
  }
  return true;
}

inline void pretty(const json& j, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  if (j.is_object() && !j.empty()) {
    out += "{\n";
    std::size_t i = 0;
    for (auto it = j.begin(); it != j.end(); ++it, ++i) {
      out += pad + "  " + json(it.key()).dump() + ": ";
      pretty(it.value(), out, indent + 2);
      out += i + 1 < j.size() ? ",\n" : "\n";
    }
    out += pad + "}";
  } else if (j.is_array() && !j.empty() && !flat_array(j)) {
    out += "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      out += pad + "  ";
      pretty(j[i], out, indent + 2);
      out += i + 1 < j.size() ? ",\n" : "\n";
    }
    out += pad + "]";
  } else if (j.is_array()) {
    out += "[";
    for (std::size_t i = 0; i < j.size(); ++i) out += (i ? ", " : "") + j[i].dump(-1, ' ', false, json::error_handler_t::strict);
    out += "]";
  } else {
    out += j.dump();
  }
}

}  // namespace detail

// Indented JSON with short numeric arrays kept on one line.
inline std::string dump_json(const json& j) {
  std::string out;
  detail::pretty(j, out, 0);
  return out + "\n";
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Writes through a temporary file in the same directory and renames it over
// the target.
inline void write_file_atomic(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

struct PrimitiveSpec {
  std::string family = "double_integrator";  // or "turnaround"
  double u_max = 1.0;
  bool operator==(const PrimitiveSpec&) const = default;
};

struct PlannerSpec {
  std::string algo = "ndd";
  std::vector<std::pair<Label, double>> label_costs;
  std::uint64_t budget_states = 5'000'000;
  std::uint64_t max_expansions = 50'000'000;
  bool operator==(const PlannerSpec&) const = default;
};

struct ChainSpec {
  std::string mode = "once";       // or "loop"
  std::vector<std::vector<Box>> then;  // goal sets after grid.goals
  bool operator==(const ChainSpec&) const = default;
};

struct SimSpec {
  double dt = 0.0;
  double t_max = 0.0;
  std::uint64_t samples = 20;
  double dwell = 1.0;
  double max_rate = 50.0;
  bool operator==(const SimSpec&) const = default;
};

struct Scenario {
  int version = kScenarioVersion;
  std::string name;
  std::uint64_t seed = 0;
  GridSpec grid;
  PrimitiveSpec primitives;
  PlannerSpec planner;
  std::optional<ChainSpec> chain;
  SimSpec sim;

  bool operator==(const Scenario& o) const {
    return version == o.version && name == o.name && seed == o.seed && grid.counts == o.grid.counts &&
           grid.d == o.grid.d && grid.obstacles == o.grid.obstacles && grid.starts == o.grid.starts &&
           grid.goals == o.grid.goals && primitives == o.primitives && planner == o.planner && chain == o.chain &&
           sim == o.sim;
  }

  // Goal sets of every stage; a scenario without a chain has one stage.
  std::vector<std::vector<Box>> stages() const {
    std::vector<std::vector<Box>> out{grid.goals};
    if (chain) out.insert(out.end(), chain->then.begin(), chain->then.end());
    return out;
  }
};

inline void check_algo(const std::string& a, const std::string& path) {
  if (a != "ndd" && a != "astar" && a != "greedy") throw SchemaError(path, "algorithm must be ndd, astar or greedy");
}

inline Scenario scenario_from_json(const json& j) {
  using detail::Reader;
  Scenario s;
  const Reader r(j, "scenario");
  r.only({"version", "name", "seed", "grid", "primitives", "planner", "chain", "sim"});
  if (r.integer("version") != kScenarioVersion) {
    throw SchemaError(r.at("version"), "unsupported version " + std::to_string(r.integer("version")));
  }
  s.name = r.has("name") ? r.string("name") : "";
  const auto seed = r.integer("seed");
  if (seed < 0) throw SchemaError(r.at("seed"), "must be non-negative");
  s.seed = static_cast<std::uint64_t>(seed);

  const Reader g = r.object("grid");
  g.only({"counts", "d", "obstacles", "starts", "goals"});
  s.grid.counts = Reader::int_vector(g.req("counts"), g.at("counts"));
  s.grid.d = Reader::number_vector(g.req("d"), g.at("d"));
  if (g.has("obstacles")) s.grid.obstacles = Reader::box_list(g.req("obstacles"), g.at("obstacles"));
  if (g.has("starts")) s.grid.starts = Reader::box_list(g.req("starts"), g.at("starts"));
  s.grid.goals = Reader::box_list(g.req("goals"), g.at("goals"));
  try {
    s.grid.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(g.path(), e.what());
  }

  if (r.has("primitives")) {
    const Reader p = r.object("primitives");
    p.only({"family", "u_max"});
    if (p.has("family")) s.primitives.family = p.string("family");
    if (s.primitives.family != "double_integrator" && s.primitives.family != "turnaround") {
      throw SchemaError(p.at("family"), "unknown primitive family '" + s.primitives.family + "'");
    }
    if (p.has("u_max")) s.primitives.u_max = p.number("u_max");
    if (!(s.primitives.u_max > 0.0)) throw SchemaError(p.at("u_max"), "must be positive");
  }

  if (r.has("planner")) {
    const Reader p = r.object("planner");
    p.only({"algo", "label_costs", "budget_states", "max_expansions"});
    if (p.has("algo")) s.planner.algo = p.string("algo");
    check_algo(s.planner.algo, p.at("algo"));
    if (p.has("label_costs")) {
      const auto& a = Reader::as_array(p.req("label_costs"), p.at("label_costs"));
      for (std::size_t i = 0; i < a.size(); ++i) {
        const Reader c(a[i], p.at("label_costs") + "[" + std::to_string(i) + "]");
        c.only({"label", "cost"});
        Label l = Reader::int_vector(c.req("label"), c.at("label"));
        if (l.size() != s.grid.p()) throw SchemaError(c.at("label"), "label needs one entry per output");
        try {
          validate_label(l);
        } catch (const std::exception& e) {
          throw SchemaError(c.at("label"), e.what());
        }
        const double cost = c.number("cost");
        if (!(cost >= 0.0) || !std::isfinite(cost)) throw SchemaError(c.at("cost"), "must be finite and non-negative");
        s.planner.label_costs.emplace_back(std::move(l), cost);
      }
    }
    auto positive = [&](const char* key, std::uint64_t& out) {
      if (!p.has(key)) return;
      const auto v = p.integer(key);
      if (v <= 0) throw SchemaError(p.at(key), "must be positive");
      out = static_cast<std::uint64_t>(v);
    };
    positive("budget_states", s.planner.budget_states);
    positive("max_expansions", s.planner.max_expansions);
  }

  if (r.has("chain")) {
    const Reader c = r.object("chain");
    c.only({"mode", "then"});
    ChainSpec ch;
    ch.mode = c.string("mode");
    if (ch.mode != "once" && ch.mode != "loop") throw SchemaError(c.at("mode"), "must be once or loop");
    const auto& a = Reader::as_array(c.req("then"), c.at("then"));
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string path = c.at("then") + "[" + std::to_string(i) + "]";
      auto goals = Reader::box_list(a[i], path);
      GridSpec probe = s.grid;
      probe.goals = goals;
      if (goals.size() != s.grid.goals.size()) throw SchemaError(path, "needs one goal per vehicle");
      try {
        probe.validate();
      } catch (const std::invalid_argument& e) {
        throw SchemaError(path, e.what());
      }
      ch.then.push_back(std::move(goals));
    }
    s.chain = std::move(ch);
  }

  if (r.has("sim")) {
    const Reader m = r.object("sim");
    m.only({"dt", "t_max", "samples", "dwell", "max_rate"});
    auto nonneg = [&](const char* key, double& out) {
      if (!m.has(key)) return;
      out = m.number(key);
      if (!(out >= 0.0) || !std::isfinite(out)) throw SchemaError(m.at(key), "must be finite and non-negative");
    };
    nonneg("dt", s.sim.dt);
    nonneg("t_max", s.sim.t_max);
    nonneg("dwell", s.sim.dwell);
    nonneg("max_rate", s.sim.max_rate);
    if (m.has("dwell") && s.sim.dwell == 0.0) throw SchemaError(m.at("dwell"), "must be positive");
    if (m.has("max_rate") && s.sim.max_rate == 0.0) throw SchemaError(m.at("max_rate"), "must be positive");
    if (m.has("samples")) {
      const auto v = m.integer("samples");
      if (v < 0) throw SchemaError(m.at("samples"), "must be non-negative");
      s.sim.samples = static_cast<std::uint64_t>(v);
    }
  }
  return s;
}

inline json to_json(const Scenario& s) {
  json j;
  j["version"] = s.version;
  j["name"] = s.name;
  j["seed"] = s.seed;
  json g;
  g["counts"] = s.grid.counts;
  g["d"] = s.grid.d;
  g["obstacles"] = s.grid.obstacles;
  g["starts"] = s.grid.starts;
  g["goals"] = s.grid.goals;
  j["grid"] = g;
  j["primitives"] = {{"family", s.primitives.family}, {"u_max", s.primitives.u_max}};
  json costs = json::array();
  for (const auto& [l, c] : s.planner.label_costs) costs.push_back({{"label", l}, {"cost", c}});
  j["planner"] = {{"algo", s.planner.algo},
                  {"label_costs", costs},
                  {"budget_states", s.planner.budget_states},
                  {"max_expansions", s.planner.max_expansions}};
  if (s.chain) j["chain"] = {{"mode", s.chain->mode}, {"then", s.chain->then}};
  j["sim"] = {{"dt", s.sim.dt},
              {"t_max", s.sim.t_max},
              {"samples", s.sim.samples},
              {"dwell", s.sim.dwell},
              {"max_rate", s.sim.max_rate}};
  return j;
}

inline Scenario parse_scenario(const std::string& text) { return scenario_from_json(detail::parse_text(text)); }
inline std::string serialize_scenario(const Scenario& s) { return dump_json(to_json(s)); }
inline Scenario load_scenario(const std::filesystem::path& p) { return parse_scenario(read_file(p)); }

inline Workspace scenario_workspace(const Scenario& s) { return Workspace(s.grid); }

// One atomic automaton per output, with the box length of that output's
// axis.
inline ManeuverAutomaton build_scenario_ma(const Scenario& s) {
  const std::size_t k = s.grid.axes();
  if (s.primitives.family == "double_integrator") {
    std::vector<DoubleIntegratorParams> axes;
    for (std::size_t i = 0; i < s.grid.p(); ++i) axes.push_back({s.grid.d[i % k], s.primitives.u_max});
    return compose_double_integrators(axes);
  }
  std::vector<ManeuverAutomaton> per_axis;
  for (std::size_t a = 0; a < k; ++a) per_axis.push_back(build_turnaround_ma(s.grid.d[a], s.primitives.u_max));
  ManeuverAutomaton out = per_axis[0];
  for (std::size_t i = 1; i < s.grid.p(); ++i) out = parallel_compose(out, per_axis[i % k]);
  return out;
}

inline SimConfig scenario_sim_config(const Scenario& s) {
  SimConfig c;
  c.dt = s.sim.dt;
  c.t_max = s.sim.t_max;
  c.dwell = s.sim.dwell;
  c.max_rate = s.sim.max_rate;
  c.samples = s.sim.samples;
  c.seed = s.seed;
  return c;
}

// The 8-puzzle: tiles 1..8 on a 3x3x1 grid with one blank. Goal: tile t at
// row-major position t-1. Starts are a seeded shuffle with an even number of
// inversions, which is exactly the solvable half for a 3-wide board.
inline GridSpec puzzle8_grid(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> cells{1, 2, 3, 4, 5, 6, 7, 8, 0};
  auto inversions = [&] {
    int n = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      for (std::size_t j = i + 1; j < cells.size(); ++j) n += cells[i] && cells[j] && cells[i] > cells[j];
    }
    return n;
  };
  do {
    std::shuffle(cells.begin(), cells.end(), rng);
  } while (inversions() % 2 != 0 || cells == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 0});
  GridSpec g;
  g.counts = {3, 3, 1};
  g.d = {1.0, 1.0, 1.0};
  g.starts.resize(8);
  for (int t = 1; t <= 8; ++t) g.goals.push_back({(t - 1) % 3, (t - 1) / 3, 0});
  for (int pos = 0; pos < 9; ++pos) {
    if (cells[pos]) g.starts[cells[pos] - 1] = {pos % 3, pos / 3, 0};
  }
  return g;
}

inline bool puzzle8_solvable(const GridSpec& g) {
  std::vector<int> cells(9, 0);
  for (std::size_t v = 0; v < g.starts.size(); ++v) cells[g.starts[v][1] * 3 + g.starts[v][0]] = static_cast<int>(v) + 1;
  int n = 0;
  for (int i = 0; i < 9; ++i) {
    for (int j = i + 1; j < 9; ++j) n += cells[i] && cells[j] && cells[i] > cells[j];
  }
  return n % 2 == 0;
}

// ---------------------------------------------------------------------------
// Maneuver automata
// ---------------------------------------------------------------------------

inline json to_json(const PolytopicSet& s) {
  json hs = json::array();
  for (const auto& h : s.halfspaces()) hs.push_back({{"normal", h.normal}, {"offset", h.offset}, {"strict", h.strict}});
  return {{"dim", s.dim()}, {"halfspaces", hs}, {"excluded", s.excluded()}};
}

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json tree_to_json(const CompositionNode& n) {
  if (n.leaf()) return {{"component", n.component}};
  json c = json::array();
  for (const auto& ch : n.children) c.push_back(tree_to_json(ch));
  return {{"compose", c}};
}

// Nested form: components with their primitives and edges, plus the
// composition tree. The "flattened" block lists composite edges for
// debugging and is ignored on reading.
inline json ma_to_json(const ManeuverAutomaton& ma, std::size_t flat_limit = 5000) {
  json comps = json::array();
  for (std::size_t j = 0; j < ma.num_components(); ++j) {
    const auto& c = ma.component(j);
    json prims = json::array();
    for (const auto& p : c.primitives()) {
      prims.push_back({{"name", p.name}, {"K", to_json(p.K)}, {"g", p.g}, {"invariant", to_json(p.invariant)}});
    }
    json edges = json::array();
    for (const auto& e : c.edges()) {
      edges.push_back({{"source", e.source}, {"sigma", e.sigma}, {"target", e.target}, {"guard", to_json(e.guard)}});
    }
    comps.push_back({{"name", c.name()},
                     {"A", to_json(c.A())},
                     {"B", to_json(c.B())},
                     {"outputs", c.output_index()},
                     {"box", c.box().d},
                     {"primitives", prims},
                     {"edges", edges}});
  }
  json j;
  j["format"] = "hybridplan-ma";
  j["version"] = kMaVersion;
  j["tree"] = tree_to_json(ma.tree());
  j["components"] = comps;
  json flat;
  flat["primitives"] = ma.num_primitives();
  flat["n"] = ma.n();
  flat["p"] = ma.p();
  try {
    json edges = json::array();
    for (const auto& e : ma.enumerate_edges(flat_limit)) {
      edges.push_back({ma.primitive_name(e.source), e.sigma, ma.primitive_name(e.target)});
    }
    flat["edges"] = edges;
  } catch (const std::length_error&) {
    flat["edges"] = "omitted: more than " + std::to_string(flat_limit) + " edges";
  }
  j["flattened"] = flat;
  return j;
}

namespace detail {

inline Matrix matrix_from_json(const json& v, const std::string& path) {
  const auto& rows = Reader::as_array(v, path);
  if (rows.empty()) throw SchemaError(path, "empty matrix");
  std::vector<double> data;
  std::size_t cols = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = Reader::number_vector(rows[r], path + "[" + std::to_string(r) + "]");
    if (r == 0) cols = row.size();
    if (row.size() != cols || cols == 0) throw SchemaError(path + "[" + std::to_string(r) + "]", "ragged matrix");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(rows.size(), cols, data);
}

inline PolytopicSet set_from_json(const json& v, const std::string& path) {
  const Reader r(v, path);
  r.only({"dim", "halfspaces", "excluded"});
  const auto dim = r.integer("dim");
  if (dim <= 0) throw SchemaError(r.at("dim"), "must be positive");
  std::vector<Halfspace> hs;
  const auto& a = Reader::as_array(r.req("halfspaces"), r.at("halfspaces"));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Reader h(a[i], r.at("halfspaces") + "[" + std::to_string(i) + "]");
    h.only({"normal", "offset", "strict"});
    hs.push_back(Halfspace{Reader::number_vector(h.req("normal"), h.at("normal")), h.number("offset"),
                           h.boolean("strict")});
  }
  std::vector<Vector> ex;
  if (r.has("excluded")) {
    const auto& e = Reader::as_array(r.req("excluded"), r.at("excluded"));
    for (std::size_t i = 0; i < e.size(); ++i) {
      ex.push_back(Reader::number_vector(e[i], r.at("excluded") + "[" + std::to_string(i) + "]"));
    }
  }
  try {
    return PolytopicSet(static_cast<std::size_t>(dim), std::move(hs), std::move(ex));
  } catch (const std::exception& e) {
    throw SchemaError(path, e.what());
  }
}

inline CompositionNode tree_from_json(const json& v, const std::string& path) {
  const Reader r(v, path);
  CompositionNode n;
  if (r.has("component")) {
    r.only({"component"});
    n.component = static_cast<int>(r.integer("component"));
    if (n.component < 0) throw SchemaError(r.at("component"), "must be non-negative");
    return n;
  }
  r.only({"compose"});
  const auto& a = Reader::as_array(r.req("compose"), r.at("compose"));
  for (std::size_t i = 0; i < a.size(); ++i) n.children.push_back(tree_from_json(a[i], r.at("compose") + "[" + std::to_string(i) + "]"));
  return n;
}

}  // namespace detail

inline ManeuverAutomaton ma_from_json(const json& j) {
  using detail::Reader;
  const Reader r(j, "ma");
  r.only({"format", "version", "tree", "components", "flattened"});
  if (r.string("format") != "hybridplan-ma") throw SchemaError(r.at("format"), "not a maneuver automaton document");
  if (r.integer("version") != kMaVersion) throw SchemaError(r.at("version"), "unsupported version");
  std::vector<std::shared_ptr<const AtomicMA>> comps;
  const auto& a = Reader::as_array(r.req("components"), r.at("components"));
  for (std::size_t j2 = 0; j2 < a.size(); ++j2) {
    const Reader c(a[j2], r.at("components") + "[" + std::to_string(j2) + "]");
    c.only({"name", "A", "B", "outputs", "box", "primitives", "edges"});
    std::vector<MotionPrimitive> prims;
    const auto& pa = Reader::as_array(c.req("primitives"), c.at("primitives"));
    for (std::size_t i = 0; i < pa.size(); ++i) {
      const Reader p(pa[i], c.at("primitives") + "[" + std::to_string(i) + "]");
      p.only({"name", "K", "g", "invariant"});
      prims.push_back({p.string("name"), detail::matrix_from_json(p.req("K"), p.at("K")),
                       Reader::number_vector(p.req("g"), p.at("g")),
                       detail::set_from_json(p.req("invariant"), p.at("invariant"))});
    }
    std::vector<MAEdge> edges;
    const auto& ea = Reader::as_array(c.req("edges"), c.at("edges"));
    for (std::size_t i = 0; i < ea.size(); ++i) {
      const Reader e(ea[i], c.at("edges") + "[" + std::to_string(i) + "]");
      e.only({"source", "sigma", "target", "guard"});
      const auto src = e.integer("source"), dst = e.integer("target");
      if (src < 0 || dst < 0) throw SchemaError(e.path(), "negative primitive index");
      edges.push_back({static_cast<std::size_t>(src), Reader::int_vector(e.req("sigma"), e.at("sigma")),
                       static_cast<std::size_t>(dst), detail::set_from_json(e.req("guard"), e.at("guard"))});
    }
    std::vector<std::size_t> outs;
    for (int o : Reader::int_vector(c.req("outputs"), c.at("outputs"))) {
      if (o < 0) throw SchemaError(c.at("outputs"), "negative index");
      outs.push_back(static_cast<std::size_t>(o));
    }
    try {
      comps.push_back(std::make_shared<const AtomicMA>(
          c.string("name"), detail::matrix_from_json(c.req("A"), c.at("A")),
          detail::matrix_from_json(c.req("B"), c.at("B")), outs,
          BoxGeometry(Reader::number_vector(c.req("box"), c.at("box"))), std::move(prims), std::move(edges)));
    } catch (const SchemaError&) {
      throw;
    } catch (const std::exception& e) {
      throw SchemaError(c.path(), e.what());
    }
  }
  try {
    return ManeuverAutomaton::from_parts(std::move(comps), detail::tree_from_json(r.req("tree"), r.at("tree")));
  } catch (const SchemaError&) {
    throw;
  } catch (const std::exception& e) {
    throw SchemaError(r.at("tree"), e.what());
  }
}

inline ManeuverAutomaton parse_ma(const std::string& text) { return ma_from_json(detail::parse_text(text)); }
inline std::string serialize_ma(const ManeuverAutomaton& ma) { return dump_json(ma_to_json(ma)); }

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

struct PolicyStage {
  ControlPolicy policy;
  std::vector<ProductState> initial;
  std::map<ProductState, double> value;
};

struct PolicyDocument {
  std::string algorithm;
  std::string mode = "once";
  std::vector<PolicyStage> stages;
};

namespace detail {

inline json state_json(const ProductState& q, const Workspace& ws, const ManeuverAutomaton& ma) {
  return {{"location", ws.decode(q.location)}, {"primitive", ma.primitive_names(q.primitive)}};
}

inline ProductState state_from(const json& v, const std::string& path, const Workspace& ws,
                               const ManeuverAutomaton& ma) {
  const Reader r(v, path);
  r.only({"location", "primitive", "value", "choices"});
  const auto l = Reader::int_vector(r.req("location"), r.at("location"));
  if (l.size() != ws.p()) throw SchemaError(r.at("location"), "wrong number of coordinates");
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (l[i] < 0 || l[i] >= ws.spec().counts[i % ws.axes()]) throw SchemaError(r.at("location"), "out of bounds");
  }
  std::vector<std::string> names;
  const auto& a = Reader::as_array(r.req("primitive"), r.at("primitive"));
  for (const auto& n : a) {
    if (!n.is_string()) throw SchemaError(r.at("primitive"), "expected primitive names");
    names.push_back(n.get<std::string>());
  }
  try {
    return {ws.encode(l), ma.primitive_by_names(names)};
  } catch (const std::exception& e) {
    throw SchemaError(r.at("primitive"), e.what());
  }
}

}  // namespace detail

// Entries are written in product-state order, so equal policies give equal
// bytes.
inline json policy_to_json(const PolicyDocument& doc, const Workspace& ws, const ManeuverAutomaton& ma) {
  json stages = json::array();
  for (const auto& st : doc.stages) {
    json entries = json::array();
    for (const auto& [q, assign] : st.policy.table) {
      json e = detail::state_json(q, ws, ma);
      auto it = st.value.find(q);
      if (it != st.value.end()) e["value"] = it->second;
      json ch = json::array();
      for (const auto& [s, m] : assign) ch.push_back({{"label", s}, {"next", ma.primitive_names(m)}});
      e["choices"] = ch;
      entries.push_back(e);
    }
    json init = json::array();
    for (const auto& q : st.initial) init.push_back(detail::state_json(q, ws, ma));
    stages.push_back({{"entries", entries}, {"initial", init}});
  }
  return {{"format", "hybridplan-policy"},
          {"version", kPolicyVersion},
          {"algorithm", doc.algorithm},
          {"mode", doc.mode},
          {"stages", stages}};
}

inline PolicyDocument policy_from_json(const json& j, const Workspace& ws, const ManeuverAutomaton& ma) {
  using detail::Reader;
  const Reader r(j, "policy");
  r.only({"format", "version", "algorithm", "mode", "stages"});
  if (r.string("format") != "hybridplan-policy") throw SchemaError(r.at("format"), "not a policy document");
  if (r.integer("version") != kPolicyVersion) throw SchemaError(r.at("version"), "unsupported version");
  PolicyDocument doc;
  doc.algorithm = r.string("algorithm");
  doc.mode = r.string("mode");
  const auto& sa = Reader::as_array(r.req("stages"), r.at("stages"));
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const Reader s(sa[i], r.at("stages") + "[" + std::to_string(i) + "]");
    s.only({"entries", "initial"});
    PolicyStage st;
    const auto& ea = Reader::as_array(s.req("entries"), s.at("entries"));
    for (std::size_t k = 0; k < ea.size(); ++k) {
      const std::string path = s.at("entries") + "[" + std::to_string(k) + "]";
      const auto q = detail::state_from(ea[k], path, ws, ma);
      const Reader e(ea[k], path);
      if (e.has("value")) st.value[q] = e.number("value");
      std::vector<std::pair<Label, PrimitiveId>> assign;
      const auto& ca = Reader::as_array(e.req("choices"), e.at("choices"));
      for (std::size_t c = 0; c < ca.size(); ++c) {
        const Reader ch(ca[c], e.at("choices") + "[" + std::to_string(c) + "]");
        ch.only({"label", "next"});
        Label l = Reader::int_vector(ch.req("label"), ch.at("label"));
        std::vector<std::string> names;
        for (const auto& n : Reader::as_array(ch.req("next"), ch.at("next"))) {
          if (!n.is_string()) throw SchemaError(ch.at("next"), "expected primitive names");
          names.push_back(n.get<std::string>());
        }
        try {
          assign.emplace_back(std::move(l), ma.primitive_by_names(names));
        } catch (const std::exception& ex) {
          throw SchemaError(ch.at("next"), ex.what());
        }
      }
      st.policy.table[q] = std::move(assign);
    }
    const auto& ia = Reader::as_array(s.req("initial"), s.at("initial"));
    for (std::size_t k = 0; k < ia.size(); ++k) {
      st.initial.push_back(detail::state_from(ia[k], s.at("initial") + "[" + std::to_string(k) + "]", ws, ma));
    }
    doc.stages.push_back(std::move(st));
  }
  return doc;
}

inline PolicyDocument policy_document(const ChainResult& cr, const std::string& algo, const std::string& mode) {
  PolicyDocument doc;
  doc.algorithm = algo;
  doc.mode = mode;
  for (const auto& r : cr.stages) doc.stages.push_back({r.policy, r.initial, r.value});
  return doc;
}

}  // namespace hybridplan
