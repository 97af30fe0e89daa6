#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include "hybridplan/geometry.hpp"
#include "hybridplan/linalg.hpp"

namespace hybridplan {

// Offset vector in {-1,0,1}^p. The all-zero label is epsilon.
using Label = std::vector<int>;
using PrimitiveId = std::uint64_t;

inline bool is_epsilon(const Label& s) {
  return std::all_of(s.begin(), s.end(), [](int v) { return v == 0; });
}

inline void validate_label(const Label& s) {
  for (int v : s) {
    if (v < -1 || v > 1) throw std::invalid_argument("label entries must be in {-1,0,1}");
  }
}

inline std::string label_to_string(const Label& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

inline Label negate(Label s) {
  for (auto& v : s) v = -v;
  return s;
}

struct BoxGeometry {
  Vector d;

  explicit BoxGeometry(Vector lengths = {}) : d(std::move(lengths)) {
    for (double v : d) {
      if (!(v > 0.0)) throw std::invalid_argument("box lengths must be positive");
    }
  }
  std::size_t p() const { return d.size(); }
};

// F_sigma in output space: y_i pinned to 0 (sigma_i=-1), to d_i (+1), or free
// on [0,d_i].
inline PolytopicSet face_of_label(const Label& sigma, const BoxGeometry& box) {
  if (sigma.size() != box.p()) throw std::invalid_argument("face_of_label: dimension mismatch");
  validate_label(sigma);
  const std::size_t p = box.p();
  std::vector<Halfspace> hs;
  for (std::size_t i = 0; i < p; ++i) {
    Vector e(p, 0.0);
    e[i] = 1.0;
    const double hi = sigma[i] == -1 ? 0.0 : box.d[i];
    const double lo = sigma[i] == 1 ? box.d[i] : 0.0;
    hs.push_back(Halfspace{e, hi, false});
    e[i] = -1.0;
    hs.push_back(Halfspace{e, -lo, false});
  }
  return PolytopicSet(p, std::move(hs));
}

struct MotionPrimitive {
  std::string name;
  Matrix K;  // control x state
  Vector g;  // control
  PolytopicSet invariant;
};

struct MAEdge {
  std::size_t source = 0;
  Label sigma;
  std::size_t target = 0;
  PolytopicSet guard;
};

// Augmented edge (m, sigma, m'), sigma possibly epsilon.
struct AugmentedEdge {
  std::size_t source = 0;
  Label sigma;
  std::size_t target = 0;
  bool operator==(const AugmentedEdge& o) const {
    return source == o.source && sigma == o.sigma && target == o.target;
  }
  bool operator<(const AugmentedEdge& o) const {
    return std::tie(source, sigma, target) < std::tie(o.source, o.sigma, o.target);
  }
};

// A maneuver automaton over a single state block with dynamics
// x' = A x + B u, u = K_m x + g_m.
class AtomicMA {
 public:
  AtomicMA(std::string name, Matrix A, Matrix B, std::vector<std::size_t> output_index,
           BoxGeometry box, std::vector<MotionPrimitive> primitives, std::vector<MAEdge> edges)
      : name_(std::move(name)),
        A_(std::move(A)),
        B_(std::move(B)),
        o_(std::move(output_index)),
        box_(std::move(box)),
        prims_(std::move(primitives)),
        edges_(std::move(edges)) {
    validate();
    build_cache();
  }

  const std::string& name() const { return name_; }
  std::size_t n() const { return A_.rows(); }
  std::size_t p() const { return o_.size(); }
  std::size_t q() const { return B_.cols(); }
  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const std::vector<std::size_t>& output_index() const { return o_; }
  const BoxGeometry& box() const { return box_; }
  const std::vector<MotionPrimitive>& primitives() const { return prims_; }
  const std::vector<MAEdge>& edges() const { return edges_; }
  std::size_t num_primitives() const { return prims_.size(); }

  std::size_t primitive_index(const std::string& name) const {
    for (std::size_t i = 0; i < prims_.size(); ++i) {
      if (prims_[i].name == name) return i;
    }
    throw std::out_of_range("unknown primitive '" + name + "'");
  }

  // Labels on outgoing edges of m, sorted.
  const std::vector<Label>& sigma(std::size_t m) const { return sigma_.at(m); }

  // Augmented labels of m: sigma(m) plus epsilon.
  const std::vector<Label>& sigma_bar(std::size_t m) const { return sigma_bar_.at(m); }

  // Targets of augmented edges (m, s, .), sorted. Empty when none.
  const std::vector<std::size_t>& successors_bar(std::size_t m, const Label& s) const {
    static const std::vector<std::size_t> none;
    auto it = succ_bar_.find({m, s});
    return it == succ_bar_.end() ? none : it->second;
  }

  const std::vector<AugmentedEdge>& augmented_edges() const { return aug_; }

  const Region& invariant_region(std::size_t m) const { return inv_.at(m); }
  const Region& inner_invariant(std::size_t m) const { return inner_.at(m); }

  // Guard shared by all edges (m, s, .); for s = epsilon the inner invariant.
  const Region& guard_region(std::size_t m, const Label& s) const {
    if (is_epsilon(s)) return inner_.at(m);
    auto it = guard_by_label_.find({m, s});
    if (it == guard_by_label_.end()) throw std::out_of_range("no edge with this label");
    return it->second;
  }

  // Guard of the specific edge (m, s, t); epsilon gives the inner invariant.
  const Region& edge_guard_region(std::size_t m, const Label& s, std::size_t t) const {
    if (is_epsilon(s)) return inner_.at(m);
    auto it = guard_by_edge_.find(std::make_tuple(m, s, t));
    if (it == guard_by_edge_.end()) throw std::out_of_range("no such edge");
    return it->second;
  }

  const PolytopicSet& guard_set(std::size_t m, const Label& s) const {
    for (const auto& e : edges_) {
      if (e.source == m && e.sigma == s) return e.guard;
    }
    throw std::out_of_range("no edge with this label");
  }

  // h_o^{-1}(d o sigma): shift in state space for a label.
  Vector label_shift(const Label& s) const {
    if (s.size() != p()) throw std::invalid_argument("label dimension mismatch");
    Vector out(n(), 0.0);
    for (std::size_t i = 0; i < p(); ++i) out[o_[i]] = box_.d[i] * s[i];
    return out;
  }

  Vector apply_reset(const Label& s, const Vector& x) const { return x - label_shift(s); }

  Vector field(std::size_t m, const Vector& x) const {
    const auto& prim = prims_.at(m);
    Vector u = prim.K * x;
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += prim.g[i];
    return A_ * x + B_ * u;
  }

  Vector outputs(const Vector& x) const {
    Vector y(p());
    for (std::size_t i = 0; i < p(); ++i) y[i] = x[o_[i]];
    return y;
  }

 private:
  void validate() const {
    const std::size_t nn = A_.rows();
    if (A_.cols() != nn || B_.rows() != nn) throw std::invalid_argument("AtomicMA: bad dynamics shape");
    if (box_.p() != o_.size()) throw std::invalid_argument("AtomicMA: box/output dimension mismatch");
    std::set<std::size_t> seen;
    for (auto i : o_) {
      if (i >= nn) throw std::invalid_argument("AtomicMA: output index out of range");
      if (!seen.insert(i).second) throw std::invalid_argument("AtomicMA: output index map not injective");
    }
    if (prims_.empty()) throw std::invalid_argument("AtomicMA: no primitives");
    std::set<std::string> names;
    for (const auto& m : prims_) {
      if (!names.insert(m.name).second) throw std::invalid_argument("AtomicMA: duplicate primitive name");
      if (m.K.rows() != B_.cols() || m.K.cols() != nn || m.g.size() != B_.cols()) {
        throw std::invalid_argument("AtomicMA: primitive '" + m.name + "' has bad gain shape");
      }
      if (m.invariant.dim() != nn) throw std::invalid_argument("AtomicMA: invariant dimension mismatch");
    }
    for (const auto& e : edges_) {
      if (e.source >= prims_.size() || e.target >= prims_.size()) {
        throw std::invalid_argument("AtomicMA: edge endpoint does not exist");
      }
      if (e.sigma.size() != o_.size()) throw std::invalid_argument("AtomicMA: edge label dimension mismatch");
      validate_label(e.sigma);
      if (e.guard.dim() != nn) throw std::invalid_argument("AtomicMA: guard dimension mismatch");
    }
  }

  void build_cache() {
    const std::size_t nm = prims_.size();
    sigma_.assign(nm, {});
    for (const auto& e : edges_) {
      auto& v = sigma_[e.source];
      if (std::find(v.begin(), v.end(), e.sigma) == v.end()) v.push_back(e.sigma);
      guard_by_label_.emplace(std::make_pair(e.source, e.sigma), e.guard.to_region());
      guard_by_edge_.emplace(std::make_tuple(e.source, e.sigma, e.target), e.guard.to_region());
    }
    for (auto& v : sigma_) std::sort(v.begin(), v.end());

    for (std::size_t m = 0; m < nm; ++m) inv_.push_back(prims_[m].invariant.to_region());
    for (std::size_t m = 0; m < nm; ++m) {
      Region r = inv_[m];
      for (const auto& e : edges_) {
        if (e.source == m) r = r.subtract(e.guard.to_region());
      }
      inner_.push_back(std::move(r));
    }

    std::set<AugmentedEdge> aug;
    for (const auto& e : edges_) aug.insert({e.source, e.sigma, e.target});
    const Label eps(p(), 0);
    for (std::size_t m = 0; m < nm; ++m) {
      for (std::size_t t = 0; t < nm; ++t) {
        if (epsilon_admissible(m, t)) aug.insert({m, eps, t});
      }
    }
    aug_.assign(aug.begin(), aug.end());
    for (const auto& e : aug_) succ_bar_[{e.source, e.sigma}].push_back(e.target);
    sigma_bar_.assign(nm, {});
    for (std::size_t m = 0; m < nm; ++m) {
      sigma_bar_[m] = sigma_[m];
      if (!successors_bar(m, eps).empty()) sigma_bar_[m].push_back(eps);
      std::sort(sigma_bar_[m].begin(), sigma_bar_[m].end());
    }
  }

  bool epsilon_admissible(std::size_t m, std::size_t t) const {
    if (m == t) return true;
    if (!inner_[m].subset_of(inv_[t])) return false;
    for (const auto& e : edges_) {
      if (e.source == t && !inner_[m].disjoint(guard_by_label_.at({t, e.sigma}))) return false;
    }
    return true;
  }

  std::string name_;
  Matrix A_, B_;
  std::vector<std::size_t> o_;
  BoxGeometry box_;
  std::vector<MotionPrimitive> prims_;
  std::vector<MAEdge> edges_;

  std::vector<std::vector<Label>> sigma_;
  std::vector<std::vector<Label>> sigma_bar_;
  std::vector<Region> inv_;
  std::vector<Region> inner_;
  std::map<std::pair<std::size_t, Label>, Region> guard_by_label_;
  std::map<std::tuple<std::size_t, Label, std::size_t>, Region> guard_by_edge_;
  std::map<std::pair<std::size_t, Label>, std::vector<std::size_t>> succ_bar_;
  std::vector<AugmentedEdge> aug_;
};

// Nesting of a composed automaton: a leaf names one atomic component.
struct CompositionNode {
  int component = -1;
  std::vector<CompositionNode> children;
  bool leaf() const { return component >= 0; }
};

struct CompositeEdge {
  PrimitiveId source = 0;
  Label sigma;
  PrimitiveId target = 0;
  bool operator<(const CompositeEdge& o) const {
    return std::tie(source, sigma, target) < std::tie(o.source, o.sigma, o.target);
  }
  bool operator==(const CompositeEdge& o) const {
    return source == o.source && sigma == o.sigma && target == o.target;
  }
};

// A maneuver automaton as a parallel composition of atomic components.
// Primitives are tuples of component primitives, numbered in mixed radix
// with component 0 most significant. Edges are generated on demand from the
// components' augmented edge sets; nothing of size |M| is ever stored.
class ManeuverAutomaton {
 public:
  ManeuverAutomaton() = default;

  explicit ManeuverAutomaton(std::shared_ptr<const AtomicMA> atomic) {
    comps_.push_back(std::move(atomic));
    tree_.component = 0;
    finalize();
  }

  static ManeuverAutomaton compose(const ManeuverAutomaton& a, const ManeuverAutomaton& b) {
    ManeuverAutomaton out;
    out.comps_ = a.comps_;
    out.comps_.insert(out.comps_.end(), b.comps_.begin(), b.comps_.end());
    CompositionNode right = b.tree_;
    shift_tree(right, static_cast<int>(a.comps_.size()));
    out.tree_.children = {a.tree_, right};
    out.finalize();
    return out;
  }

  // Rebuilds a composition from its components and nesting; leaves must
  // name the components 0..k-1 in order.
  static ManeuverAutomaton from_parts(std::vector<std::shared_ptr<const AtomicMA>> comps, CompositionNode tree) {
    std::vector<int> leaves;
    std::vector<const CompositionNode*> stack{&tree};
    while (!stack.empty()) {
      const auto* n = stack.back();
      stack.pop_back();
      if (n->leaf()) {
        if (!n->children.empty()) throw std::invalid_argument("composition leaf with children");
        leaves.push_back(n->component);
      } else {
        if (n->children.size() != 2) throw std::invalid_argument("composition node needs two children");
        stack.push_back(&n->children[1]);
        stack.push_back(&n->children[0]);
      }
    }
    if (comps.empty() || leaves.size() != comps.size()) throw std::invalid_argument("composition leaf count mismatch");
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (leaves[i] != static_cast<int>(i)) throw std::invalid_argument("composition leaves out of order");
    }
    ManeuverAutomaton out;
    out.comps_ = std::move(comps);
    out.tree_ = std::move(tree);
    out.finalize();
    return out;
  }

  std::size_t num_components() const { return comps_.size(); }
  const AtomicMA& component(std::size_t j) const { return *comps_.at(j); }
  const std::shared_ptr<const AtomicMA>& component_ptr(std::size_t j) const { return comps_.at(j); }
  const CompositionNode& tree() const { return tree_; }

  std::size_t n() const { return n_; }
  std::size_t p() const { return p_; }
  const std::vector<std::size_t>& output_index() const { return o_; }
  const BoxGeometry& box() const { return box_; }
  std::size_t state_offset(std::size_t j) const { return state_off_.at(j); }
  std::size_t output_offset(std::size_t j) const { return out_off_.at(j); }

  PrimitiveId num_primitives() const { return total_; }

  std::vector<std::size_t> decode(PrimitiveId m) const {
    if (m >= total_) throw std::out_of_range("unknown primitive id " + std::to_string(m));
    std::vector<std::size_t> out(comps_.size());
    for (std::size_t j = comps_.size(); j-- > 0;) {
      const auto r = comps_[j]->num_primitives();
      out[j] = static_cast<std::size_t>(m % r);
      m /= r;
    }
    return out;
  }

  PrimitiveId encode(const std::vector<std::size_t>& parts) const {
    if (parts.size() != comps_.size()) throw std::invalid_argument("encode: component count mismatch");
    PrimitiveId m = 0;
    for (std::size_t j = 0; j < comps_.size(); ++j) {
      if (parts[j] >= comps_[j]->num_primitives()) throw std::out_of_range("encode: primitive out of range");
      m = m * comps_[j]->num_primitives() + parts[j];
    }
    return m;
  }

  std::vector<std::string> primitive_names(PrimitiveId m) const {
    const auto parts = decode(m);
    std::vector<std::string> out;
    for (std::size_t j = 0; j < parts.size(); ++j) out.push_back(comps_[j]->primitives()[parts[j]].name);
    return out;
  }

  std::string primitive_name(PrimitiveId m) const {
    const auto names = primitive_names(m);
    if (names.size() == 1) return names[0];
    std::string out = "(";
    for (std::size_t j = 0; j < names.size(); ++j) out += (j ? "," : "") + names[j];
    return out + ")";
  }

  PrimitiveId primitive_by_names(const std::vector<std::string>& names) const {
    if (names.size() != comps_.size()) throw std::invalid_argument("primitive name count mismatch");
    std::vector<std::size_t> parts;
    for (std::size_t j = 0; j < names.size(); ++j) parts.push_back(comps_[j]->primitive_index(names[j]));
    return encode(parts);
  }

  Label component_label(const Label& s, std::size_t j) const {
    return Label(s.begin() + static_cast<long>(out_off_[j]),
                 s.begin() + static_cast<long>(out_off_[j] + comps_[j]->p()));
  }

  // Sigma_MA(m): product of augmented component labels minus epsilon, in
  // lexicographic order.
  std::vector<Label> sigma(PrimitiveId m) const {
    auto out = sigma_bar(m);
    out.erase(std::remove_if(out.begin(), out.end(), [](const Label& s) { return is_epsilon(s); }),
              out.end());
    return out;
  }

  std::vector<Label> sigma_bar(PrimitiveId m) const {
    const auto parts = decode(m);
    std::vector<Label> acc{Label{}};
    for (std::size_t j = 0; j < parts.size(); ++j) {
      std::vector<Label> next;
      for (const auto& pre : acc) {
        for (const auto& s : comps_[j]->sigma_bar(parts[j])) {
          Label l = pre;
          l.insert(l.end(), s.begin(), s.end());
          next.push_back(std::move(l));
        }
      }
      acc = std::move(next);
    }
    std::sort(acc.begin(), acc.end());
    return acc;
  }

  // Targets of (m, s, .) in ascending id order; s = epsilon gives the
  // augmented epsilon successors.
  std::vector<PrimitiveId> augmented_successors(PrimitiveId m, const Label& s) const {
    if (s.size() != p_) throw std::invalid_argument("label dimension mismatch");
    const auto parts = decode(m);
    std::vector<PrimitiveId> acc{0};
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const auto& succ = comps_[j]->successors_bar(parts[j], component_label(s, j));
      if (succ.empty()) return {};
      std::vector<PrimitiveId> next;
      next.reserve(acc.size() * succ.size());
      for (auto pre : acc) {
        for (auto t : succ) next.push_back(pre * comps_[j]->num_primitives() + t);
      }
      acc = std::move(next);
    }
    return acc;
  }

  std::vector<PrimitiveId> successors(PrimitiveId m, const Label& s) const {
    if (is_epsilon(s)) return {};
    return augmented_successors(m, s);
  }

  bool has_edge(PrimitiveId m, const Label& s, PrimitiveId t) const {
    if (is_epsilon(s) || s.size() != p_) return false;
    const auto a = decode(m);
    const auto b = decode(t);
    for (std::size_t j = 0; j < a.size(); ++j) {
      const auto& succ = comps_[j]->successors_bar(a[j], component_label(s, j));
      if (!std::binary_search(succ.begin(), succ.end(), b[j])) return false;
    }
    return true;
  }

  // All non-epsilon edges, sorted. Refuses when more than `limit` would be
  // produced.
  std::vector<CompositeEdge> enumerate_edges(std::size_t limit = 10'000'000) const {
    std::vector<CompositeEdge> out;
    for (PrimitiveId m = 0; m < total_; ++m) {
      for (const auto& s : sigma(m)) {
        for (auto t : successors(m, s)) {
          out.push_back({m, s, t});
          if (out.size() > limit) throw std::length_error("edge enumeration exceeds limit");
        }
      }
    }
    return out;
  }

  Cell invariant(PrimitiveId m) const {
    const auto parts = decode(m);
    Cell c;
    for (std::size_t j = 0; j < parts.size(); ++j) c.push_back(comps_[j]->invariant_region(parts[j]));
    return c;
  }

  // Guard of every edge (m, s, .), blockwise; epsilon blocks contribute the
  // component's inner invariant.
  Cell guard(PrimitiveId m, const Label& s) const {
    const auto parts = decode(m);
    Cell c;
    for (std::size_t j = 0; j < parts.size(); ++j) {
      c.push_back(comps_[j]->guard_region(parts[j], component_label(s, j)));
    }
    return c;
  }

  std::vector<Vector> split_state(const Vector& x) const {
    if (x.size() != n_) throw std::invalid_argument("state dimension mismatch");
    std::vector<Vector> out;
    for (std::size_t j = 0; j < comps_.size(); ++j) {
      out.emplace_back(x.begin() + static_cast<long>(state_off_[j]),
                       x.begin() + static_cast<long>(state_off_[j] + comps_[j]->n()));
    }
    return out;
  }

  Vector join_state(const std::vector<Vector>& blocks) const {
    Vector x;
    x.reserve(n_);
    for (const auto& b : blocks) x.insert(x.end(), b.begin(), b.end());
    return x;
  }

  Vector field(PrimitiveId m, const Vector& x) const {
    const auto parts = decode(m);
    Vector dx(n_);
    for (std::size_t j = 0; j < parts.size(); ++j) {
      Vector xj(x.begin() + static_cast<long>(state_off_[j]),
                x.begin() + static_cast<long>(state_off_[j] + comps_[j]->n()));
      const Vector dj = comps_[j]->field(parts[j], xj);
      std::copy(dj.begin(), dj.end(), dx.begin() + static_cast<long>(state_off_[j]));
    }
    return dx;
  }

  Vector label_shift(const Label& s) const {
    if (s.size() != p_) throw std::invalid_argument("label dimension mismatch");
    Vector out(n_, 0.0);
    for (std::size_t i = 0; i < p_; ++i) out[o_[i]] = box_.d[i] * s[i];
    return out;
  }

  Vector apply_reset(const Label& s, const Vector& x) const { return x - label_shift(s); }

  Vector outputs(const Vector& x) const {
    Vector y(p_);
    for (std::size_t i = 0; i < p_; ++i) y[i] = x[o_[i]];
    return y;
  }

  bool invariant_contains(PrimitiveId m, const Vector& x, double tol = kEpsGeo) const {
    const auto parts = decode(m);
    const auto blocks = split_state(x);
    for (std::size_t j = 0; j < parts.size(); ++j) {
      if (!comps_[j]->primitives()[parts[j]].invariant.contains(blocks[j], tol)) return false;
    }
    return true;
  }

 private:
  static void shift_tree(CompositionNode& node, int by) {
    if (node.leaf()) node.component += by;
    for (auto& c : node.children) shift_tree(c, by);
  }

  void finalize() {
    n_ = p_ = 0;
    total_ = 1;
    o_.clear();
    state_off_.clear();
    out_off_.clear();
    Vector d;
    for (const auto& c : comps_) {
      state_off_.push_back(n_);
      out_off_.push_back(p_);
      for (auto i : c->output_index()) o_.push_back(n_ + i);
      d.insert(d.end(), c->box().d.begin(), c->box().d.end());
      n_ += c->n();
      p_ += c->p();
      if (total_ > UINT64_MAX / c->num_primitives()) throw std::overflow_error("too many composite primitives");
      total_ *= c->num_primitives();
    }
    box_ = BoxGeometry(std::move(d));
  }

  std::vector<std::shared_ptr<const AtomicMA>> comps_;
  CompositionNode tree_;
  std::size_t n_ = 0;
  std::size_t p_ = 0;
  PrimitiveId total_ = 0;
  std::vector<std::size_t> o_;
  std::vector<std::size_t> state_off_;
  std::vector<std::size_t> out_off_;
  BoxGeometry box_;
};

// ---------------------------------------------------------------------------
// Double-integrator primitive family
// ---------------------------------------------------------------------------

struct DoubleIntegratorParams {
  double d = 1.0;
  double u_max = 1.0;
  double u_bar() const { return std::sqrt(d * u_max); }
};

namespace detail {

inline std::vector<Vector> di_vertices(const DoubleIntegratorParams& prm) {
  const double d = prm.d;
  const double ub = prm.u_bar();
  // Vertices v1..v6; index 0 is unused.
  return {{}, {0.0, -ub}, {0.0, 0.0}, {0.0, ub}, {d, -ub}, {d, 0.0}, {d, ub}};
}

inline void check_di_params(const DoubleIntegratorParams& prm) {
  if (!(prm.d > 0.0) || !(prm.u_max > 0.0)) {
    throw std::invalid_argument("double integrator: d and u_max must be positive");
  }
}

}  // namespace detail

// Hold (H), Forward (F) and Backward (B) over one axis. Primitive indices are
// H=0, F=1, B=2.
inline std::vector<MotionPrimitive> double_integrator_primitives(const DoubleIntegratorParams& prm) {
  detail::check_di_params(prm);
  const auto v = detail::di_vertices(prm);
  const double a = prm.u_max;
  const double ub = prm.u_bar();
  const std::vector<Vector> holes{v[2], v[5]};
  std::vector<MotionPrimitive> out;
  out.push_back({"H", Matrix(1, 2, {-2.0 * a / prm.d, -2.0 * a / ub}), {a},
                 PolytopicSet::hull_2d({v[2], v[3], v[4], v[5]}, holes)});
  out.push_back({"F", Matrix(1, 2, {0.0, -2.0 * a / ub}), {a},
                 PolytopicSet::hull_2d({v[2], v[3], v[6], v[4]}, holes)});
  out.push_back({"B", Matrix(1, 2, {0.0, -2.0 * a / ub}), {-a},
                 PolytopicSet::hull_2d({v[1], v[3], v[4], v[5]}, holes)});
  return out;
}

// Forward exit {d} x (0, u_bar] and backward exit {0} x [-u_bar, 0).
inline PolytopicSet di_forward_guard(const DoubleIntegratorParams& prm) {
  const auto v = detail::di_vertices(prm);
  return PolytopicSet::hull_2d({v[5], v[6]}, {v[5]});
}

inline PolytopicSet di_backward_guard(const DoubleIntegratorParams& prm) {
  const auto v = detail::di_vertices(prm);
  return PolytopicSet::hull_2d({v[1], v[2]}, {v[2]});
}

inline Matrix di_A() { return Matrix(2, 2, {0.0, 1.0, 0.0, 0.0}); }
inline Matrix di_B() { return Matrix(2, 1, {0.0, 1.0}); }

inline std::shared_ptr<const AtomicMA> build_double_integrator_atomic(const DoubleIntegratorParams& prm) {
  auto prims = double_integrator_primitives(prm);
  const auto fg = di_forward_guard(prm);
  const auto bg = di_backward_guard(prm);
  std::vector<MAEdge> edges{
      {1, {1}, 0, fg},
      {1, {1}, 1, fg},
      {2, {-1}, 0, bg},
      {2, {-1}, 2, bg},
  };
  return std::make_shared<const AtomicMA>("double_integrator", di_A(), di_B(), std::vector<std::size_t>{0},
                                          BoxGeometry({prm.d}), std::move(prims), std::move(edges));
}

inline ManeuverAutomaton build_double_integrator_ma(double d, double u_max) {
  return ManeuverAutomaton(build_double_integrator_atomic({d, u_max}));
}

// Double integrator plus direct reversals (F,1,B) and (B,-1,F), as in the
// three-box worked example. Only its discrete structure is meant to be used.
inline ManeuverAutomaton build_turnaround_ma(double d, double u_max) {
  const DoubleIntegratorParams prm{d, u_max};
  auto prims = double_integrator_primitives(prm);
  const auto fg = di_forward_guard(prm);
  const auto bg = di_backward_guard(prm);
  std::vector<MAEdge> edges{
      {1, {1}, 0, fg}, {1, {1}, 1, fg}, {1, {1}, 2, fg},
      {2, {-1}, 0, bg}, {2, {-1}, 1, bg}, {2, {-1}, 2, bg},
  };
  return ManeuverAutomaton(std::make_shared<const AtomicMA>("turnaround", di_A(), di_B(),
                                                            std::vector<std::size_t>{0}, BoxGeometry({prm.d}),
                                                            std::move(prims), std::move(edges)));
}

inline std::vector<Label> sigma_ma(const ManeuverAutomaton& ma, PrimitiveId m) { return ma.sigma(m); }

// Reset of an atomic edge. In checked mode a point outside the guard is an
// error.
inline Vector apply_reset(const AtomicMA& ma, const MAEdge& e, const Vector& x, bool checked = false) {
  if (checked && !e.guard.contains(x)) {
    throw std::domain_error("apply_reset: state is not in the guard of the edge");
  }
  return ma.apply_reset(e.sigma, x);
}

inline Vector closed_loop_field(const ManeuverAutomaton& ma, PrimitiveId m, const Vector& x) {
  return ma.field(m, x);
}

}  // namespace hybridplan
