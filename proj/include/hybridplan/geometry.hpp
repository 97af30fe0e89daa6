#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hybridplan/linalg.hpp"

namespace hybridplan {

inline constexpr double kEpsGeo = 1e-9;

// a.x <= b, or a.x < b when strict. Normals are kept at unit length so that
// margins are distances.
struct Halfspace {
  Vector normal;
  double offset = 0.0;
  bool strict = false;

  static Halfspace make(Vector a, double b, bool strict = false) {
    const double len = norm(a);
    if (len == 0.0) throw std::invalid_argument("Halfspace: zero normal");
    for (auto& v : a) v /= len;
    return Halfspace{std::move(a), b / len, strict};
  }

  double margin(const Vector& x) const { return offset - dot(normal, x); }

  bool contains(const Vector& x, double tol = kEpsGeo) const {
    const double m = margin(x);
    return strict ? m > tol : m >= -tol;
  }

  Halfspace negated() const {
    Vector a = normal;
    for (auto& v : a) v = -v;
    return Halfspace{std::move(a), -offset, !strict};
  }

  // Image of the set under x -> x + shift.
  Halfspace translated(const Vector& shift) const {
    return Halfspace{normal, offset + dot(normal, shift), strict};
  }

  bool operator==(const Halfspace& o) const {
    return normal == o.normal && offset == o.offset && strict == o.strict;
  }
};

// Intersection of halfspaces in R^dim. An empty halfspace list is all of R^dim.
class ConvexPiece {
 public:
  ConvexPiece() = default;
  explicit ConvexPiece(std::size_t dim) : dim_(dim) {}
  ConvexPiece(std::size_t dim, std::vector<Halfspace> hs) : dim_(dim), hs_(std::move(hs)) {
    for (const auto& h : hs_) {
      if (h.normal.size() != dim_) throw std::invalid_argument("ConvexPiece: dimension mismatch");
    }
  }

  static ConvexPiece point(const Vector& p) {
    ConvexPiece out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      Vector e(p.size(), 0.0);
      e[i] = 1.0;
      out.hs_.push_back(Halfspace{e, p[i], false});
      e[i] = -1.0;
      out.hs_.push_back(Halfspace{e, -p[i], false});
    }
    return out;
  }

  std::size_t dim() const { return dim_; }
  const std::vector<Halfspace>& halfspaces() const { return hs_; }

  void add(const Halfspace& h) {
    if (h.normal.size() != dim_) throw std::invalid_argument("ConvexPiece: dimension mismatch");
    for (const auto& e : hs_) {
      if (e == h) return;
    }
    hs_.push_back(h);
  }

  bool contains(const Vector& x, double tol = kEpsGeo) const {
    for (const auto& h : hs_) {
      if (!h.contains(x, tol)) return false;
    }
    return true;
  }

  ConvexPiece intersect(const ConvexPiece& o) const {
    ConvexPiece out = *this;
    for (const auto& h : o.hs_) out.add(h);
    return out;
  }

  ConvexPiece translated(const Vector& shift) const {
    ConvexPiece out(dim_);
    for (const auto& h : hs_) out.hs_.push_back(h.translated(shift));
    return out;
  }

  // Largest uniform slack t <= 1 available on the strict rows, with the
  // non-strict rows held exactly. Returns nullopt when the closed relaxation
  // is infeasible.
  std::optional<double> strict_slack() const {
    bool any_strict = false;
    for (const auto& h : hs_) any_strict = any_strict || h.strict;
    const std::size_t nv = 2 * dim_ + 1;
    Matrix a(hs_.size() + 1, nv, 0.0);
    Vector b(hs_.size() + 1, 0.0);
    for (std::size_t r = 0; r < hs_.size(); ++r) {
      for (std::size_t j = 0; j < dim_; ++j) {
        a(r, j) = hs_[r].normal[j];
        a(r, dim_ + j) = -hs_[r].normal[j];
      }
      if (hs_[r].strict) a(r, 2 * dim_) = 1.0;
      b[r] = hs_[r].offset;
    }
    a(hs_.size(), 2 * dim_) = 1.0;
    b[hs_.size()] = 1.0;
    Vector c(nv, 0.0);
    if (any_strict) c[2 * dim_] = 1.0;
    const LpResult r = solve_lp(a, b, c);
    if (r.status != LpStatus::optimal) return std::nullopt;
    return any_strict ? r.value : 1.0;
  }

  bool empty() const {
    if (hs_.empty()) return false;
    const auto slack = strict_slack();
    return !slack || *slack <= kEpsGeo;
  }

  // Some point of the piece, preferring interior ones.
  std::optional<Vector> witness() const {
    if (hs_.empty()) return Vector(dim_, 0.0);
    const std::size_t nv = 2 * dim_ + 1;
    Matrix a(hs_.size() + 1, nv, 0.0);
    Vector b(hs_.size() + 1, 0.0);
    for (std::size_t r = 0; r < hs_.size(); ++r) {
      for (std::size_t j = 0; j < dim_; ++j) {
        a(r, j) = hs_[r].normal[j];
        a(r, dim_ + j) = -hs_[r].normal[j];
      }
      if (hs_[r].strict) a(r, 2 * dim_) = 1.0;
      b[r] = hs_[r].offset;
    }
    a(hs_.size(), 2 * dim_) = 1.0;
    b[hs_.size()] = 1.0;
    Vector c(nv, 0.0);
    c[2 * dim_] = 1.0;
    const LpResult r = solve_lp(a, b, c);
    if (r.status != LpStatus::optimal) return std::nullopt;
    Vector x(dim_);
    for (std::size_t j = 0; j < dim_; ++j) x[j] = r.solution[j] - r.solution[dim_ + j];
    return x;
  }

  // Range of coordinate i over the closure. Unbounded sides come back infinite.
  std::pair<double, double> coordinate_range(std::size_t i) const {
    auto extreme = [&](double sign) {
      const std::size_t nv = 2 * dim_;
      Matrix a(hs_.size(), nv, 0.0);
      Vector b(hs_.size(), 0.0);
      for (std::size_t r = 0; r < hs_.size(); ++r) {
        for (std::size_t j = 0; j < dim_; ++j) {
          a(r, j) = hs_[r].normal[j];
          a(r, dim_ + j) = -hs_[r].normal[j];
        }
        b[r] = hs_[r].offset;
      }
      Vector c(nv, 0.0);
      c[i] = sign;
      c[dim_ + i] = -sign;
      const LpResult r = solve_lp(a, b, c);
      if (r.status == LpStatus::unbounded) return std::numeric_limits<double>::infinity();
      if (r.status == LpStatus::infeasible) return std::numeric_limits<double>::quiet_NaN();
      return r.value;
    };
    return {-extreme(-1.0), extreme(1.0)};
  }

  // this \ o as a list of pieces (not yet filtered for emptiness).
  std::vector<ConvexPiece> subtract(const ConvexPiece& o) const {
    std::vector<ConvexPiece> out;
    ConvexPiece prefix = *this;
    for (const auto& h : o.hs_) {
      ConvexPiece p = prefix;
      p.add(h.negated());
      out.push_back(std::move(p));
      prefix.add(h);
    }
    return out;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<Halfspace> hs_;
};

// Finite union of convex pieces in one state block.
class Region {
 public:
  Region() = default;
  explicit Region(std::size_t dim) : dim_(dim) {}
  Region(std::size_t dim, std::vector<ConvexPiece> pieces) : dim_(dim) {
    for (auto& p : pieces) {
      if (p.dim() != dim_) throw std::invalid_argument("Region: dimension mismatch");
      if (!p.empty()) pieces_.push_back(std::move(p));
    }
  }
  explicit Region(ConvexPiece piece) : dim_(piece.dim()) {
    if (!piece.empty()) pieces_.push_back(std::move(piece));
  }

  static Region universe(std::size_t dim) { return Region(ConvexPiece(dim)); }

  std::size_t dim() const { return dim_; }
  const std::vector<ConvexPiece>& pieces() const { return pieces_; }
  bool empty() const { return pieces_.empty(); }

  bool contains(const Vector& x, double tol = kEpsGeo) const {
    for (const auto& p : pieces_) {
      if (p.contains(x, tol)) return true;
    }
    return false;
  }

  Region intersect(const Region& o) const {
    check_dim(o);
    std::vector<ConvexPiece> out;
    for (const auto& a : pieces_) {
      for (const auto& b : o.pieces_) out.push_back(a.intersect(b));
    }
    return Region(dim_, std::move(out));
  }

  Region unite(const Region& o) const {
    check_dim(o);
    Region out = *this;
    for (const auto& p : o.pieces_) out.pieces_.push_back(p);
    return out;
  }

  Region subtract(const Region& o) const {
    check_dim(o);
    std::vector<ConvexPiece> cur = pieces_;
    for (const auto& q : o.pieces_) {
      std::vector<ConvexPiece> next;
      for (const auto& p : cur) {
        for (auto& r : p.subtract(q)) {
          if (!r.empty()) next.push_back(std::move(r));
        }
      }
      cur = std::move(next);
      if (cur.empty()) break;
    }
    Region out(dim_);
    out.pieces_ = std::move(cur);
    return out;
  }

  Region translated(const Vector& shift) const {
    Region out(dim_);
    for (const auto& p : pieces_) out.pieces_.push_back(p.translated(shift));
    return out;
  }

  bool subset_of(const Region& o) const { return subtract(o).empty(); }
  bool disjoint(const Region& o) const { return intersect(o).empty(); }
  bool same_set(const Region& o) const { return subset_of(o) && o.subset_of(*this); }

  std::optional<Vector> witness() const {
    for (const auto& p : pieces_) {
      if (auto w = p.witness()) return w;
    }
    return std::nullopt;
  }

 private:
  void check_dim(const Region& o) const {
    if (o.dim_ != dim_) throw std::invalid_argument("Region: dimension mismatch");
  }

  std::size_t dim_ = 0;
  std::vector<ConvexPiece> pieces_;
};

// Closed polytope with a finite list of removed points. This is the storage
// form of invariants and guards; Region is the algebra form.
class PolytopicSet {
 public:
  PolytopicSet() = default;
  PolytopicSet(std::size_t dim, std::vector<Halfspace> hs, std::vector<Vector> excluded = {})
      : dim_(dim), hs_(std::move(hs)), excluded_(std::move(excluded)) {
    for (const auto& h : hs_) {
      if (h.normal.size() != dim_) throw std::invalid_argument("PolytopicSet: dimension mismatch");
    }
    for (const auto& p : excluded_) {
      if (p.size() != dim_) throw std::invalid_argument("PolytopicSet: dimension mismatch");
    }
  }

  // Convex hull of planar points. Degenerate hulls (segments, points) come out
  // as the matching lower-dimensional set.
  static PolytopicSet hull_2d(std::vector<Vector> pts, std::vector<Vector> excluded = {});

  std::size_t dim() const { return dim_; }
  const std::vector<Halfspace>& halfspaces() const { return hs_; }
  const std::vector<Vector>& excluded() const { return excluded_; }

  bool contains(const Vector& x, double tol = kEpsGeo) const {
    for (const auto& h : hs_) {
      if (!h.contains(x, tol)) return false;
    }
    for (const auto& p : excluded_) {
      if (norm(x - p) <= tol) return false;
    }
    return true;
  }

  // Membership in the closed hull only.
  bool hull_contains(const Vector& x, double tol) const {
    for (const auto& h : hs_) {
      if (h.margin(x) < -tol) return false;
    }
    return true;
  }

  Region to_region() const {
    Region r(ConvexPiece(dim_, hs_));
    for (const auto& p : excluded_) r = r.subtract(Region(ConvexPiece::point(p)));
    return r;
  }

  bool bounded() const {
    const ConvexPiece piece(dim_, hs_);
    for (std::size_t i = 0; i < dim_; ++i) {
      const auto [lo, hi] = piece.coordinate_range(i);
      if (!std::isfinite(lo) || !std::isfinite(hi)) return false;
    }
    return true;
  }

  std::vector<std::pair<double, double>> bounding_box() const {
    const ConvexPiece piece(dim_, hs_);
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < dim_; ++i) out.push_back(piece.coordinate_range(i));
    return out;
  }

  bool operator==(const PolytopicSet& o) const {
    return dim_ == o.dim_ && hs_ == o.hs_ && excluded_ == o.excluded_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<Halfspace> hs_;
  std::vector<Vector> excluded_;
};

inline PolytopicSet PolytopicSet::hull_2d(std::vector<Vector> pts, std::vector<Vector> excluded) {
  for (const auto& p : pts) {
    if (p.size() != 2) throw std::invalid_argument("hull_2d: points must be planar");
  }
  if (pts.empty()) throw std::invalid_argument("hull_2d: no points");
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  auto cross = [](const Vector& o, const Vector& a, const Vector& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<Vector> hull;
  if (pts.size() >= 3) {
    std::vector<Vector> h(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
      h[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
      while (k >= t && cross(h[k - 2], h[k - 1], pts[i - 1]) <= 0) --k;
      h[k++] = pts[i - 1];
    }
    h.resize(k - 1);
    hull = std::move(h);
  } else {
    hull = pts;
  }

  std::vector<Halfspace> hs;
  if (hull.size() >= 3) {
    // Counter-clockwise order: the outward normal of edge (a,b) is (dy, -dx).
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const Vector& a = hull[i];
      const Vector& b = hull[(i + 1) % hull.size()];
      Vector n{b[1] - a[1], a[0] - b[0]};
      hs.push_back(Halfspace::make(n, n[0] * a[0] + n[1] * a[1]));
    }
  } else if (hull.size() == 2) {
    const Vector& a = hull[0];
    const Vector& b = hull[1];
    Vector n{b[1] - a[1], a[0] - b[0]};
    const double off = n[0] * a[0] + n[1] * a[1];
    hs.push_back(Halfspace::make(n, off));
    hs.push_back(Halfspace::make(Vector{-n[0], -n[1]}, -off));
    Vector t{b[0] - a[0], b[1] - a[1]};
    hs.push_back(Halfspace::make(t, t[0] * b[0] + t[1] * b[1]));
    hs.push_back(Halfspace::make(Vector{-t[0], -t[1]}, -(t[0] * a[0] + t[1] * a[1])));
  } else {
    return PolytopicSet(2, ConvexPiece::point(hull[0]).halfspaces(), std::move(excluded));
  }
  return PolytopicSet(2, std::move(hs), std::move(excluded));
}

// Cartesian product of per-block regions. Empty when any block is empty.
using Cell = std::vector<Region>;

inline bool cell_empty(const Cell& c) {
  for (const auto& r : c) {
    if (r.empty()) return true;
  }
  return false;
}

inline Cell cell_intersect(const Cell& a, const Cell& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cell_intersect: block mismatch");
  Cell out;
  out.reserve(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out.push_back(a[j].intersect(b[j]));
  return out;
}

inline bool cell_contains(const Cell& c, const std::vector<Vector>& blocks, double tol = kEpsGeo) {
  for (std::size_t j = 0; j < c.size(); ++j) {
    if (!c[j].contains(blocks[j], tol)) return false;
  }
  return true;
}

// Union of cells. Stays factored per block; differences are expanded with the
// telescoping rule A\B = (A1\B1)xA2.. u (A1nB1)x(A2\B2)x.. u ...
class ProductSet {
 public:
  ProductSet() = default;
  explicit ProductSet(std::vector<std::size_t> block_dims) : dims_(std::move(block_dims)) {}
  explicit ProductSet(Cell c) {
    for (const auto& r : c) dims_.push_back(r.dim());
    if (!cell_empty(c)) cells_.push_back(std::move(c));
  }

  const std::vector<std::size_t>& block_dims() const { return dims_; }
  const std::vector<Cell>& cells() const { return cells_; }
  bool empty() const { return cells_.empty(); }

  void add(Cell c) {
    if (c.size() != dims_.size()) throw std::invalid_argument("ProductSet: block mismatch");
    if (!cell_empty(c)) cells_.push_back(std::move(c));
  }

  bool contains(const std::vector<Vector>& blocks, double tol = kEpsGeo) const {
    for (const auto& c : cells_) {
      if (cell_contains(c, blocks, tol)) return true;
    }
    return false;
  }

  ProductSet unite(const ProductSet& o) const {
    ProductSet out = *this;
    for (const auto& c : o.cells_) out.add(c);
    return out;
  }

  ProductSet intersect(const ProductSet& o) const {
    ProductSet out(dims_);
    for (const auto& a : cells_) {
      for (const auto& b : o.cells_) out.add(cell_intersect(a, b));
    }
    return out;
  }

  ProductSet subtract(const ProductSet& o) const {
    std::vector<Cell> cur = cells_;
    for (const auto& b : o.cells_) {
      std::vector<Cell> next;
      for (const auto& a : cur) {
        Cell common = a;
        for (std::size_t j = 0; j < a.size(); ++j) {
          Cell piece = common;
          piece[j] = a[j].subtract(b[j]);
          if (!cell_empty(piece)) next.push_back(std::move(piece));
          common[j] = a[j].intersect(b[j]);
          if (common[j].empty()) break;
        }
      }
      cur = std::move(next);
    }
    ProductSet out(dims_);
    out.cells_ = std::move(cur);
    return out;
  }

  bool subset_of(const ProductSet& o) const { return subtract(o).empty(); }
  bool same_set(const ProductSet& o) const { return subset_of(o) && o.subset_of(*this); }
  bool disjoint(const ProductSet& o) const { return intersect(o).empty(); }

 private:
  std::vector<std::size_t> dims_;
  std::vector<Cell> cells_;
};

}  // namespace hybridplan
