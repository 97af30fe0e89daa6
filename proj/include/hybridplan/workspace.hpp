#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridplan/ma_core.hpp"

namespace hybridplan {

using Box = std::vector<int>;
// Joint location: vehicle-major concatenation of per-vehicle box coordinates.
using Location = std::vector<int>;
using LocationCode = std::uint64_t;

inline std::string box_to_string(const Box& b) {
  std::string s = "[";
  for (std::size_t i = 0; i < b.size(); ++i) s += (i ? "," : "") + std::to_string(b[i]);
  return s + "]";
}

struct GridSpec {
  std::vector<int> counts;  // boxes per axis
  Vector d;                 // box length per axis
  std::vector<Box> obstacles;
  std::vector<Box> starts;  // per vehicle; may be empty
  std::vector<Box> goals;   // per vehicle

  std::size_t axes() const { return counts.size(); }
  std::size_t vehicles() const { return goals.size(); }
  std::size_t p() const { return axes() * vehicles(); }

  bool in_bounds(const Box& b) const {
    if (b.size() != counts.size()) return false;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (b[i] < 0 || b[i] >= counts[i]) return false;
    }
    return true;
  }

  void validate() const {
    if (counts.empty()) throw std::invalid_argument("grid: no axes");
    for (int c : counts) {
      if (c < 1) throw std::invalid_argument("grid: box counts must be at least 1");
    }
    if (d.size() != counts.size()) throw std::invalid_argument("grid: need one box length per axis");
    for (double v : d) {
      if (!(v > 0.0)) throw std::invalid_argument("grid: box lengths must be positive");
    }
    for (const auto& o : obstacles) {
      if (!in_bounds(o)) throw std::invalid_argument("grid: obstacle " + box_to_string(o) + " out of bounds");
    }
    if (goals.empty()) throw std::invalid_argument("grid: no vehicles");
    if (!starts.empty() && starts.size() != goals.size()) {
      throw std::invalid_argument("grid: starts and goals disagree on the vehicle count");
    }
    std::set<Box> obs(obstacles.begin(), obstacles.end());
    for (std::size_t v = 0; v < goals.size(); ++v) {
      if (!in_bounds(goals[v])) throw std::invalid_argument("grid: goal of vehicle " + std::to_string(v) + " out of bounds");
      if (obs.count(goals[v])) throw std::invalid_argument("grid: goal of vehicle " + std::to_string(v) + " is an obstacle");
    }
    for (std::size_t v = 0; v < starts.size(); ++v) {
      if (!in_bounds(starts[v])) throw std::invalid_argument("grid: start of vehicle " + std::to_string(v) + " out of bounds");
      if (obs.count(starts[v])) throw std::invalid_argument("grid: start of vehicle " + std::to_string(v) + " is an obstacle");
    }
  }
};

// Gridded workspace for N vehicles. Boxes are numbered in mixed radix with
// axis 0 most significant; joint codes put vehicle 0 most significant, so
// code order is lexicographic order of locations.
class Workspace {
 public:
  explicit Workspace(GridSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    nb_ = 1;
    for (int c : spec_.counts) nb_ *= static_cast<std::uint64_t>(c);
    free_.assign(nb_, 1);
    for (const auto& o : spec_.obstacles) free_[box_index(o)] = 0;
    total_ = 1;
    for (std::size_t v = 0; v < spec_.vehicles(); ++v) {
      if (total_ > UINT64_MAX / nb_) throw std::overflow_error("workspace: joint location space too large");
      total_ *= nb_;
    }
  }

  const GridSpec& spec() const { return spec_; }
  std::size_t axes() const { return spec_.axes(); }
  std::size_t vehicles() const { return spec_.vehicles(); }
  std::size_t p() const { return spec_.p(); }
  std::uint64_t boxes_per_vehicle() const { return nb_; }
  std::uint64_t location_space_size() const { return total_; }

  std::uint64_t box_index(const Box& b) const {
    std::uint64_t idx = 0;
    for (std::size_t i = 0; i < b.size(); ++i) idx = idx * static_cast<std::uint64_t>(spec_.counts[i]) + b[i];
    return idx;
  }

  Box box_at(std::uint64_t idx) const {
    Box b(axes());
    for (std::size_t i = axes(); i-- > 0;) {
      b[i] = static_cast<int>(idx % spec_.counts[i]);
      idx /= spec_.counts[i];
    }
    return b;
  }

  bool box_free(const Box& b) const { return spec_.in_bounds(b) && free_[box_index(b)]; }

  std::vector<Box> safe_boxes() const {
    std::vector<Box> out;
    for (std::uint64_t i = 0; i < nb_; ++i) {
      if (free_[i]) out.push_back(box_at(i));
    }
    return out;
  }

  Box vehicle_box(const Location& l, std::size_t v) const {
    return Box(l.begin() + static_cast<long>(v * axes()), l.begin() + static_cast<long>((v + 1) * axes()));
  }

  // Two vehicles conflict when they share a box, or on 3-axis grids when
  // they are stacked vertically (same x and y).
  bool vehicles_conflict(const int* a, const int* b) const {
    const std::size_t k = axes();
    const std::size_t compare = k == 3 ? 2 : k;
    for (std::size_t i = 0; i < compare; ++i) {
      if (a[i] != b[i]) return false;
    }
    return true;
  }

  bool joint_location_safe(const Location& l) const {
    if (l.size() != p()) throw std::invalid_argument("joint_location_safe: dimension mismatch");
    const std::size_t k = axes();
    for (std::size_t v = 0; v < vehicles(); ++v) {
      const int* bv = l.data() + v * k;
      for (std::size_t i = 0; i < k; ++i) {
        if (bv[i] < 0 || bv[i] >= spec_.counts[i]) return false;
      }
      std::uint64_t idx = 0;
      for (std::size_t i = 0; i < k; ++i) idx = idx * static_cast<std::uint64_t>(spec_.counts[i]) + bv[i];
      if (!free_[idx]) return false;
      for (std::size_t w = 0; w < v; ++w) {
        if (vehicles_conflict(bv, l.data() + w * k)) return false;
      }
    }
    return true;
  }

  LocationCode encode(const Location& l) const {
    LocationCode c = 0;
    for (std::size_t v = 0; v < vehicles(); ++v) c = c * nb_ + box_index(vehicle_box(l, v));
    return c;
  }

  Location decode(LocationCode c) const {
    Location l(p());
    for (std::size_t v = vehicles(); v-- > 0;) {
      const Box b = box_at(c % nb_);
      c /= nb_;
      std::copy(b.begin(), b.end(), l.begin() + static_cast<long>(v * axes()));
    }
    return l;
  }

  std::optional<Location> ots_successor(const Location& l, const Label& s) const {
    if (s.size() != p()) throw std::invalid_argument("ots_successor: dimension mismatch");
    if (is_epsilon(s)) return std::nullopt;
    Location n = l;
    for (std::size_t i = 0; i < n.size(); ++i) n[i] += s[i];
    if (!joint_location_safe(n)) return std::nullopt;
    return n;
  }

  bool is_goal(const Location& l) const {
    for (std::size_t v = 0; v < vehicles(); ++v) {
      if (vehicle_box(l, v) != spec_.goals[v]) return false;
    }
    return true;
  }

  Location goal_location() const {
    Location l;
    for (const auto& g : spec_.goals) l.insert(l.end(), g.begin(), g.end());
    return l;
  }

  Location start_location() const {
    if (spec_.starts.empty()) throw std::logic_error("scenario has no start boxes");
    Location l;
    for (const auto& s : spec_.starts) l.insert(l.end(), s.begin(), s.end());
    return l;
  }

  // All safe joint locations in ascending code order.
  std::vector<LocationCode> safe_locations(std::uint64_t budget = 50'000'000) const {
    std::vector<LocationCode> out;
    const auto free_boxes = safe_boxes();
    Location l(p());
    std::vector<std::size_t> pick(vehicles(), 0);
    // Depth-first over vehicles in order; boxes are already sorted by index.
    std::size_t v = 0;
    const std::size_t k = axes();
    while (true) {
      if (pick[v] == free_boxes.size()) {
        if (v == 0) break;
        pick[v] = 0;
        --v;
        ++pick[v];
        continue;
      }
      const Box& b = free_boxes[pick[v]];
      std::copy(b.begin(), b.end(), l.begin() + static_cast<long>(v * k));
      bool ok = true;
      for (std::size_t w = 0; w < v && ok; ++w) ok = !vehicles_conflict(l.data() + v * k, l.data() + w * k);
      if (!ok) {
        ++pick[v];
        continue;
      }
      if (v + 1 == vehicles()) {
        out.push_back(encode(l));
        if (out.size() > budget) throw std::length_error("safe location enumeration exceeds budget");
        ++pick[v];
      } else {
        ++v;
      }
    }
    return out;
  }

 private:
  GridSpec spec_;
  std::uint64_t nb_ = 1;
  std::uint64_t total_ = 1;
  std::vector<char> free_;
};

inline bool joint_location_safe(const Workspace& ws, const Location& l) { return ws.joint_location_safe(l); }

inline std::optional<Location> ots_successor(const Location& l, const Label& s, const Workspace& ws) {
  return ws.ots_successor(l, s);
}

// Every label in {-1,0,1}^p except epsilon, in lexicographic order.
inline std::vector<Label> all_nonzero_labels(std::size_t p) {
  std::vector<Label> out;
  Label s(p, -1);
  while (true) {
    if (!is_epsilon(s)) out.push_back(s);
    std::size_t i = p;
    while (i > 0) {
      --i;
      if (s[i] < 1) {
        ++s[i];
        break;
      }
      s[i] = -1;
      if (i == 0) return out;
    }
    if (p == 0) return out;
  }
}

struct OtsEdge {
  std::size_t from = 0;
  Label sigma;
  std::size_t to = 0;
};

struct OTS {
  std::vector<LocationCode> locations;  // ascending
  std::vector<OtsEdge> edges;
  std::vector<std::size_t> goals;       // indices into locations

  std::optional<std::size_t> index_of(LocationCode c) const {
    auto it = std::lower_bound(locations.begin(), locations.end(), c);
    if (it == locations.end() || *it != c) return std::nullopt;
    return static_cast<std::size_t>(it - locations.begin());
  }
};

// Explicit OTS over all safe joint locations and all offset labels.
inline OTS enumerate_ots(const Workspace& ws, std::uint64_t budget = 20'000'000) {
  OTS out;
  out.locations = ws.safe_locations(budget);
  const auto labels = all_nonzero_labels(ws.p());
  if (out.locations.size() * labels.size() > budget) {
    throw std::length_error("OTS exceeds budget; use lazy successors");
  }
  for (std::size_t i = 0; i < out.locations.size(); ++i) {
    const Location l = ws.decode(out.locations[i]);
    if (ws.is_goal(l)) out.goals.push_back(i);
    for (const auto& s : labels) {
      if (auto n = ws.ots_successor(l, s)) out.edges.push_back({i, s, *out.index_of(ws.encode(*n))});
    }
  }
  return out;
}

}  // namespace hybridplan
