#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybridplan {

using Vector = std::vector<double>;

// Dense row-major matrix. Sizes here are tiny (a handful of states per
// component), so nothing fancier is warranted.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("Matrix: data size does not match shape");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  const std::vector<double>& data() const { return data_; }

  Vector operator*(const Vector& x) const {
    if (x.size() != cols_) {
      throw std::invalid_argument("Matrix*Vector: dimension mismatch");
    }
    Vector y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) acc += (*this)(r, c) * x[c];
      y[r] = acc;
    }
    return y;
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(const Vector& a, const Vector& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

inline Vector operator+(Vector a, const Vector& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Vector operator-(Vector a, const Vector& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

inline Vector operator*(double s, Vector a) {
  for (auto& v : a) v *= s;
  return a;
}

// ---------------------------------------------------------------------------
// Linear programming
// ---------------------------------------------------------------------------

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double value = 0.0;
  Vector solution;
};

// maximize c.z  subject to  A z <= b,  z >= 0.
//
// Two-phase dense tableau simplex with Bland's rule. The problems handed to
// it by the geometry layer have at most a few dozen rows, so the O(m n)
// pivots are irrelevant next to robustness against cycling.
inline LpResult solve_lp(const Matrix& a, const Vector& b, const Vector& c) {
  constexpr double kPivotTol = 1e-12;
  constexpr double kFeasTol = 1e-10;
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (b.size() != m || c.size() != n) {
    throw std::invalid_argument("solve_lp: dimension mismatch");
  }

  // Columns: n structural, m slack, m artificial, then rhs.
  const std::size_t n_art_start = n + m;
  const std::size_t n_cols = n + 2 * m;
  const std::size_t rhs = n_cols;
  std::vector<Vector> t(m + 1, Vector(n_cols + 1, 0.0));
  std::vector<std::size_t> basis(m);
  std::vector<bool> artificial_used(m, false);

  for (std::size_t i = 0; i < m; ++i) {
    const double sign = b[i] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) t[i][j] = sign * a(i, j);
    t[i][n + i] = sign;
    t[i][rhs] = sign * b[i];
    if (sign < 0.0) {
      t[i][n_art_start + i] = 1.0;
      basis[i] = n_art_start + i;
      artificial_used[i] = true;
    } else {
      basis[i] = n + i;
    }
  }

  auto pivot = [&](std::size_t row, std::size_t col) {
    const double p = t[row][col];
    for (auto& v : t[row]) v /= p;
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == row) continue;
      const double f = t[i][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= n_cols; ++j) t[i][j] -= f * t[row][j];
    }
    basis[row] = col;
  };

  // Objective row holds reduced costs of "maximize" form: we pick entering
  // columns with negative entries in row m (standard z - c form).
  auto run = [&](std::size_t allowed_cols) -> bool {
    for (std::size_t iter = 0; iter < 100000; ++iter) {
      std::size_t enter = allowed_cols;
      for (std::size_t j = 0; j < allowed_cols; ++j) {
        if (t[m][j] < -kPivotTol) {
          enter = j;
          break;
        }
      }
      if (enter == allowed_cols) return true;
      std::size_t leave = m;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) {
        if (t[i][enter] > kPivotTol) {
          const double ratio = t[i][rhs] / t[i][enter];
          if (ratio < best_ratio - 1e-15 ||
              (std::abs(ratio - best_ratio) <= 1e-15 && leave < m &&
               basis[i] < basis[leave])) {
            best_ratio = ratio;
            leave = i;
          }
        }
      }
      if (leave == m) return false;  // unbounded
      pivot(leave, enter);
    }
    throw std::runtime_error("solve_lp: iteration limit reached");
  };

  // Phase 1: maximize -sum(artificial).
  bool any_art = std::find(artificial_used.begin(), artificial_used.end(), true) !=
                 artificial_used.end();
  if (any_art) {
    std::fill(t[m].begin(), t[m].end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (!artificial_used[i]) continue;
      t[m][n_art_start + i] = 1.0;
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (basis[i] >= n_art_start) {
        for (std::size_t j = 0; j <= n_cols; ++j) t[m][j] -= t[i][j];
      }
    }
    run(n_cols);
    if (t[m][rhs] < -kFeasTol) return LpResult{LpStatus::infeasible, 0.0, {}};
    // Drive artificial variables out of the basis.
    for (std::size_t i = 0; i < m; ++i) {
      if (basis[i] < n_art_start) continue;
      for (std::size_t j = 0; j < n_art_start; ++j) {
        if (std::abs(t[i][j]) > 1e-9) {
          pivot(i, j);
          break;
        }
      }
    }
  }

  // Phase 2.
  std::fill(t[m].begin(), t[m].end(), 0.0);
  for (std::size_t j = 0; j < n; ++j) t[m][j] = -c[j];
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t bj = basis[i];
    if (bj < n && c[bj] != 0.0) {
      const double f = t[m][bj];
      for (std::size_t j = 0; j <= n_cols; ++j) t[m][j] -= f * t[i][j];
    }
  }
  // Artificial columns are frozen at zero from here on.
  for (std::size_t i = 0; i <= m; ++i) {
    for (std::size_t j = n_art_start; j < n_cols; ++j) {
      if (i < m && basis[i] == j) continue;
      t[i][j] = 0.0;
    }
  }
  if (!run(n_art_start)) return LpResult{LpStatus::unbounded, 0.0, {}};

  LpResult out;
  out.status = LpStatus::optimal;
  out.solution.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < n) out.solution[basis[i]] = t[i][rhs];
  }
  out.value = t[m][rhs];
  return out;
}

}  // namespace hybridplan
