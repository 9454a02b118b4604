#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mfgelec/errors.hpp"
#include "mfgelec/sparse.hpp"

namespace mfgelec {

/// maximize c.v  subject to  A v = b,  v >= 0.
struct LinearProgram {
  SparseMatrix A;
  std::vector<double> b;
  std::vector<double> c;
  std::vector<std::string> column_names;  ///< optional
  std::vector<std::string> row_names;     ///< optional

  std::size_t rows() const { return A.rows(); }
  std::size_t columns() const { return A.cols(); }

  void check() const {
    if (b.size() != A.rows()) throw InputError("LP right-hand side does not match the constraint rows");
    if (c.size() != A.cols()) throw InputError("LP objective does not match the constraint columns");
  }

  double objective(std::span<const double> v) const {
    double s = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) s += c[j] * v[j];
    return s;
  }

  /// min b.y over the dual; the dual is feasible when A^T y >= c.
  double dual_objective(std::span<const double> y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) s += b[i] * y[i];
    return s;
  }

  double primal_residual(std::span<const double> v) const {
    const auto Av = A.multiply(v);
    double r = 0.0;
    for (std::size_t i = 0; i < Av.size(); ++i) r = std::max(r, std::abs(Av[i] - b[i]));
    for (double x : v) r = std::max(r, -x);
    return r;
  }

  /// Largest violation of A^T y >= c.
  double dual_infeasibility(std::span<const double> y) const {
    const auto g = A.transpose_multiply(y);
    double r = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) r = std::max(r, c[j] - g[j]);
    return r;
  }

  /// max_j v_j * (A^T y - c)_j, zero at a complementary primal-dual pair.
  double complementarity(std::span<const double> v, std::span<const double> y) const {
    const auto g = A.transpose_multiply(y);
    double r = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) r = std::max(r, std::abs(v[j] * (g[j] - c[j])));
    return r;
  }
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

struct LpSolution {
  LpStatus status = LpStatus::optimal;
  std::vector<double> x;     ///< primal
  std::vector<double> y;     ///< row duals (empty when the backend does not expose them)
  double objective = 0.0;
  std::size_t iterations = 0;
};

class ConstraintSystem;
struct RewardField;

/// Solver interface. Backends that exploit the time-staircase structure of
/// the stopping LP override solve_stopping.
class LpBackend {
 public:
  virtual ~LpBackend() = default;
  virtual std::string name() const = 0;
  virtual LpSolution solve(const LinearProgram& lp) const = 0;
  virtual bool structured() const { return false; }
  virtual LpSolution solve_stopping(const ConstraintSystem&, const RewardField&) const {
    throw InputError(name() + " backend has no structured stopping solver");
  }
};

/// Two-phase tableau simplex for small dense problems. Dantzig pricing with a
/// switch to Bland's rule after a run of degenerate pivots.
class DenseSimplexBackend final : public LpBackend {
 public:
  struct Options {
    double tolerance = 1e-9;
    std::size_t max_iterations = 200000;
    std::size_t degenerate_run = 50;
    std::size_t max_cells = 40'000'000;  ///< tableau size guard
  };

  DenseSimplexBackend() = default;
  explicit DenseSimplexBackend(Options o) : opt_(o) {}

  std::string name() const override { return "simplex"; }

  LpSolution solve(const LinearProgram& lp) const override {
    lp.check();
    const std::size_t m = lp.rows(), n = lp.columns();
    const std::size_t width = n + m + 1;  // structural, artificial, rhs
    if ((m + 1) * width > opt_.max_cells)
      throw InputError("LP too large for the dense simplex backend (" + std::to_string(m) + " rows, " +
                       std::to_string(n) + " columns)");

    Tableau T{m, n, std::vector<double>((m + 1) * width, 0.0), std::vector<std::size_t>(m)};
    std::vector<double> sign(m, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (lp.b[i] < 0.0) sign[i] = -1.0;
      lp.A.for_row(i, [&](std::size_t j, double v) { T(i, j) = sign[i] * v; });
      T(i, n + i) = 1.0;
      T(i, n + m) = sign[i] * lp.b[i];
      T.basis[i] = n + i;
    }

    LpSolution out;
    // Phase 1: minimize the sum of artificials, i.e. maximize -sum.
    // Objective row holds reduced costs z_j - c_j for the max problem.
    for (std::size_t j = 0; j < width; ++j) {
      if (j >= n && j < n + m) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s -= T(i, j);
      T(m, j) = s;
    }
    const auto p1 = iterate(T, n + m, out.iterations);
    if (p1 == LpStatus::iteration_limit) return fail(out, p1);
    if (-T(m, n + m) > opt_.tolerance * scale(lp.b)) return fail(out, LpStatus::infeasible);

    // Drive remaining artificials out of the basis where possible.
    std::vector<bool> dead_row(m, false);
    for (std::size_t i = 0; i < m; ++i) {
      if (T.basis[i] < n) continue;
      std::size_t best = n;
      double big = opt_.tolerance;
      for (std::size_t j = 0; j < n; ++j)
        if (std::abs(T(i, j)) > big) big = std::abs(T(i, j)), best = j;
      if (best < n)
        T.pivot(i, best);
      else
        dead_row[i] = true;  // redundant row
    }

    // Phase 2 objective row.
    for (std::size_t j = 0; j < width; ++j) T(m, j) = 0.0;
    for (std::size_t j = 0; j < n; ++j) T(m, j) = -lp.c[j];
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t bj = T.basis[i];
      const double cb = bj < n ? lp.c[bj] : 0.0;
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < width; ++j) T(m, j) += cb * T(i, j);
    }
    const auto p2 = iterate(T, n, out.iterations);
    if (p2 != LpStatus::optimal) return fail(out, p2);

    out.status = LpStatus::optimal;
    out.x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      if (T.basis[i] < n) out.x[T.basis[i]] = std::max(0.0, T(i, n + m));
    out.y.resize(m);
    for (std::size_t i = 0; i < m; ++i) out.y[i] = dead_row[i] ? 0.0 : sign[i] * T(m, n + i);
    out.objective = lp.objective(out.x);
    return out;
  }

 private:
  struct Tableau {
    std::size_t m, n;
    std::vector<double> data;
    std::vector<std::size_t> basis;

    std::size_t width() const { return n + m + 1; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * width() + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * width() + j]; }

    void pivot(std::size_t r, std::size_t c) {
      const std::size_t w = width();
      double* pr = &data[r * w];
      const double p = pr[c];
      for (std::size_t j = 0; j < w; ++j) pr[j] /= p;
      pr[c] = 1.0;
      for (std::size_t i = 0; i <= m; ++i) {
        if (i == r) continue;
        double* pi = &data[i * w];
        const double f = pi[c];
        if (f == 0.0) continue;
        for (std::size_t j = 0; j < w; ++j) pi[j] -= f * pr[j];
        pi[c] = 0.0;
      }
      basis[r] = c;
    }
  };

  static double scale(const std::vector<double>& b) {
    double s = 1.0;
    for (double v : b) s = std::max(s, std::abs(v));
    return s;
  }

  static LpSolution fail(LpSolution out, LpStatus s) {
    out.status = s;
    return out;
  }

  // Columns >= allowed never enter.
  LpStatus iterate(Tableau& T, std::size_t allowed, std::size_t& iterations) const {
    const std::size_t m = T.m, rhs = T.n + T.m;
    const double tol = opt_.tolerance;
    std::size_t degenerate = 0;
    for (;;) {
      if (iterations >= opt_.max_iterations) return LpStatus::iteration_limit;
      const bool bland = degenerate >= opt_.degenerate_run;
      std::size_t enter = allowed;
      double best = -tol;
      for (std::size_t j = 0; j < allowed; ++j) {
        const double d = T(m, j);
        if (d < best) {
          enter = j;
          if (bland) break;
          best = d;
        }
      }
      if (enter == allowed) return LpStatus::optimal;

      std::size_t leave = m;
      double ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) {
        const double a = T(i, enter);
        if (a <= tol) continue;
        const double r = T(i, rhs) / a;
        if (r < ratio - tol || (r <= ratio + tol && leave < m && T.basis[i] < T.basis[leave])) {
          ratio = std::min(ratio, r);
          leave = i;
        }
      }
      if (leave == m) return LpStatus::unbounded;
      degenerate = ratio <= tol ? degenerate + 1 : 0;
      T.pivot(leave, enter);
      ++iterations;
    }
  }

  Options opt_;
};

}  // namespace mfgelec
