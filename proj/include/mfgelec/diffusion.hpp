#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mfgelec/errors.hpp"
#include "mfgelec/grids.hpp"
#include "mfgelec/model.hpp"

namespace mfgelec {

/// Tridiagonal n x n matrix. lower[i] multiplies entry i-1 of row i, upper[i]
/// multiplies entry i+1 (lower[0] and upper[n-1] are unused and kept zero).
struct Tridiagonal {
  std::vector<double> lower, diag, upper;

  explicit Tridiagonal(std::size_t n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}

  std::size_t size() const { return diag.size(); }

  double at(std::size_t i, std::size_t j) const {
    if (i == j) return diag[i];
    if (j + 1 == i) return lower[i];
    if (i + 1 == j) return upper[i];
    return 0.0;
  }

  std::vector<double> apply(std::span<const double> u) const {
    const std::size_t n = size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = diag[i] * u[i];
      if (i > 0) s += lower[i] * u[i - 1];
      if (i + 1 < n) s += upper[i] * u[i + 1];
      out[i] = s;
    }
    return out;
  }

  Tridiagonal transposed() const {
    const std::size_t n = size();
    Tridiagonal t(n);
    t.diag = diag;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      t.upper[i] = lower[i + 1];
      t.lower[i + 1] = upper[i];
    }
    return t;
  }

  friend bool operator==(const Tridiagonal&, const Tridiagonal&) = default;
};

/// LU factorization of a tridiagonal matrix without pivoting. Stable for the
/// column- or row-diagonally-dominant M-matrices produced by implicit steps;
/// for those, nonnegative right-hand sides give nonnegative solutions.
class TridiagonalLU {
 public:
  TridiagonalLU() = default;

  explicit TridiagonalLU(const Tridiagonal& m) : lower_(m.lower), upper_(m.upper) {
    const std::size_t n = m.size();
    pivot_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double d = m.diag[i];
      if (i > 0) d -= lower_[i] * upper_[i - 1] / pivot_[i - 1];
      if (!(std::abs(d) > 0.0) || !std::isfinite(d))
        throw InternalError("singular tridiagonal system in implicit step");
      pivot_[i] = d;
    }
  }

  std::size_t size() const { return pivot_.size(); }

  void solve_in_place(std::span<double> x) const {
    const std::size_t n = pivot_.size();
    for (std::size_t i = 1; i < n; ++i) x[i] -= lower_[i] / pivot_[i - 1] * x[i - 1];
    x[n - 1] /= pivot_[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (x[i] - upper_[i] * x[i + 1]) / pivot_[i];
  }

  std::vector<double> solve(std::span<const double> rhs) const {
    std::vector<double> x(rhs.begin(), rhs.end());
    solve_in_place(x);
    return x;
  }

 private:
  std::vector<double> lower_, upper_, pivot_;
};

/// Finite-difference approximation of a one-dimensional diffusion generator
/// (drift b, diffusion coefficient a in  b u' + a u'') on a StateGrid, or the
/// adjoint of one.
struct GeneratorMatrix {
  Tridiagonal matrix;
  std::vector<double> drift;      ///< b(x_i)
  std::vector<double> diffusion;  ///< a(x_i), the coefficient of u''
  bool is_adjoint = false;

  std::size_t size() const { return matrix.size(); }
  std::vector<double> apply(std::span<const double> u) const { return matrix.apply(u); }

  friend bool operator==(const GeneratorMatrix&, const GeneratorMatrix&) = default;
};

namespace detail {

// Monotone three-point discretization of b u' + a u''. Central differences
// where they keep the off-diagonals nonnegative, upwind otherwise. Endpoint
// rows carry the drift only and never push mass out of the domain.
inline GeneratorMatrix assemble_generator(const StateGrid& grid, std::vector<double> drift,
                                          std::vector<double> diffusion) {
  const std::size_t n = grid.size();
  const auto& x = grid.nodes;
  GeneratorMatrix g{Tridiagonal(n), std::move(drift), std::move(diffusion), false};
  auto& m = g.matrix;

  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hm = x[i] - x[i - 1];
    const double hp = x[i + 1] - x[i];
    const double a = g.diffusion[i];
    const double b = g.drift[i];
    const double dm = 2.0 * a / (hm * (hm + hp));
    const double dp = 2.0 * a / (hp * (hm + hp));
    double lo = dm - b * hp / (hm * (hm + hp));
    double up = dp + b * hm / (hp * (hm + hp));
    double mid = -(dm + dp) + b * (hp - hm) / (hm * hp);
    if (lo < 0.0 || up < 0.0) {
      lo = dm + std::max(-b, 0.0) / hm;
      up = dp + std::max(b, 0.0) / hp;
      mid = -(lo + up);
    }
    m.lower[i] = lo;
    m.upper[i] = up;
    m.diag[i] = mid;
  }

  // x_0: drift-only, inflow to the right when b(x_0) > 0.
  {
    const double h = x[1] - x[0];
    const double up = std::max(g.drift[0], 0.0) / h + g.diffusion[0] * 2.0 / (h * h);
    m.upper[0] = up;
    m.diag[0] = -up;
  }
  // x_{n-1}: reflecting, only inward moves.
  {
    const double h = x[n - 1] - x[n - 2];
    const double lo = std::max(-g.drift[n - 1], 0.0) / h + g.diffusion[n - 1] * 2.0 / (h * h);
    m.lower[n - 1] = lo;
    m.diag[n - 1] = -lo;
  }
  return g;
}

}  // namespace detail

/// Upper end of a CIR state grid: level plus eight stationary standard deviations.
inline double cir_grid_upper(const TechnologySpec& tech) {
  return tech.level + 8.0 * tech.volatility * std::sqrt(tech.level / (2.0 * tech.mean_reversion));
}

inline StateGrid default_state_grid(const TechnologySpec& tech, std::size_t nodes) {
  if (tech.conventional()) return StateGrid::uniform(0.0, cir_grid_upper(tech), nodes);
  return StateGrid::uniform(0.0, 1.0, nodes);
}

/// Generator of dZ = k(theta - Z) dt + delta sqrt(Z) dW.
inline GeneratorMatrix cir_generator(const TechnologySpec& tech, const StateGrid& grid) {
  if (!tech.conventional()) throw InputError("cir_generator requires a conventional technology");
  if (!(tech.volatility > 0.0)) throw ConfigError("CIR volatility must be positive");
  grid.validate();
  if (grid.lo() < 0.0) throw ConfigError("CIR grid must lie in [0, x_max]");
  std::vector<double> b(grid.size()), a(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.nodes[i];
    b[i] = tech.mean_reversion * (tech.level - x);
    a[i] = 0.5 * tech.volatility * tech.volatility * x;
  }
  return detail::assemble_generator(grid, std::move(b), std::move(a));
}

/// Generator of dS = k(theta - S) dt + delta sqrt(S(1-S)) dW on [0, 1].
inline GeneratorMatrix jacobi_generator(const TechnologySpec& tech, const StateGrid& grid) {
  if (!tech.renewable()) throw InputError("jacobi_generator requires a renewable technology");
  if (!(tech.level > 0.0 && tech.level < 1.0))
    throw ConfigError("Jacobi level must lie strictly inside (0, 1)");
  if (!(tech.volatility > 0.0)) throw ConfigError("Jacobi volatility must be positive");
  grid.validate();
  if (grid.lo() < 0.0 || grid.hi() > 1.0) throw ConfigError("Jacobi grid must lie within [0, 1]");
  std::vector<double> b(grid.size()), a(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.nodes[i];
    b[i] = tech.mean_reversion * (tech.level - x);
    a[i] = 0.5 * tech.volatility * tech.volatility * x * (1.0 - x);
  }
  if (grid.lo() == 0.0) a.front() = 0.0;
  if (grid.hi() == 1.0) a.back() = 0.0;
  return detail::assemble_generator(grid, std::move(b), std::move(a));
}

inline GeneratorMatrix state_generator(const TechnologySpec& tech, const StateGrid& grid) {
  return tech.conventional() ? cir_generator(tech, grid) : jacobi_generator(tech, grid);
}

/// Adjoint for the pairing <u, m> = sum_i u_i m_i between node values and node
/// masses: the plain transpose. Applying it twice returns the input exactly.
inline GeneratorMatrix adjoint(const GeneratorMatrix& gen) {
  GeneratorMatrix out = gen;
  out.matrix = gen.matrix.transposed();
  out.is_adjoint = !gen.is_adjoint;
  return out;
}

/// Adjoint for the weighted pairing <u, m>_w = sum_i w_i u_i m_i, i.e. the
/// forward operator on densities: (L*)_{ij} = L_{ji} w_j / w_i.
inline GeneratorMatrix adjoint(const GeneratorMatrix& gen, std::span<const double> weights) {
  const std::size_t n = gen.size();
  if (weights.size() != n) throw InputError("adjoint weights do not match the grid");
  GeneratorMatrix out = adjoint(gen);
  auto& m = out.matrix;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) m.lower[i] *= weights[i - 1] / weights[i];
    if (i + 1 < n) m.upper[i] *= weights[i + 1] / weights[i];
  }
  return out;
}

}  // namespace mfgelec
