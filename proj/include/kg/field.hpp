#pragma once

#include <cstdint>

#include "kg/grid.hpp"

namespace kg {

enum class Space { Position, Frequency };

// Complex grid function, row-major with z fastest.
struct ScalarField {
  GridPtr grid;
  Space space = Space::Position;
  cvec v;

  ScalarField() = default;
  explicit ScalarField(GridPtr g, Space s = Space::Position)
      : grid(std::move(g)), space(s), v(grid->size(), cplx(0.0, 0.0)) {}

  std::size_t size() const { return v.size(); }
};

// Pair (psi, pi) with pi = d/dt psi; both live on one grid.
struct StateVector {
  ScalarField psi;
  ScalarField pi;
};

ScalarField zero_field(const GridPtr& grid);

// Samples f(x) on the grid.
template <typename F>
ScalarField sample_field(const GridPtr& grid, F&& f) {
  ScalarField out(grid);
  const auto& g = *grid;
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz)
        out.v[g.index(ix, iy, iz)] = f(g.x[ix], g.x[iy], g.x[iz]);
  return out;
}

// --- basic algebra (position or frequency space, element-wise) ---

void check_same_grid(const ScalarField& a, const ScalarField& b);

ScalarField& axpy(cplx alpha, const ScalarField& x, ScalarField& y);  // y += alpha x
ScalarField scaled(const ScalarField& f, cplx alpha);
ScalarField added(const ScalarField& a, const ScalarField& b);
ScalarField subtracted(const ScalarField& a, const ScalarField& b);

// h^3-weighted inner product, conjugate-linear in the FIRST argument:
//   inner(f, g) = h^3 * sum conj(f_i) g_i.
cplx inner(const ScalarField& f, const ScalarField& g);
double norm_l2(const ScalarField& f);  // sqrt(h^3 sum |f|^2)

bool all_finite(const ScalarField& f);

// State algebra.
StateVector added(const StateVector& a, const StateVector& b);
StateVector subtracted(const StateVector& a, const StateVector& b);
StateVector scaled(const StateVector& s, cplx alpha);
double norm_l2(const StateVector& s);

// Plain (unweighted by h^3) vector helpers used by Krylov/GMRES kernels.
double vec_norm(const cvec& v);
cplx vec_dot(const cvec& a, const cvec& b);  // conj(a).b

// --- deterministic random fields ---

// Band-limited random field: Fourier modes with per-axis index |j| <= n/4
// get complex-normal amplitudes damped by exp(-(|k|/k_half)^2); the rest
// are zero. Deterministic for equal (grid, seed).
ScalarField random_band_limited(const GridPtr& grid, std::uint64_t seed);

StateVector random_state(const GridPtr& grid, std::uint64_t seed);

}  // namespace kg
