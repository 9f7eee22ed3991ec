#include "kg/field.hpp"

#include <cmath>
#include <random>

#include "kg/errors.hpp"
#include "kg/fft.hpp"

namespace kg {

ScalarField zero_field(const GridPtr& grid) { return ScalarField(grid); }

void check_same_grid(const ScalarField& a, const ScalarField& b) {
  if (!a.grid || !b.grid || !a.grid->same_as(*b.grid))
    throw GridMismatch("fields live on different grids");
}

ScalarField& axpy(cplx alpha, const ScalarField& x, ScalarField& y) {
  check_same_grid(x, y);
  for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += alpha * x.v[i];
  return y;
}

ScalarField scaled(const ScalarField& f, cplx alpha) {
  ScalarField out = f;
  for (auto& z : out.v) z *= alpha;
  return out;
}

ScalarField added(const ScalarField& a, const ScalarField& b) {
  check_same_grid(a, b);
  ScalarField out = a;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
  return out;
}

ScalarField subtracted(const ScalarField& a, const ScalarField& b) {
  check_same_grid(a, b);
  ScalarField out = a;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b.v[i];
  return out;
}

cplx inner(const ScalarField& f, const ScalarField& g) {
  check_same_grid(f, g);
  cplx acc(0.0, 0.0);
  for (std::size_t i = 0; i < f.v.size(); ++i) acc += std::conj(f.v[i]) * g.v[i];
  const double h = f.grid->h;
  return acc * (h * h * h);
}

double norm_l2(const ScalarField& f) {
  double acc = 0.0;
  for (const auto& z : f.v) acc += std::norm(z);
  const double h = f.grid->h;
  return std::sqrt(acc * h * h * h);
}

bool all_finite(const ScalarField& f) {
  for (const auto& z : f.v)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

StateVector added(const StateVector& a, const StateVector& b) {
  return {added(a.psi, b.psi), added(a.pi, b.pi)};
}

StateVector subtracted(const StateVector& a, const StateVector& b) {
  return {subtracted(a.psi, b.psi), subtracted(a.pi, b.pi)};
}

StateVector scaled(const StateVector& s, cplx alpha) {
  return {scaled(s.psi, alpha), scaled(s.pi, alpha)};
}

double norm_l2(const StateVector& s) {
  const double a = norm_l2(s.psi);
  const double b = norm_l2(s.pi);
  return std::sqrt(a * a + b * b);
}

double vec_norm(const cvec& v) {
  double acc = 0.0;
  for (const auto& z : v) acc += std::norm(z);
  return std::sqrt(acc);
}

cplx vec_dot(const cvec& a, const cvec& b) {
  cplx acc(0.0, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

ScalarField random_band_limited(const GridPtr& grid, std::uint64_t seed) {
  ScalarField f(grid, Space::Frequency);
  const auto& g = *grid;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int jmax = g.n / 4;
  const double k_half = (M_PI / g.L) * jmax;
  for (int jx = 0; jx < g.n; ++jx) {
    const int mx = (jx < g.n / 2) ? jx : jx - g.n;
    for (int jy = 0; jy < g.n; ++jy) {
      const int my = (jy < g.n / 2) ? jy : jy - g.n;
      for (int jz = 0; jz < g.n; ++jz) {
        const int mz = (jz < g.n / 2) ? jz : jz - g.n;
        if (std::abs(mx) > jmax || std::abs(my) > jmax || std::abs(mz) > jmax) continue;
        const double kk = g.k_sq(jx, jy, jz);
        const double damp = std::exp(-kk / (k_half * k_half));
        f.v[g.index(jx, jy, jz)] = cplx(gauss(rng), gauss(rng)) * damp;
      }
    }
  }
  fft::inverse(f);
  const double nrm = norm_l2(f);
  if (nrm > 0.0)
    for (auto& z : f.v) z /= nrm;
  return f;
}

StateVector random_state(const GridPtr& grid, std::uint64_t seed) {
  return {random_band_limited(grid, seed), random_band_limited(grid, seed + 0x9e3779b97f4a7c15ULL)};
}

}  // namespace kg
