#include "kg/operators.hpp"

#include "kg/errors.hpp"
#include "kg/fft.hpp"

namespace kg {

namespace {
void check_grid(const PotentialSet& p, const ScalarField& f) {
  if (!p.grid || !f.grid || !p.grid->same_as(*f.grid))
    throw GridMismatch("potential and field live on different grids");
  if (f.space != Space::Position)
    throw InvalidArgument("operator application expects a position-space field");
}
}  // namespace

ScalarField derivative(const ScalarField& f, int axis) {
  ScalarField out = f;
  fft::forward(out);
  const auto& g = *f.grid;
  for (int jx = 0; jx < g.n; ++jx)
    for (int jy = 0; jy < g.n; ++jy)
      for (int jz = 0; jz < g.n; ++jz) {
        const double k = axis == 0 ? g.k_odd(jx) : (axis == 1 ? g.k_odd(jy) : g.k_odd(jz));
        out.v[g.index(jx, jy, jz)] *= cplx(0.0, k);
      }
  fft::inverse(out);
  return out;
}

std::array<ScalarField, 3> gradient(const ScalarField& f) {
  // one forward transform, three inverse transforms
  ScalarField hat = f;
  fft::forward(hat);
  std::array<ScalarField, 3> out{ScalarField(f.grid), ScalarField(f.grid), ScalarField(f.grid)};
  const auto& g = *f.grid;
  for (int axis = 0; axis < 3; ++axis) {
    ScalarField d = hat;
    for (int jx = 0; jx < g.n; ++jx)
      for (int jy = 0; jy < g.n; ++jy)
        for (int jz = 0; jz < g.n; ++jz) {
          const double k = axis == 0 ? g.k_odd(jx) : (axis == 1 ? g.k_odd(jy) : g.k_odd(jz));
          d.v[g.index(jx, jy, jz)] *= cplx(0.0, k);
        }
    fft::inverse(d);
    out[axis] = std::move(d);
  }
  return out;
}

ScalarField laplacian_neg(const ScalarField& f) {
  return apply_multiplier(
      f, [](double kx, double ky, double kz) { return kx * kx + ky * ky + kz * kz; });
}

// Factored form sum_j (i d_j + A_j)^2: each factor is exactly self-adjoint on
// the grid (spectral derivative, real multiplication), so the discrete H0 is
// Hermitian and nonnegative to roundoff even where pointwise products alias.
ScalarField apply_H0(const PotentialSet& p, const ScalarField& f) {
  check_grid(p, f);
  if (p.zero_A) return laplacian_neg(f);

  ScalarField hat = f;
  fft::forward(hat);
  const auto& g = *f.grid;
  const std::size_t total = f.size();

  ScalarField acc_hat(f.grid, Space::Frequency);  // sum_j i k_j ghat_j
  std::array<ScalarField, 3> gj;
  for (int axis = 0; axis < 3; ++axis) {
    ScalarField d = hat;
    for (int jx = 0; jx < g.n; ++jx)
      for (int jy = 0; jy < g.n; ++jy)
        for (int jz = 0; jz < g.n; ++jz) {
          const double k = axis == 0 ? g.k_odd(jx) : (axis == 1 ? g.k_odd(jy) : g.k_odd(jz));
          d.v[g.index(jx, jy, jz)] *= cplx(0.0, k);
        }
    fft::inverse(d);
    // g_j = i d_j f + A_j f
    for (std::size_t i = 0; i < total; ++i) d.v[i] = cplx(0.0, 1.0) * d.v[i] + p.A[axis][i] * f.v[i];
    gj[axis] = std::move(d);
  }
  for (int axis = 0; axis < 3; ++axis) {
    ScalarField gh = gj[axis];
    fft::forward(gh);
    for (int jx = 0; jx < g.n; ++jx)
      for (int jy = 0; jy < g.n; ++jy)
        for (int jz = 0; jz < g.n; ++jz) {
          const double k = axis == 0 ? g.k_odd(jx) : (axis == 1 ? g.k_odd(jy) : g.k_odd(jz));
          const std::size_t id = g.index(jx, jy, jz);
          acc_hat.v[id] += cplx(0.0, k) * gh.v[id];
        }
  }
  fft::inverse(acc_hat);
  // out = sum_j (i d_j g_j + A_j g_j)
  ScalarField out = std::move(acc_hat);
  for (std::size_t i = 0; i < total; ++i) {
    out.v[i] *= cplx(0.0, 1.0);
    for (int axis = 0; axis < 3; ++axis) out.v[i] += p.A[axis][i] * gj[axis].v[i];
  }
  return out;
}

ScalarField apply_H(const PotentialSet& p, const ScalarField& f) {
  ScalarField out = apply_H0(p, f);
  if (!p.zero_V)
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += p.V[i] * f.v[i];
  return out;
}

ScalarField apply_W(const PotentialSet& p, const ScalarField& f) {
  check_grid(p, f);
  // W = H - (-Lap), kept exactly consistent with the factored H0
  ScalarField out(f.grid);
  if (!p.zero_A) out = subtracted(apply_H0(p, f), laplacian_neg(f));
  if (!p.zero_V)
    for (std::size_t i = 0; i < f.size(); ++i) out.v[i] += p.V[i] * f.v[i];
  return out;
}

StateVector apply_K(const PotentialSet& p, const StateVector& s) {
  check_grid(p, s.psi);
  check_grid(p, s.pi);
  ScalarField hpsi = apply_H_plus_m2(p, s.psi);
  StateVector out;
  out.psi = scaled(s.pi, cplx(0.0, 1.0));
  out.pi = scaled(hpsi, cplx(0.0, -1.0));
  return out;
}

ScalarField apply_H_plus_m2(const PotentialSet& p, const ScalarField& f) {
  ScalarField out = apply_H(p, f);
  const double m2 = p.m * p.m;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += m2 * f.v[i];
  return out;
}

ScalarField apply_H0_plus_m2(const PotentialSet& p, const ScalarField& f) {
  ScalarField out = apply_H0(p, f);
  const double m2 = p.m * p.m;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += m2 * f.v[i];
  return out;
}

namespace {
LinOp wrap_field_op(const PotentialSet& p,
                    ScalarField (*op)(const PotentialSet&, const ScalarField&)) {
  const PotentialSet* pp = &p;
  GridPtr grid = p.grid;
  return [pp, grid, op](const cvec& in, cvec& out) {
    ScalarField f(grid);
    f.v = in;
    ScalarField g = op(*pp, f);
    out = std::move(g.v);
  };
}
}  // namespace

LinOp linop_H_plus_m2(const PotentialSet& p) { return wrap_field_op(p, &apply_H_plus_m2); }
LinOp linop_H0_plus_m2(const PotentialSet& p) { return wrap_field_op(p, &apply_H0_plus_m2); }

}  // namespace kg
