#include "kg/potentials.hpp"

#include <cmath>

#include "kg/errors.hpp"
#include "kg/fft.hpp"

namespace kg {

namespace {

rvec real_part(const ScalarField& f) {
  rvec out(f.v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.v[i].real();
  return out;
}

ScalarField to_field(const GridPtr& grid, const rvec& r) {
  ScalarField f(grid);
  for (std::size_t i = 0; i < r.size(); ++i) f.v[i] = cplx(r[i], 0.0);
  return f;
}

// d/dx_axis via the spectral multiplier i k_axis (Nyquist dropped).
ScalarField spectral_derivative(const ScalarField& f, int axis) {
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

bool is_zero(const rvec& r) {
  for (double v : r)
    if (v != 0.0) return false;
  return true;
}

}  // namespace

PotentialSet make_potential(const std::string& kind, const PotentialParams& params,
                            const GridPtr& grid) {
  if (!(params.m > 0.0)) throw InvalidArgument("make_potential: mass m must be > 0");
  PotentialSet p;
  p.grid = grid;
  p.m = params.m;
  p.beta = params.beta;
  const std::size_t total = grid->size();
  for (auto& a : p.A) a.assign(total, 0.0);
  p.V.assign(total, 0.0);

  const auto& g = *grid;
  if (kind == "zero") {
    // nothing to fill
  } else if (kind == "gaussian-bump") {
    const double w = params.width;
    if (w < 2.0 * g.h)
      throw InvalidArgument("make_potential: width " + std::to_string(w) +
                            " below resolution limit 2h = " + std::to_string(2.0 * g.h));
    const double inv2w2 = 1.0 / (2.0 * w * w);
    for (int ix = 0; ix < g.n; ++ix)
      for (int iy = 0; iy < g.n; ++iy)
        for (int iz = 0; iz < g.n; ++iz) {
          const std::size_t id = g.index(ix, iy, iz);
          const double dx = g.x[ix] - params.center[0];
          const double dy = g.x[iy] - params.center[1];
          const double dz = g.x[iz] - params.center[2];
          const double bump = std::exp(-(dx * dx + dy * dy + dz * dz) * inv2w2);
          for (int j = 0; j < 3; ++j) p.A[j][id] = params.amplitude[j] * bump;
          p.V[id] = params.v0 * std::exp(-g.x_sq(ix, iy, iz) * inv2w2);
        }
  } else if (kind == "scaled-well") {
    for (int ix = 0; ix < g.n; ++ix)
      for (int iy = 0; iy < g.n; ++iy)
        for (int iz = 0; iz < g.n; ++iz)
          p.V[g.index(ix, iy, iz)] = -params.g * std::exp(-0.5 * g.x_sq(ix, iy, iz));
  } else {
    throw InvalidArgument("make_potential: unknown family '" + kind + "'");
  }

  p.zero_A = is_zero(p.A[0]) && is_zero(p.A[1]) && is_zero(p.A[2]);
  p.zero_V = is_zero(p.V);

  p.div_A.assign(total, 0.0);
  p.A_sq.assign(total, 0.0);
  if (!p.zero_A) {
    for (int j = 0; j < 3; ++j) {
      ScalarField dj = spectral_derivative(to_field(grid, p.A[j]), j);
      for (std::size_t i = 0; i < total; ++i) p.div_A[i] += dj.v[i].real();
    }
    for (std::size_t i = 0; i < total; ++i)
      p.A_sq[i] = p.A[0][i] * p.A[0][i] + p.A[1][i] * p.A[1][i] + p.A[2][i] * p.A[2][i];
  }

  p.cache = std::make_shared<SpectralCertCache>();
  return p;
}

AdmissibilityReport check_admissible(const PotentialSet& p, double beta) {
  const auto& g = *p.grid;
  const std::size_t total = g.size();
  rvec sum(total, 0.0);

  // |V| + |grad V|
  for (std::size_t i = 0; i < total; ++i) sum[i] = std::abs(p.V[i]);
  if (!p.zero_V) {
    rvec grad_sq(total, 0.0);
    ScalarField vf = to_field(p.grid, p.V);
    for (int axis = 0; axis < 3; ++axis) {
      ScalarField d = spectral_derivative(vf, axis);
      for (std::size_t i = 0; i < total; ++i) {
        const double re = d.v[i].real();
        grad_sq[i] += re * re;
      }
    }
    for (std::size_t i = 0; i < total; ++i) sum[i] += std::sqrt(grad_sq[i]);
  }

  // sum over |alpha| <= 4 of |D^alpha A_j|
  if (!p.zero_A) {
    for (int j = 0; j < 3; ++j) {
      ScalarField base = to_field(p.grid, p.A[j]);
      fft::forward(base);
      for (int a1 = 0; a1 <= 4; ++a1)
        for (int a2 = 0; a2 + a1 <= 4; ++a2)
          for (int a3 = 0; a3 + a2 + a1 <= 4; ++a3) {
            ScalarField d = base;
            for (int jx = 0; jx < g.n; ++jx)
              for (int jy = 0; jy < g.n; ++jy)
                for (int jz = 0; jz < g.n; ++jz) {
                  const cplx mul = std::pow(cplx(0.0, g.k[jx]), a1) *
                                   std::pow(cplx(0.0, g.k[jy]), a2) *
                                   std::pow(cplx(0.0, g.k[jz]), a3);
                  d.v[g.index(jx, jy, jz)] *= mul;
                }
            fft::inverse(d);
            for (std::size_t i = 0; i < total; ++i) sum[i] += std::abs(d.v[i]);
          }
    }
  }

  AdmissibilityReport rep;
  double best = -1.0;
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz) {
        const double w = std::pow(1.0 + g.x_sq(ix, iy, iz), 0.5 * beta);
        const double val = w * sum[g.index(ix, iy, iz)];
        if (val > best) {
          best = val;
          rep.argmax = {ix, iy, iz};
        }
      }
  rep.C_fit = best < 0.0 ? 0.0 : best;
  rep.argmax_x = {g.x[rep.argmax[0]], g.x[rep.argmax[1]], g.x[rep.argmax[2]]};
  const double edge = g.L - 2.0 * g.h;
  rep.boundary_flag = std::abs(rep.argmax_x[0]) >= edge || std::abs(rep.argmax_x[1]) >= edge ||
                      std::abs(rep.argmax_x[2]) >= edge;
  if (rep.C_fit == 0.0) rep.boundary_flag = false;
  return rep;
}

ScalarField multiply(const rvec& coeff, const ScalarField& f) {
  ScalarField out = f;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= coeff[i];
  return out;
}

}  // namespace kg
