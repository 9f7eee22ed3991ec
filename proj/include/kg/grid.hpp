#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

namespace kg {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using rvec = std::vector<double>;

// Uniform periodic box [-L, L)^3 with n points per axis.
//
// Coordinates:  x_i = -L + i*h,  h = 2L/n.
// Wavenumbers:  k_j = (pi/L)*j in transform ordering
//               j = 0, 1, ..., n/2-1, -n/2, ..., -1.
struct SpectralGrid {
  int n = 0;
  double L = 0.0;
  double h = 0.0;
  rvec x;  // n coordinates per axis
  rvec k;  // n wavenumbers per axis, transform order

  std::size_t size() const { return static_cast<std::size_t>(n) * n * n; }

  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(ix) * n + iy) * n + iz;
  }

  // |x|^2 at a grid point (box-centered, non-periodic coordinate).
  double x_sq(int ix, int iy, int iz) const {
    return x[ix] * x[ix] + x[iy] * x[iy] + x[iz] * x[iz];
  }

  // |k|^2 at a mode index triple.
  double k_sq(int jx, int jy, int jz) const {
    return k[jx] * k[jx] + k[jy] * k[jy] + k[jz] * k[jz];
  }

  // Wavenumber used by first-order derivatives: the unpaired Nyquist mode is
  // dropped (its odd derivative is ambiguous and would break the reality of
  // derivatives of real fields). Even-order multipliers keep the full table.
  double k_odd(int j) const { return (j == n / 2) ? 0.0 : k[j]; }

  bool same_as(const SpectralGrid& other) const {
    return n == other.n && L == other.L;
  }
};

using GridPtr = std::shared_ptr<const SpectralGrid>;

// Builds the grid tables. Rejects odd n, n < 4, and L <= 0.
GridPtr make_grid(int n, double L);

}  // namespace kg
