#pragma once

#include "kg/field.hpp"

namespace kg {

// Unitary 3D transforms backed by FFTW. Plans are cached per grid size and
// creation is serialized; execution on caller buffers is thread-safe, so
// concurrent transforms of distinct fields match serial results exactly.
namespace fft {

// In-place forward transform (position -> frequency), scaled by n^{-3/2}.
void forward(ScalarField& f);

// In-place inverse transform (frequency -> position), scaled by n^{-3/2}.
void inverse(ScalarField& f);

// Raw-buffer versions; `n` is the points-per-axis of the cubic grid.
void forward_raw(int n, cplx* data);
void inverse_raw(int n, cplx* data);

}  // namespace fft

// Applies a frequency multiplier m(kx,ky,kz) to a position-space field:
// out = F^{-1} [ m .* F f ].
template <typename M>
ScalarField apply_multiplier(const ScalarField& f, M&& m) {
  ScalarField out = f;
  fft::forward(out);
  const auto& g = *out.grid;
  for (int jx = 0; jx < g.n; ++jx)
    for (int jy = 0; jy < g.n; ++jy)
      for (int jz = 0; jz < g.n; ++jz)
        out.v[g.index(jx, jy, jz)] *= m(g.k[jx], g.k[jy], g.k[jz]);
  fft::inverse(out);
  return out;
}

}  // namespace kg
