#include "kg/norms.hpp"

#include <cmath>

#include "kg/errors.hpp"
#include "kg/fft.hpp"

namespace kg {

ScalarField apply_bracket_grad(const ScalarField& f, double s) {
  if (s == 0.0) return f;
  return apply_multiplier(f, [s](double kx, double ky, double kz) {
    return std::pow(1.0 + kx * kx + ky * ky + kz * kz, 0.5 * s);
  });
}

ScalarField apply_x_weight(const ScalarField& f, double sigma) {
  if (sigma == 0.0) return f;
  ScalarField out = f;
  const auto& g = *f.grid;
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz)
        out.v[g.index(ix, iy, iz)] *= std::pow(1.0 + g.x_sq(ix, iy, iz), 0.5 * sigma);
  return out;
}

double weighted_norm(const ScalarField& f, const WeightedNormSpec& spec) {
  if (f.space != Space::Position)
    throw InvalidArgument("weighted_norm: field must be in position space");
  if (!all_finite(f)) throw InvalidArgument("weighted_norm: field has non-finite entries");
  ScalarField smoothed = apply_bracket_grad(f, static_cast<double>(spec.s));
  ScalarField weighted = apply_x_weight(smoothed, spec.sigma);
  return norm_l2(weighted);
}

double energy_norm(const StateVector& s, double sigma) {
  check_same_grid(s.psi, s.pi);
  const double a = weighted_norm(s.psi, {1, sigma});
  const double b = weighted_norm(s.pi, {0, sigma});
  return std::sqrt(a * a + b * b);
}

}  // namespace kg
