#include "kg/grid.hpp"

#include <cmath>
#include <string>

#include "kg/errors.hpp"

namespace kg {

GridPtr make_grid(int n, double L) {
  if (n < 4) throw InvalidArgument("make_grid: n must be >= 4, got " + std::to_string(n));
  if (n % 2 != 0) throw InvalidArgument("make_grid: n must be even, got " + std::to_string(n));
  if (!(L > 0.0)) throw InvalidArgument("make_grid: L must be > 0, got " + std::to_string(L));

  auto g = std::make_shared<SpectralGrid>();
  g->n = n;
  g->L = L;
  g->h = 2.0 * L / n;
  g->x.resize(n);
  g->k.resize(n);
  const double k0 = M_PI / L;
  for (int i = 0; i < n; ++i) {
    g->x[i] = -L + i * g->h;
    const int j = (i < n / 2) ? i : i - n;
    g->k[i] = k0 * j;
  }
  return g;
}

}  // namespace kg
