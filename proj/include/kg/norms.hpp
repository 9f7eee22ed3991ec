#pragma once

#include "kg/field.hpp"

namespace kg {

// Parameters of the weighted Sobolev norm || <x>^sigma <grad>^s f ||_{L^2}.
// The smoothing multiplier (1+|k|^2)^{s/2} acts first, the spatial weight
// <x>^sigma = (1+|x|^2)^{sigma/2} second, then the discrete L^2 norm
// h^{3/2} (sum |.|^2)^{1/2}.
struct WeightedNormSpec {
  int s = 0;           // Sobolev order, in {-1, 0, 1, 2}
  double sigma = 0.0;  // weight exponent
};

double weighted_norm(const ScalarField& f, const WeightedNormSpec& spec);

// Energy norm of (psi, pi): sqrt( |psi|_{1,sigma}^2 + |pi|_{0,sigma}^2 ).
double energy_norm(const StateVector& s, double sigma);

// <grad>^s f as a field (frequency multiplier (1+|k|^2)^{s/2}).
ScalarField apply_bracket_grad(const ScalarField& f, double s);

// <x>^sigma f (pointwise weight).
ScalarField apply_x_weight(const ScalarField& f, double sigma);

}  // namespace kg
