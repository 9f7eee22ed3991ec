#pragma once

#include <functional>

#include "kg/potentials.hpp"

namespace kg {

// Magnetic Schroedinger operator applications, all spectral/pointwise:
//   H0 f = -Lap f + 2i A.grad f + i (div A) f + |A|^2 f      ( = (i grad + A)^2 )
//   H  f = H0 f + V f
//   W  f = H f - (-Lap f)   (the perturbation H - (-Lap))
ScalarField apply_H0(const PotentialSet& p, const ScalarField& f);
ScalarField apply_H(const PotentialSet& p, const ScalarField& f);
ScalarField apply_W(const PotentialSet& p, const ScalarField& f);

// First-order system generator: K (psi, pi) = (i pi, -i (H + m^2) psi).
StateVector apply_K(const PotentialSet& p, const StateVector& s);

// H + m^2 (the square of the relativistic dispersion operator).
ScalarField apply_H_plus_m2(const PotentialSet& p, const ScalarField& f);
// H0 + m^2.
ScalarField apply_H0_plus_m2(const PotentialSet& p, const ScalarField& f);

// grad f (three spectral derivatives).
std::array<ScalarField, 3> gradient(const ScalarField& f);
ScalarField derivative(const ScalarField& f, int axis);
ScalarField laplacian_neg(const ScalarField& f);  // -Lap f

enum class OpKind { H0, H, B, B_V, K };

struct OperatorHandle {
  OpKind kind = OpKind::H;
  const PotentialSet* potentials = nullptr;
  GridPtr grid;
};

// Generic complex linear operator on raw vectors (size n^3 or 2 n^3).
using LinOp = std::function<void(const cvec&, cvec&)>;

// Wraps H+m^2 / H0+m^2 as a raw-vector LinOp on the potential's grid.
LinOp linop_H_plus_m2(const PotentialSet& p);
LinOp linop_H0_plus_m2(const PotentialSet& p);

}  // namespace kg
