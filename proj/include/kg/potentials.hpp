#pragma once

#include <array>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "kg/field.hpp"

namespace kg {

// Lazily filled spectral bounds shared by evolution/resolvent routines.
struct SpectralCertCache {
  std::mutex mutex;
  std::optional<double> lambda_min;  // lowest eigenvalue estimate of H
  std::optional<double> lambda_max;  // upper bound estimate of H + m^2
};

// Vector potential A, scalar potential V, mass and claimed decay exponent.
// All component fields are real-valued on one grid. div_A and A_sq are
// derived once at construction (spectral divergence, pointwise |A|^2).
struct PotentialSet {
  GridPtr grid;
  std::array<rvec, 3> A;
  rvec V;
  rvec div_A;
  rvec A_sq;
  double m = 1.0;
  double beta = 3.5;
  double C_fit = 0.0;
  bool zero_A = true;
  bool zero_V = true;

  std::shared_ptr<SpectralCertCache> cache;
};

struct PotentialParams {
  std::array<double, 3> amplitude{0.0, 0.0, 0.0};  // gaussian-bump a_j
  double v0 = 0.0;                                 // gaussian-bump V amplitude
  double width = 1.0;                              // gaussian width w
  std::array<double, 3> center{0.0, 0.0, 0.0};     // bump center for A
  double g = 0.0;                                  // scaled-well coupling
  double m = 1.0;
  double beta = 3.5;
};

// Families:
//   "zero"          A = 0, V = 0
//   "gaussian-bump" A_j = a_j exp(-|x-c|^2/(2w^2)), V = v0 exp(-|x|^2/(2w^2))
//   "scaled-well"   A = 0, V = -g exp(-|x|^2/2)
// Widths below 2h are rejected as unresolvable.
PotentialSet make_potential(const std::string& kind, const PotentialParams& params,
                            const GridPtr& grid);

struct AdmissibilityReport {
  double C_fit = 0.0;
  std::array<int, 3> argmax{0, 0, 0};
  std::array<double, 3> argmax_x{0.0, 0.0, 0.0};
  bool boundary_flag = false;  // maximum sits on the outer shell of the box
};

// Evaluates C_fit = max_x <x>^beta ( |V| + |grad V| + sum_{|a|<=4,j} |D^a A_j| )
// with spectral derivatives, and flags boundary-attained maxima (the weighted
// expression still growing at the box edge means the tail is under-resolved).
AdmissibilityReport check_admissible(const PotentialSet& p, double beta);

// Pointwise multiply a complex field by a real coefficient field.
ScalarField multiply(const rvec& coeff, const ScalarField& f);

}  // namespace kg
