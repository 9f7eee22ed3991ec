#pragma once

#include "kg/dense.hpp"
#include "kg/krylov.hpp"
#include "kg/resolvent.hpp"

namespace kg {

enum class EvolveMethod { KrylovPropagator, Leapfrog };

struct EvolutionPlan {
  EvolveMethod method = EvolveMethod::KrylovPropagator;
  double dt = 1.0;      // macro step (Krylov) / time step (leapfrog)
  double t_max = 10.0;  // horizon
  KrylovSpec krylov;
  // Wrap-around guard. Experiments approximating free space keep it on;
  // grid-exact comparisons (oracle agreement on the periodic box) turn it off.
  bool enforce_horizon = true;
};

// Radius enclosing all but `tail` of the state's mass (max-norm coordinate).
double concentration_radius(const StateVector& s, double tail = 1e-3);

// Enforces L - r0 - t >= 0 (group speed < 1, so no wrap-around before t).
void check_horizon(const SpectralGrid& grid, double r0, double t);

// Half-group propagator with V = 0:
//   psi' = cos(Bt) psi + B^{-1} sin(Bt) pi
//   pi'  = -B sin(Bt) psi + cos(Bt) pi,      B = sqrt(H0 + m^2).
// Exact Fourier multipliers when A = 0, Lanczos matrix functions otherwise.
StateVector propagate_U0(const PotentialSet& p, double t, const StateVector& s,
                         const KrylovSpec& spec);

// Full dynamical group (general V): Krylov propagator applies the same
// matrix-function formula with sqrt(H + m^2) per macro step; leapfrog
// advances (psi, pi) with half-step kicks. Requires lambda_min(H) > -m^2.
StateVector propagate_U(const PotentialSet& p, double t, const StateVector& s,
                        const EvolutionPlan& plan);

// Conserved quadratic energy  |(i grad + A) psi|^2 + m^2 |psi|^2 + <V psi, psi> + |pi|^2.
double quadratic_energy(const PotentialSet& p, const StateVector& s);

// Lowest-eigenvalue estimate of H (memoized in the potential's cache).
double lambda_min_estimate(const PotentialSet& p);
// Upper bound estimate of H + m^2 (memoized).
double lambda_max_estimate(const PotentialSet& p);

struct DiscreteSpectrumData {
  std::vector<double> lambdas;          // eigenvalues of H in (-m^2, 0)
  std::vector<ScalarField> eigenfields; // orthonormal in h^3-weighted l2
  std::vector<double> residuals;
  double lambda_min = 0.0;              // lowest eigenvalue seen
  double m = 1.0;

  std::vector<double> omegas() const;   // sqrt(m^2 + lambda_j)
};

// All eigenvalues of H in (-m^2, 0): dense solve for n <= 12, deflated
// Lanczos otherwise. Throws SupercriticalPotential when lambda_min <= -m^2.
DiscreteSpectrumData discrete_spectrum(const PotentialSet& p, double residual_tol = 1e-8);

// Removes the bound-state subspace (energy-orthogonal projection, which
// reduces to the componentwise L^2 projection against each eigenfield).
StateVector project_Pc(const DiscreteSpectrumData& data, const StateVector& s);

// Smooth cutoff built from the standard bump exp(-1/x); evaluable on all of R.
struct CutoffSpec {
  std::function<double(double)> chi;
  std::string name;
};

CutoffSpec chi_identity();
// 1 on [-(m+delta1), m+delta1], ramps to 0 over [m+delta1, m+2 delta1], even.
CutoffSpec chi_low_energy(double m, double delta1);
CutoffSpec chi_complement(const CutoffSpec& base);           // 1 - chi
CutoffSpec chi_bump(double a, double b);                     // smooth bump on (a,b)

// chi(K) via the even/odd split on K^2 = (H+m^2) (x) I_2:
//   chi(K) = chi_e(sqrtK2) + K (sqrtK2)^{-1} chi_o(sqrtK2).
StateVector chi_filter(const PotentialSet& p, const CutoffSpec& chi, const StateVector& s,
                       const KrylovSpec& spec);

// --- spectral-representation cross-check ---------------------------------

struct ContourQuadratureSpec {
  int nodes = 128;
  double eps = 5e-2;   // boundary-value offset; the smeared time phase is
                       // corrected by e^{+eps|t|} after integration
  double sigma = 1.0;  // comparison norm F_{-sigma}
  // Pack panels geometrically around the discrete spectrum. Needed when eps
  // sits below the level spacing (the integrand is then a row of narrow
  // Lorentzians); the node count grows well beyond `nodes` in that regime.
  bool adaptive_panels = false;
};

struct SpectralRepResult {
  StateVector quadrature_state;
  StateVector propagated_state;
  double rel_err = 0.0;
};

// Compares (2 pi i)^{-1} Int chi(w) e^{-iwt} [R_K(w+ie) - R_K(w-ie)] Psi dw
// against U(t) chi(K) P_c Psi in the F_{-sigma} norm.
SpectralRepResult spectral_rep_check(const PotentialSet& p, double t, const StateVector& s,
                                     const CutoffSpec& chi, const ContourQuadratureSpec& quad,
                                     const EvolutionPlan& plan);

}  // namespace kg
