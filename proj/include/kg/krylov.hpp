#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kg/operators.hpp"

namespace kg {

struct KrylovSpec {
  int max_dim = 96;
  double tol = 1e-10;
  bool reorthogonalize = true;
};

// Scalar function of the operator's eigenvalue lambda (>= 0 for the
// sqrt family). Helpers below build the standard propagator functions.
using SpectralFn = std::function<double(double)>;

namespace spectral_fn {
SpectralFn sqrt_fn();                 // sqrt(lambda)
SpectralFn inv_sqrt();                // 1/sqrt(lambda)
SpectralFn cos_sqrt(double t);        // cos(t sqrt(lambda))
SpectralFn sinc_sqrt(double t);       // sin(t sqrt(lambda))/sqrt(lambda)
SpectralFn sqrt_sin_sqrt(double t);   // sqrt(lambda) sin(t sqrt(lambda))
// True when the function requires lambda >= 0 (guards indefiniteness).
bool needs_nonnegative(const std::string& name);
}  // namespace spectral_fn

struct KrylovReport {
  int dim = 0;
  double last_increment = 0.0;
  double min_ritz = 0.0;
};

// g_i ~= fns[i](op) f via symmetric Lanczos on op (Hermitian, PSD for the
// sqrt family). Terminates when the result increment between successive
// subspace dimensions drops below tol*|f| for every requested function.
// Throws IndefiniteOperator when guard_nonnegative and a Ritz value falls
// below -tol*scale; throws ConvergenceFailure at max_dim.
std::vector<cvec> krylov_apply_multi(const LinOp& op, const std::vector<SpectralFn>& fns,
                                     const cvec& f, const KrylovSpec& spec,
                                     bool guard_nonnegative = true,
                                     KrylovReport* report = nullptr);

// Single-function convenience on ScalarField.
ScalarField krylov_apply_fn(const LinOp& op, const SpectralFn& fn, const ScalarField& f,
                            const KrylovSpec& spec, bool guard_nonnegative = true,
                            KrylovReport* report = nullptr);

// Lowest eigenpairs of a Hermitian operator by deflated Lanczos. Returns
// pairs sorted ascending; stops once `count_below` converged eigenvalues at
// or above `threshold` have been seen (i.e. all eigenvalues < threshold are
// found) or max_pairs pairs were extracted.
struct EigenPair {
  double value = 0.0;
  cvec vector;
  double residual = 0.0;
};
std::vector<EigenPair> lanczos_lowest(const LinOp& op, std::size_t dim_vec, double threshold,
                                      int max_pairs, const KrylovSpec& spec,
                                      std::uint64_t seed = 12345);

// Largest-eigenvalue estimate (power iteration), used for step-size bounds.
double power_iteration_largest(const LinOp& op, std::size_t dim_vec, int iters = 40,
                               std::uint64_t seed = 999);

}  // namespace kg
