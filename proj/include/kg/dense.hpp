#pragma once

#include <Eigen/Dense>

#include <functional>

#include "kg/operators.hpp"

namespace kg {

// Brute-force oracle: materialize operators as explicit matrices on grids
// with n <= 12 and work with dense factorizations. Everything here shares
// building blocks with nothing but the operator-application routines, so it
// is the project-wide independent reference path.

// Materializes a raw-vector linear operator of dimension `dim`.
Eigen::MatrixXcd materialize(const LinOp& op, std::size_t dim);

// Dense matrix of one of H0, H, B, B_V, K. Grid must satisfy n^3 <= 1728.
Eigen::MatrixXcd dense_operator(const PotentialSet& p, OpKind kind);

// Dense Hermitian eigendecomposition of H (with_V) or H0 (!with_V).
struct DenseEig {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
};
DenseEig dense_eig_schrodinger(const PotentialSet& p, bool with_V);

// Applies g(Op) via the eigendecomposition: U g(D) U^H f.
cvec dense_apply_fn(const DenseEig& eig, const std::function<double(double)>& g, const cvec& f);
cvec dense_apply_cfn(const DenseEig& eig, const std::function<cplx(double)>& g, const cvec& f);

// Applies f(K) to a state through the block reduction over the H-eigenbasis:
// each H-eigenpair (lambda, phi) contributes the 2x2 block
//   [ f_e(mu)        i f_o(mu)/mu ]
//   [ -i mu f_o(mu)  f_e(mu)      ],  mu = sqrt(lambda + m^2),
// with f_e/f_o the even/odd parts of f. Requires lambda + m^2 > 0.
StateVector dense_k_apply(const DenseEig& eig_with_V, double m,
                          const std::function<cplx(cplx)>& f, const StateVector& s);

// Dense solve (H - omega) u = f.
cvec dense_resolvent_apply(const DenseEig& eig, cplx omega, const cvec& f);

}  // namespace kg
