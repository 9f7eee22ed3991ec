#pragma once

#include "kg/operators.hpp"

namespace kg {

struct GmresOptions {
  int restart = 40;
  int max_iter = 600;
  double tol = 1e-10;  // relative residual target
};

struct GmresStat {
  int iterations = 0;
  double rel_residual = 1.0;
  bool converged = false;
};

// Restarted GMRES with optional right preconditioner M_right ~ A^{-1}:
// solves A x = b via A M y = b, x = M y, so the recurrence residual is the
// true residual. Deterministic; x is used as the initial guess.
GmresStat gmres(const LinOp& A, const LinOp* M_right, const cvec& b, cvec& x,
                const GmresOptions& opts);

}  // namespace kg
