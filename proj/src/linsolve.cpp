#include "kg/linsolve.hpp"

#include <cmath>

#include "kg/errors.hpp"

namespace kg {

// Restarted GMRES, modified Gram-Schmidt + Givens rotations. The inner loop
// drives the recurrence residual slightly below target; the outer loop always
// re-checks the true residual, so drift across restarts cannot fake success.
GmresStat gmres(const LinOp& A, const LinOp* M_right, const cvec& b, cvec& x,
                const GmresOptions& opts) {
  const std::size_t N = b.size();
  if (x.size() != N) x.assign(N, cplx(0.0, 0.0));
  const double b_norm = vec_norm(b);
  GmresStat stat;
  if (b_norm == 0.0) {
    x.assign(N, cplx(0.0, 0.0));
    stat.converged = true;
    stat.rel_residual = 0.0;
    return stat;
  }

  auto apply_AM = [&](const cvec& in, cvec& out) {
    if (M_right) {
      cvec tmp(N);
      (*M_right)(in, tmp);
      A(tmp, out);
    } else {
      A(in, out);
    }
  };

  const int m = std::max(2, opts.restart);
  cvec w(N), r(N);

  while (true) {
    A(x, r);
    for (std::size_t i = 0; i < N; ++i) r[i] = b[i] - r[i];
    const double beta = vec_norm(r);
    stat.rel_residual = beta / b_norm;
    if (stat.rel_residual <= opts.tol) {
      stat.converged = true;
      return stat;
    }
    if (stat.iterations >= opts.max_iter) return stat;

    std::vector<cvec> V{r};
    for (auto& z : V[0]) z /= beta;
    std::vector<std::vector<cplx>> R;  // rotated Hessenberg columns (upper triangular part)
    std::vector<cplx> cs, sn;
    std::vector<cplx> g{cplx(beta, 0.0)};

    int j = 0;
    bool breakdown = false;
    for (; j < m && stat.iterations < opts.max_iter; ++j) {
      ++stat.iterations;
      apply_AM(V[j], w);
      std::vector<cplx> h(j + 1, cplx(0.0, 0.0));
      for (int i = 0; i <= j; ++i) {
        h[i] = vec_dot(V[i], w);
        for (std::size_t q = 0; q < N; ++q) w[q] -= h[i] * V[i][q];
      }
      const double h_sub = vec_norm(w);

      // rotate the new column by the accumulated Givens rotations
      cplx h_last = cplx(h_sub, 0.0);
      for (int i = 0; i < j; ++i) {
        const cplx t = std::conj(cs[i]) * h[i] + std::conj(sn[i]) * h[i + 1];
        h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
        h[i] = t;
      }
      // new rotation zeroing the subdiagonal
      {
        const cplx a = h[j];
        const cplx bb = h_last;
        const double denom = std::sqrt(std::norm(a) + std::norm(bb));
        cplx c(1.0, 0.0), s(0.0, 0.0);
        if (denom > 0.0) {
          c = a / denom;
          s = bb / denom;
        }
        cs.push_back(c);
        sn.push_back(s);
        h[j] = cplx(denom, 0.0);
      }
      R.push_back(h);
      g.push_back(-sn[j] * g[j]);
      g[j] = std::conj(cs[j]) * g[j];

      stat.rel_residual = std::abs(g[j + 1]) / b_norm;
      breakdown = h_sub <= 1e-14 * b_norm;
      if (stat.rel_residual <= 0.3 * opts.tol || breakdown) {
        ++j;
        break;
      }
      cvec v_next = w;
      for (auto& z : v_next) z /= h_sub;
      V.push_back(std::move(v_next));
    }

    // back substitution: R y = g
    const int k = j;
    if (k == 0) return stat;
    std::vector<cplx> y(k);
    for (int i = k - 1; i >= 0; --i) {
      cplx acc = g[i];
      for (int q = i + 1; q < k; ++q) acc -= R[q][i] * y[q];
      if (std::abs(R[i][i]) < 1e-300) {
        y[i] = cplx(0.0, 0.0);
        continue;
      }
      y[i] = acc / R[i][i];
    }
    cvec update(N, cplx(0.0, 0.0));
    for (int i = 0; i < k; ++i)
      for (std::size_t q = 0; q < N; ++q) update[q] += y[i] * V[i][q];
    if (M_right) {
      cvec tmp(N);
      (*M_right)(update, tmp);
      update.swap(tmp);
    }
    for (std::size_t q = 0; q < N; ++q) x[q] += update[q];

    if (breakdown) {
      // exact subspace solution; final true-residual check decides
      A(x, r);
      double tr = 0.0;
      for (std::size_t i = 0; i < N; ++i) tr += std::norm(b[i] - r[i]);
      stat.rel_residual = std::sqrt(tr) / b_norm;
      stat.converged = stat.rel_residual <= opts.tol;
      return stat;
    }
  }
}

}  // namespace kg
