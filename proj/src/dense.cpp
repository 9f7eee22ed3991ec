#include "kg/dense.hpp"

#include <cmath>

#include "kg/errors.hpp"

namespace kg {

Eigen::MatrixXcd materialize(const LinOp& op, std::size_t dim) {
  Eigen::MatrixXcd M(dim, dim);
  cvec e(dim, cplx(0.0, 0.0)), col(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    e[j] = cplx(1.0, 0.0);
    op(e, col);
    for (std::size_t i = 0; i < dim; ++i) M(i, j) = col[i];
    e[j] = cplx(0.0, 0.0);
  }
  return M;
}

namespace {
void check_small(const PotentialSet& p) {
  if (p.grid->size() > 1728)
    throw InvalidArgument("dense oracle restricted to n^3 <= 1728 (n <= 12), got n=" +
                          std::to_string(p.grid->n));
}

Eigen::MatrixXcd sqrt_from_eig(const DenseEig& eig, double shift) {
  const auto dim = eig.values.size();
  Eigen::VectorXd roots(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double lam = eig.values(i) + shift;
    if (lam < -1e-10)
      throw IndefiniteOperator("dense B: negative eigenvalue " + std::to_string(lam), lam);
    roots(i) = std::sqrt(std::max(lam, 0.0));
  }
  return eig.vectors * roots.asDiagonal() * eig.vectors.adjoint();
}
}  // namespace

DenseEig dense_eig_schrodinger(const PotentialSet& p, bool with_V) {
  check_small(p);
  const std::size_t N = p.grid->size();
  LinOp op = [&p, with_V](const cvec& in, cvec& out) {
    ScalarField f(p.grid);
    f.v = in;
    ScalarField g = with_V ? apply_H(p, f) : apply_H0(p, f);
    out = std::move(g.v);
  };
  Eigen::MatrixXcd M = materialize(op, N);
  M = 0.5 * (M + M.adjoint().eval());  // symmetrize roundoff
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
  return {es.eigenvalues(), es.eigenvectors()};
}

Eigen::MatrixXcd dense_operator(const PotentialSet& p, OpKind kind) {
  check_small(p);
  const std::size_t N = p.grid->size();
  switch (kind) {
    case OpKind::H0:
    case OpKind::H: {
      const bool with_V = (kind == OpKind::H);
      LinOp op = [&p, with_V](const cvec& in, cvec& out) {
        ScalarField f(p.grid);
        f.v = in;
        ScalarField g = with_V ? apply_H(p, f) : apply_H0(p, f);
        out = std::move(g.v);
      };
      return materialize(op, N);
    }
    case OpKind::B:
      return sqrt_from_eig(dense_eig_schrodinger(p, false), p.m * p.m);
    case OpKind::B_V:
      return sqrt_from_eig(dense_eig_schrodinger(p, true), p.m * p.m);
    case OpKind::K: {
      Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(2 * N, 2 * N);
      Eigen::MatrixXcd Hm = dense_operator(p, OpKind::H);
      const double m2 = p.m * p.m;
      for (std::size_t i = 0; i < N; ++i) {
        K(i, N + i) = cplx(0.0, 1.0);
        for (std::size_t j = 0; j < N; ++j) K(N + i, j) = cplx(0.0, -1.0) * Hm(i, j);
        K(N + i, i) += cplx(0.0, -1.0) * m2;
      }
      return K;
    }
  }
  throw InvalidArgument("dense_operator: unknown kind");
}

cvec dense_apply_fn(const DenseEig& eig, const std::function<double(double)>& g, const cvec& f) {
  const auto dim = eig.values.size();
  Eigen::Map<const Eigen::VectorXcd> fv(f.data(), dim);
  Eigen::VectorXcd c = eig.vectors.adjoint() * fv;
  for (Eigen::Index i = 0; i < dim; ++i) c(i) *= g(eig.values(i));
  Eigen::VectorXcd out = eig.vectors * c;
  return cvec(out.data(), out.data() + dim);
}

cvec dense_apply_cfn(const DenseEig& eig, const std::function<cplx(double)>& g, const cvec& f) {
  const auto dim = eig.values.size();
  Eigen::Map<const Eigen::VectorXcd> fv(f.data(), dim);
  Eigen::VectorXcd c = eig.vectors.adjoint() * fv;
  for (Eigen::Index i = 0; i < dim; ++i) c(i) *= g(eig.values(i));
  Eigen::VectorXcd out = eig.vectors * c;
  return cvec(out.data(), out.data() + dim);
}

StateVector dense_k_apply(const DenseEig& eig, double m, const std::function<cplx(cplx)>& f,
                          const StateVector& s) {
  const auto dim = eig.values.size();
  Eigen::Map<const Eigen::VectorXcd> psi(s.psi.v.data(), dim);
  Eigen::Map<const Eigen::VectorXcd> pi(s.pi.v.data(), dim);
  Eigen::VectorXcd a = eig.vectors.adjoint() * psi;
  Eigen::VectorXcd b = eig.vectors.adjoint() * pi;
  const double m2 = m * m;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double lam = eig.values(i) + m2;
    if (lam <= 0.0)
      throw SupercriticalPotential(
          "dense_k_apply: eigenvalue at or below -m^2 (lambda_min + m^2 = " +
              std::to_string(lam) + ")",
          eig.values(i));
    const double mu = std::sqrt(lam);
    const cplx fp = f(cplx(mu, 0.0));
    const cplx fm = f(cplx(-mu, 0.0));
    const cplx fe = 0.5 * (fp + fm);
    const cplx fo = 0.5 * (fp - fm);
    const cplx ai = a(i), bi = b(i);
    a(i) = fe * ai + cplx(0.0, 1.0) * fo / mu * bi;
    b(i) = cplx(0.0, -1.0) * mu * fo * ai + fe * bi;
  }
  StateVector out;
  out.psi = ScalarField(s.psi.grid);
  out.pi = ScalarField(s.pi.grid);
  Eigen::VectorXcd oa = eig.vectors * a;
  Eigen::VectorXcd ob = eig.vectors * b;
  for (Eigen::Index i = 0; i < dim; ++i) {
    out.psi.v[i] = oa(i);
    out.pi.v[i] = ob(i);
  }
  return out;
}

cvec dense_resolvent_apply(const DenseEig& eig, cplx omega, const cvec& f) {
  return dense_apply_cfn(
      eig, [omega](double lam) { return 1.0 / (cplx(lam, 0.0) - omega); }, f);
}

}  // namespace kg
