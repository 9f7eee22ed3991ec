#include "kg/krylov.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "kg/errors.hpp"

namespace kg {

namespace spectral_fn {

SpectralFn sqrt_fn() {
  return [](double x) { return std::sqrt(std::max(x, 0.0)); };
}
SpectralFn inv_sqrt() {
  return [](double x) { return 1.0 / std::sqrt(std::max(x, 1e-300)); };
}
SpectralFn cos_sqrt(double t) {
  return [t](double x) { return std::cos(t * std::sqrt(std::max(x, 0.0))); };
}
SpectralFn sinc_sqrt(double t) {
  return [t](double x) {
    const double s = std::sqrt(std::max(x, 0.0));
    if (s * std::abs(t) < 1e-8) return t;  // sin(ts)/s -> t as s -> 0
    return std::sin(t * s) / s;
  };
}
SpectralFn sqrt_sin_sqrt(double t) {
  return [t](double x) {
    const double s = std::sqrt(std::max(x, 0.0));
    return s * std::sin(t * s);
  };
}
bool needs_nonnegative(const std::string&) { return true; }

}  // namespace spectral_fn

namespace {

// Eigen-decomposes the j x j tridiagonal T and returns y = |f| * U fn(D) U^T e1
// for each function.
void tridiag_fn_coeffs(const std::vector<double>& alpha, const std::vector<double>& beta, int j,
                       const std::vector<SpectralFn>& fns, double f_norm,
                       std::vector<Eigen::VectorXd>& ys, double& min_ritz) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(j, j);
  for (int i = 0; i < j; ++i) {
    T(i, i) = alpha[i];
    if (i + 1 < j) {
      T(i, i + 1) = beta[i];
      T(i + 1, i) = beta[i];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  const Eigen::VectorXd& theta = es.eigenvalues();
  const Eigen::MatrixXd& U = es.eigenvectors();
  min_ritz = theta(0);
  ys.clear();
  ys.reserve(fns.size());
  for (const auto& fn : fns) {
    Eigen::VectorXd fd(j);
    for (int i = 0; i < j; ++i) fd(i) = fn(theta(i));
    // fn(T) e1 = U fd .* (U^T e1)
    Eigen::VectorXd ut_e1 = U.row(0).transpose();
    Eigen::VectorXd y = U * (fd.cwiseProduct(ut_e1)) * f_norm;
    ys.push_back(std::move(y));
  }
}

}  // namespace

std::vector<cvec> krylov_apply_multi(const LinOp& op, const std::vector<SpectralFn>& fns,
                                     const cvec& f, const KrylovSpec& spec,
                                     bool guard_nonnegative, KrylovReport* report) {
  if (spec.max_dim < 2) throw InvalidArgument("krylov: max_dim must be >= 2");
  if (!(spec.tol > 0.0)) throw InvalidArgument("krylov: tol must be > 0");
  const std::size_t N = f.size();
  const double f_norm = vec_norm(f);
  std::vector<cvec> result(fns.size(), cvec(N, cplx(0.0, 0.0)));
  if (f_norm == 0.0) return result;

  std::vector<cvec> basis;
  basis.push_back(f);
  for (auto& z : basis[0]) z /= f_norm;

  std::vector<double> alpha, beta;
  std::vector<Eigen::VectorXd> ys_prev, ys;
  double min_ritz = 0.0;
  int converged_streak = 0;
  double last_increment = 0.0;
  int jdim = 0;

  cvec w(N);
  for (int j = 1; j <= spec.max_dim; ++j) {
    op(basis[j - 1], w);
    if (j >= 2) {
      const double b = beta[j - 2];
      for (std::size_t i = 0; i < N; ++i) w[i] -= b * basis[j - 2][i];
    }
    const double a = vec_dot(basis[j - 1], w).real();
    alpha.push_back(a);
    for (std::size_t i = 0; i < N; ++i) w[i] -= a * basis[j - 1][i];
    if (spec.reorthogonalize) {
      for (const auto& v : basis) {
        const cplx c = vec_dot(v, w);
        for (std::size_t i = 0; i < N; ++i) w[i] -= c * v[i];
      }
    }
    const double b = vec_norm(w);
    jdim = j;

    tridiag_fn_coeffs(alpha, beta, j, fns, f_norm, ys, min_ritz);
    const double tscale = std::max(1.0, std::abs(alpha[0]));
    if (guard_nonnegative && min_ritz < -spec.tol * tscale)
      throw IndefiniteOperator(
          "krylov: operator is not positive semidefinite (Ritz value " +
              std::to_string(min_ritz) + ")",
          min_ritz);

    if (!ys_prev.empty()) {
      double inc = 0.0;
      for (std::size_t q = 0; q < fns.size(); ++q) {
        double d2 = 0.0;
        for (int i = 0; i < j; ++i) {
          const double prev = i < ys_prev[q].size() ? ys_prev[q](i) : 0.0;
          const double diff = ys[q](i) - prev;
          d2 += diff * diff;
        }
        inc = std::max(inc, std::sqrt(d2));
      }
      last_increment = inc;
      if (inc <= spec.tol * f_norm) {
        ++converged_streak;
        if (converged_streak >= 2) break;
      } else {
        converged_streak = 0;
      }
    }
    ys_prev = ys;

    if (b < 1e-14 * f_norm) break;  // invariant subspace reached: result exact
    if (j == spec.max_dim)
      throw ConvergenceFailure(
          "krylov: no convergence at max_dim=" + std::to_string(spec.max_dim) +
              " (last increment " + std::to_string(last_increment) + ")",
          last_increment);
    beta.push_back(b);
    cvec v_next = w;
    for (auto& z : v_next) z /= b;
    basis.push_back(std::move(v_next));
  }

  for (std::size_t q = 0; q < fns.size(); ++q)
    for (int i = 0; i < jdim; ++i) {
      const cplx c = ys[q](i);
      const cvec& v = basis[i];
      for (std::size_t idx = 0; idx < N; ++idx) result[q][idx] += c * v[idx];
    }

  if (report) {
    report->dim = jdim;
    report->last_increment = last_increment;
    report->min_ritz = min_ritz;
  }
  return result;
}

ScalarField krylov_apply_fn(const LinOp& op, const SpectralFn& fn, const ScalarField& f,
                            const KrylovSpec& spec, bool guard_nonnegative,
                            KrylovReport* report) {
  auto res = krylov_apply_multi(op, {fn}, f.v, spec, guard_nonnegative, report);
  ScalarField out(f.grid, f.space);
  out.v = std::move(res[0]);
  return out;
}

std::vector<EigenPair> lanczos_lowest(const LinOp& op, std::size_t dim_vec, double threshold,
                                      int max_pairs, const KrylovSpec& spec, std::uint64_t seed) {
  std::vector<EigenPair> found;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto deflate = [&found](cvec& v) {
    for (const auto& ep : found) {
      const cplx c = vec_dot(ep.vector, v);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * ep.vector[i];
    }
  };
  LinOp op_defl = [&](const cvec& in, cvec& out) {
    cvec tmp = in;
    deflate(tmp);
    op(tmp, out);
    deflate(out);
  };

  for (int round = 0; round < max_pairs; ++round) {
    cvec start(dim_vec);
    for (auto& z : start) z = cplx(gauss(rng), gauss(rng));
    deflate(start);
    const double snorm = vec_norm(start);
    if (snorm < 1e-12) break;
    for (auto& z : start) z /= snorm;

    // plain Lanczos sweep storing the basis, then take the lowest Ritz pair
    std::vector<cvec> basis{start};
    std::vector<double> alpha, beta;
    cvec w(dim_vec);
    const int sweep = std::min<std::size_t>(spec.max_dim, dim_vec);
    for (int j = 1; j <= sweep; ++j) {
      op_defl(basis[j - 1], w);
      if (j >= 2)
        for (std::size_t i = 0; i < dim_vec; ++i) w[i] -= beta[j - 2] * basis[j - 2][i];
      const double a = vec_dot(basis[j - 1], w).real();
      alpha.push_back(a);
      for (std::size_t i = 0; i < dim_vec; ++i) w[i] -= a * basis[j - 1][i];
      for (const auto& v : basis) {
        const cplx c = vec_dot(v, w);
        for (std::size_t i = 0; i < dim_vec; ++i) w[i] -= c * v[i];
      }
      const double b = vec_norm(w);
      if (b < 1e-13 || j == sweep) break;
      beta.push_back(b);
      cvec nv = w;
      for (auto& z : nv) z /= b;
      basis.push_back(std::move(nv));
    }

    const int j = static_cast<int>(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(j, j);
    for (int i = 0; i < j; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < j) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const double theta = es.eigenvalues()(0);
    if (theta >= threshold) break;  // nothing new below threshold

    Eigen::VectorXd y = es.eigenvectors().col(0);
    cvec phi(dim_vec, cplx(0.0, 0.0));
    for (int i = 0; i < j; ++i)
      for (std::size_t idx = 0; idx < dim_vec; ++idx) phi[idx] += y(i) * basis[i][idx];
    deflate(phi);
    const double pn = vec_norm(phi);
    if (pn < 1e-10) break;
    for (auto& z : phi) z /= pn;

    // true residual against the *undeflated* operator
    cvec hphi(dim_vec);
    op(phi, hphi);
    double lam = vec_dot(phi, hphi).real();
    double res2 = 0.0;
    for (std::size_t i = 0; i < dim_vec; ++i) res2 += std::norm(hphi[i] - lam * phi[i]);
    EigenPair ep;
    ep.value = lam;
    ep.vector = std::move(phi);
    ep.residual = std::sqrt(res2);
    found.push_back(std::move(ep));
  }

  std::sort(found.begin(), found.end(),
            [](const EigenPair& a, const EigenPair& b) { return a.value < b.value; });
  return found;
}

double power_iteration_largest(const LinOp& op, std::size_t dim_vec, int iters,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  cvec v(dim_vec);
  for (auto& z : v) z = cplx(gauss(rng), gauss(rng));
  double nrm = vec_norm(v);
  for (auto& z : v) z /= nrm;
  cvec w(dim_vec);
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    op(v, w);
    lam = vec_norm(w);
    if (lam == 0.0) return 0.0;
    for (std::size_t i = 0; i < dim_vec; ++i) v[i] = w[i] / lam;
  }
  return lam;
}

}  // namespace kg
