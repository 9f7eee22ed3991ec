#include "kg/resolvent.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <random>

#include "kg/errors.hpp"
#include "kg/fft.hpp"

namespace kg {

namespace {

void check_position(const ScalarField& f) {
  if (f.space != Space::Position)
    throw InvalidArgument("resolvent: expected a position-space field");
}

LinOp shifted_operator(const PotentialSet& p, cplx omega, bool with_V) {
  const PotentialSet* pp = &p;
  GridPtr grid = p.grid;
  return [pp, grid, omega, with_V](const cvec& in, cvec& out) {
    ScalarField f(grid);
    f.v = in;
    ScalarField g = with_V ? apply_H(*pp, f) : apply_H0(*pp, f);
    out = std::move(g.v);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= omega * in[i];
  };
}

// (|k|^2 - omega)^{-1}: exact inverse of the free shifted operator.
LinOp free_inverse_precond(const GridPtr& grid, cplx omega) {
  return [grid, omega](const cvec& in, cvec& out) {
    out = in;
    fft::forward_raw(grid->n, out.data());
    const auto& g = *grid;
    for (int jx = 0; jx < g.n; ++jx)
      for (int jy = 0; jy < g.n; ++jy)
        for (int jz = 0; jz < g.n; ++jz)
          out[g.index(jx, jy, jz)] /= (g.k_sq(jx, jy, jz) - omega);
    fft::inverse_raw(grid->n, out.data());
  };
}

void guard_real_omega(const GridPtr& grid, cplx omega) {
  if (omega.imag() != 0.0) return;
  // real omega must clear every grid multiplier value
  const auto& g = *grid;
  double dist = 1e300;
  for (int jx = 0; jx < g.n; ++jx)
    for (int jy = 0; jy < g.n; ++jy)
      for (int jz = 0; jz < g.n; ++jz)
        dist = std::min(dist, std::abs(g.k_sq(jx, jy, jz) - omega.real()));
  if (dist < 1e-12 * std::max(1.0, std::abs(omega.real())))
    throw InvalidArgument("resolvent: real omega collides with a grid multiplier value");
}

ScalarField solve_resolvent(const PotentialSet& p, const ResolventQuery& q, const ScalarField& f,
                            bool with_V, GmresStat* stat) {
  check_position(f);
  guard_real_omega(p.grid, q.omega);
  const bool free_case = p.zero_A && (!with_V || p.zero_V);
  if (free_case) {
    ScalarField u = apply_multiplier(f, [&q](double kx, double ky, double kz) {
      return 1.0 / (cplx(kx * kx + ky * ky + kz * kz, 0.0) - q.omega);
    });
    if (stat) *stat = GmresStat{0, 0.0, true};
    return u;
  }
  LinOp A = shifted_operator(p, q.omega, with_V);
  LinOp M = free_inverse_precond(p.grid, q.omega);
  GmresOptions opts;
  opts.tol = q.tol;
  opts.max_iter = q.max_iter;
  cvec x;
  GmresStat st = gmres(A, &M, f.v, x, opts);
  if (stat) *stat = st;
  if (!st.converged)
    throw ConvergenceFailure("resolvent solve failed at omega=(" + std::to_string(q.omega.real()) +
                                 "," + std::to_string(q.omega.imag()) + "), residual " +
                                 std::to_string(st.rel_residual),
                             st.rel_residual);
  ScalarField u(p.grid);
  u.v = std::move(x);
  return u;
}

}  // namespace

ScalarField solve_R(const PotentialSet& p, const ResolventQuery& q, const ScalarField& f,
                    GmresStat* stat) {
  return solve_resolvent(p, q, f, true, stat);
}

ScalarField solve_R0(const PotentialSet& p, const ResolventQuery& q, const ScalarField& f,
                     GmresStat* stat) {
  return solve_resolvent(p, q, f, false, stat);
}

ScalarField free_resolvent_apply(cplx omega, const ScalarField& f) {
  check_position(f);
  if (omega.imag() == 0.0 && omega.real() >= 0.0)
    throw InvalidArgument("free_resolvent_apply: omega on [0, inf)");
  return apply_multiplier(f, [omega](double kx, double ky, double kz) {
    return 1.0 / (cplx(kx * kx + ky * ky + kz * kz, 0.0) - omega);
  });
}

ScalarField resolvent_derivative(const PotentialSet& p, const ResolventQuery& q, int k,
                                 const ScalarField& f) {
  if (k < 1 || k > 2) throw InvalidArgument("resolvent_derivative: k must be 1 or 2");
  ScalarField u = solve_R(p, q, f);
  for (int i = 0; i < k; ++i) u = solve_R(p, q, u);
  double factorial = (k == 1) ? 1.0 : 2.0;
  return scaled(u, factorial);
}

// --- limiting absorption -----------------------------------------------

LapResult lap_limit(const PotentialSet& p, double omega, int side, const ScalarField& f,
                    const LapSchedule& sched, double sigma, double solver_tol) {
  if (!(sched.eps0 > 0.0) || !(sched.ratio > 0.0) || !(sched.ratio < 1.0) || sched.count < 3)
    throw InvalidArgument("lap_limit: bad schedule");
  if (side != 1 && side != -1) throw InvalidArgument("lap_limit: side must be +1 or -1");

  std::vector<ScalarField> u;
  u.reserve(sched.count);
  GmresOptions opts;
  opts.tol = solver_tol;
  opts.max_iter = 2000;
  cvec x;  // warm start across the schedule
  bool any_failed = false;
  for (int j = 0; j < sched.count; ++j) {
    const double eps = sched.eps0 * std::pow(sched.ratio, j);
    const cplx om(omega, side * eps);
    const bool free_case = p.zero_A && p.zero_V;
    if (free_case) {
      ResolventQuery q{om, solver_tol, opts.max_iter};
      u.push_back(solve_R(p, q, f));
      continue;
    }
    LinOp A = shifted_operator(p, om, true);
    LinOp Mj = free_inverse_precond(p.grid, om);
    GmresStat st = gmres(A, &Mj, f.v, x, opts);
    if (!st.converged) any_failed = true;
    ScalarField uj(p.grid);
    uj.v = x;
    u.push_back(std::move(uj));
  }

  LapResult res;
  const WeightedNormSpec wspec{0, -sigma};
  for (int j = 0; j + 1 < sched.count; ++j)
    res.d.push_back(weighted_norm(subtracted(u[j + 1], u[j]), wspec));
  for (std::size_t j = 0; j + 1 < res.d.size(); ++j)
    res.ratios.push_back(res.d[j] > 0.0 ? res.d[j + 1] / res.d[j] : 0.0);

  // failure: differences not eventually decreasing (checked on the tail)
  bool tail_decreasing = res.ratios.size() >= 2;
  for (std::size_t j = res.ratios.size() >= 2 ? res.ratios.size() - 2 : 0; j < res.ratios.size();
       ++j)
    if (!(res.ratios[j] < 0.999)) tail_decreasing = false;
  res.failure_flag = !tail_decreasing || any_failed;

  // Richardson extrapolation with the observed tail ratio
  double theta = 0.0;
  int used = 0;
  for (std::size_t j = res.ratios.size() >= 2 ? res.ratios.size() - 2 : 0; j < res.ratios.size();
       ++j) {
    theta += res.ratios[j];
    ++used;
  }
  theta = used > 0 ? theta / used : 0.0;
  res.estimated_order = theta > 0.0 ? std::log(theta) / std::log(sched.ratio) : 0.0;
  res.u_limit = u.back();
  if (!res.failure_flag && theta > 0.0 && theta < 0.999) {
    ScalarField step = subtracted(u[u.size() - 1], u[u.size() - 2]);
    axpy(theta / (1.0 - theta), step, res.u_limit);
  }
  return res;
}

// --- first-order-system resolvent ----------------------------------------

StateVector apply_V_block(const PotentialSet& p, const StateVector& s) {
  StateVector out;
  out.psi = ScalarField(s.psi.grid);
  out.pi = multiply(p.V, s.psi);
  for (auto& z : out.pi.v) z *= cplx(0.0, -1.0);
  return out;
}

namespace {

// Free first-order resolvent (A=V=0) as a frequency multiplier; also the
// right preconditioner of the coupled solve. mode mu = sqrt(|k|^2 + m^2):
//   [ f_e        i f_o / mu ]          f(z) = 1/(z - omega)
//   [ -i mu f_o  f_e        ]
void free_kg_resolvent_raw(const GridPtr& grid, double m, cplx omega, cvec& psi, cvec& pi) {
  fft::forward_raw(grid->n, psi.data());
  fft::forward_raw(grid->n, pi.data());
  const auto& g = *grid;
  const double m2 = m * m;
  for (int jx = 0; jx < g.n; ++jx)
    for (int jy = 0; jy < g.n; ++jy)
      for (int jz = 0; jz < g.n; ++jz) {
        const std::size_t id = g.index(jx, jy, jz);
        const double mu = std::sqrt(g.k_sq(jx, jy, jz) + m2);
        const cplx fp = 1.0 / (cplx(mu, 0.0) - omega);
        const cplx fm = 1.0 / (cplx(-mu, 0.0) - omega);
        const cplx fe = 0.5 * (fp + fm);
        const cplx fo = 0.5 * (fp - fm);
        const cplx a = psi[id], b = pi[id];
        psi[id] = fe * a + cplx(0.0, 1.0) * fo / mu * b;
        pi[id] = cplx(0.0, -1.0) * mu * fo * a + fe * b;
      }
  fft::inverse_raw(grid->n, psi.data());
  fft::inverse_raw(grid->n, pi.data());
}

}  // namespace

KgResolventResult kg_resolvent(const PotentialSet& p, const ResolventQuery& q,
                               const StateVector& F, bool skip_coupled) {
  check_same_grid(F.psi, F.pi);
  const cplx omega = q.omega;
  const cplx zeta = omega * omega - p.m * p.m;

  KgResolventResult res;
  // blockwise route: one scalar solve at zeta
  {
    ScalarField rhs = scaled(F.psi, omega);
    axpy(cplx(0.0, 1.0), F.pi, rhs);
    ResolventQuery qs = q;
    qs.omega = zeta;
    ScalarField u = solve_R(p, qs, rhs);
    res.out.psi = u;
    res.out.pi = scaled(F.psi, cplx(0.0, -1.0));
    axpy(cplx(0.0, -1.0) * omega, u, res.out.pi);
  }
  if (skip_coupled) return res;

  // coupled route: GMRES on the stacked first-order system
  const std::size_t N = p.grid->size();
  const PotentialSet* pp = &p;
  GridPtr grid = p.grid;
  LinOp A = [pp, grid, omega, N](const cvec& in, cvec& out) {
    StateVector s;
    s.psi = ScalarField(grid);
    s.pi = ScalarField(grid);
    std::copy(in.begin(), in.begin() + N, s.psi.v.begin());
    std::copy(in.begin() + N, in.end(), s.pi.v.begin());
    StateVector ks = apply_K(*pp, s);
    out.resize(2 * N);
    for (std::size_t i = 0; i < N; ++i) out[i] = ks.psi.v[i] - omega * in[i];
    for (std::size_t i = 0; i < N; ++i) out[N + i] = ks.pi.v[i] - omega * in[N + i];
  };
  double mloc = p.m;
  LinOp M = [grid, mloc, omega, N](const cvec& in, cvec& out) {
    cvec psi(in.begin(), in.begin() + N), pi(in.begin() + N, in.end());
    free_kg_resolvent_raw(grid, mloc, omega, psi, pi);
    out.resize(2 * N);
    std::copy(psi.begin(), psi.end(), out.begin());
    std::copy(pi.begin(), pi.end(), out.begin() + N);
  };
  cvec b(2 * N), x;
  std::copy(F.psi.v.begin(), F.psi.v.end(), b.begin());
  std::copy(F.pi.v.begin(), F.pi.v.end(), b.begin() + N);
  GmresOptions opts;
  opts.tol = q.tol;
  opts.max_iter = q.max_iter;
  GmresStat st = gmres(A, &M, b, x, opts);
  if (!st.converged)
    throw ConvergenceFailure("kg_resolvent: coupled solve failed, residual " +
                                 std::to_string(st.rel_residual),
                             st.rel_residual);

  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    num += std::norm(res.out.psi.v[i] - x[i]) + std::norm(res.out.pi.v[i] - x[N + i]);
    den += std::norm(res.out.psi.v[i]) + std::norm(res.out.pi.v[i]);
  }
  res.cross_discrepancy = den > 0.0 ? std::sqrt(num / den) : 0.0;
  return res;
}

// --- Born checks ----------------------------------------------------------

StateVector kg_resolvent_adjoint(const PotentialSet& p, const ResolventQuery& q,
                                 const StateVector& G) {
  const cplx omc = std::conj(q.omega);
  const cplx zeta_c = omc * omc - p.m * p.m;
  ScalarField rhs = G.psi;
  axpy(cplx(0.0, 1.0) * omc, G.pi, rhs);
  ResolventQuery qs = q;
  qs.omega = zeta_c;
  ScalarField u = solve_R(p, qs, rhs);
  StateVector out;
  out.psi = scaled(G.pi, cplx(0.0, 1.0));
  axpy(omc, u, out.psi);
  out.pi = scaled(u, cplx(0.0, -1.0));
  return out;
}

PotentialSet without_V(const PotentialSet& p) {
  PotentialSet q = p;
  std::fill(q.V.begin(), q.V.end(), 0.0);
  q.zero_V = true;
  q.cache = std::make_shared<SpectralCertCache>();
  return q;
}

BornSeriesReport born_series_residual(const PotentialSet& p, const ResolventQuery& q,
                                      const StateVector& F, double sigma) {
  PotentialSet p0 = without_V(p);
  auto R = [&](const StateVector& s) { return kg_resolvent(p, q, s, true).out; };
  auto R0 = [&](const StateVector& s) { return kg_resolvent(p0, q, s, true).out; };

  StateVector lhs = R(F);
  StateVector r0F = R0(F);
  // two-insertion expansion: R0 F - R0 V R0 F + R0 V R0 V R F
  StateVector term2 = R0(apply_V_block(p, r0F));
  StateVector term3 = R0(apply_V_block(p, R0(apply_V_block(p, lhs))));
  StateVector rhs = subtracted(r0F, term2);
  rhs = added(rhs, term3);

  auto f_norm = [sigma](const StateVector& s) {
    return energy_norm(s, -sigma);
  };
  BornSeriesReport rep;
  rep.lhs_norm = f_norm(lhs);
  rep.residual_second_order = rep.lhs_norm > 0.0 ? f_norm(subtracted(lhs, rhs)) / rep.lhs_norm : 0.0;
  // one-step identity: R = R0 - R0 V R
  StateVector rhs1 = subtracted(r0F, R0(apply_V_block(p, lhs)));
  rep.residual_one_step = rep.lhs_norm > 0.0 ? f_norm(subtracted(lhs, rhs1)) / rep.lhs_norm : 0.0;
  return rep;
}

BornSplittingReport born_splitting_check(const PotentialSet& p, const ResolventQuery& q,
                                         const ScalarField& f) {
  check_position(f);
  PotentialSet p0 = without_V(p);
  ResolventQuery q_inner = q;
  q_inner.tol = 0.2 * q.tol;

  // inner operator: g + V R0(omega) g
  const PotentialSet* pp = &p;
  const PotentialSet* pp0 = &p0;
  GridPtr grid = p.grid;
  LinOp A = [pp, pp0, grid, q_inner](const cvec& in, cvec& out) {
    ScalarField g(grid);
    g.v = in;
    ScalarField r0g = solve_R0(*pp0, q_inner, g);
    out = in;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += pp->V[i] * r0g.v[i];
  };
  GmresOptions opts;
  opts.tol = q.tol;
  opts.max_iter = q.max_iter;
  cvec x;
  GmresStat st = gmres(A, nullptr, f.v, x, opts);
  BornSplittingReport rep;
  rep.inner_iterations = st.iterations;
  rep.amplification = vec_norm(x) / vec_norm(f.v);
  rep.ill_conditioned_flag = !st.converged || rep.amplification > 20.0 ||
                             st.iterations > std::max(60, q.max_iter / 4);
  if (!st.converged)
    throw ConvergenceFailure("born_splitting_check: inner solve failed, residual " +
                                 std::to_string(st.rel_residual),
                             st.rel_residual);
  ScalarField g(p.grid);
  g.v = std::move(x);
  ScalarField u_split = solve_R0(p0, q_inner, g);
  ScalarField u_direct = solve_R(p, q, f);
  const double den = norm_l2(u_direct);
  rep.rel_difference = den > 0.0 ? norm_l2(subtracted(u_split, u_direct)) / den : 0.0;
  return rep;
}

// --- slope fits -----------------------------------------------------------

double SlopeTarget::expected_exponent() const {
  switch (id) {
    case Id::HighEnergy:
      return -0.5 * (1 - l + k);
    case Id::LowEnergyDerivative:
      return 0.5 - k;
    case Id::SandwichedPotential:
      return -2.0;
    case Id::BornComposite:
      return -2.0;
    case Id::MagneticHighEnergy:
      return -0.5 * (1 - l);
    case Id::MagneticFullHighEnergy:
      return -0.5 * (1 - l + k);
  }
  return 0.0;
}

std::vector<cplx> ray_negative_real(double lo, double hi, int count) {
  std::vector<cplx> out;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    out.emplace_back(-lo * std::pow(hi / lo, t), 0.0);
  }
  return out;
}

std::vector<cplx> ray_imag_shifted(double lo, double hi, int count, double im) {
  std::vector<cplx> out;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    out.emplace_back(lo * std::pow(hi / lo, t), im);
  }
  return out;
}

std::vector<cplx> ray_imaginary_axis(double lo, double hi, int count) {
  std::vector<cplx> out;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    out.emplace_back(0.0, lo * std::pow(hi / lo, t));
  }
  return out;
}

std::vector<cplx> ray_sqrt_shifted(double lo, double hi, int count, double c) {
  std::vector<cplx> out;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    const double s = lo * std::pow(hi / lo, t);
    out.emplace_back(s, c * std::sqrt(s));
  }
  return out;
}

namespace {

using FieldOp = std::function<ScalarField(const ScalarField&)>;
using StateOp = std::function<StateVector(const StateVector&)>;

// Weighted operator-norm estimate for a scalar-field operator
// T : H^{s_in}_{sig_in} -> H^{s_out}_{sig_out}.
double estimate_weighted_norm(const GridPtr& grid, const FieldOp& T, const FieldOp& T_adj,
                              const WeightedNormSpec& in, const WeightedNormSpec& out, int probes,
                              int power_iters, std::uint64_t seed) {
  auto S = [&](const ScalarField& f) {
    ScalarField g = apply_x_weight(f, -in.sigma);
    g = apply_bracket_grad(g, -static_cast<double>(in.s));
    g = T(g);
    g = apply_bracket_grad(g, static_cast<double>(out.s));
    return apply_x_weight(g, out.sigma);
  };
  auto S_adj = [&](const ScalarField& f) {
    ScalarField g = apply_x_weight(f, out.sigma);
    g = apply_bracket_grad(g, static_cast<double>(out.s));
    g = T_adj(g);
    g = apply_bracket_grad(g, -static_cast<double>(in.s));
    return apply_x_weight(g, -in.sigma);
  };

  double best = 0.0;
  ScalarField best_v;
  for (int pr = 0; pr < probes; ++pr) {
    ScalarField v = random_band_limited(grid, seed + 1000 * pr + 17);
    ScalarField w = S(v);
    const double val = norm_l2(w) / norm_l2(v);
    if (val > best) {
      best = val;
      best_v = v;
    }
  }
  if (best_v.v.empty()) return best;
  ScalarField v = best_v;
  for (int it = 0; it < power_iters; ++it) {
    ScalarField w = S(v);
    const double val = norm_l2(w) / norm_l2(v);
    best = std::max(best, val);
    ScalarField u = S_adj(w);
    const double un = norm_l2(u);
    if (un == 0.0) break;
    v = scaled(u, 1.0 / un);
  }
  return best;
}

// Weighted norm estimate for a state operator T : F_{sig_in} -> F_{sig_out}.
double estimate_weighted_norm_state(const GridPtr& grid, const StateOp& T, const StateOp& T_adj,
                                    double sig_in, double sig_out, int probes, int power_iters,
                                    std::uint64_t seed) {
  auto lam = [](const StateVector& s, double sigma, bool inverse) {
    StateVector out;
    if (inverse) {
      out.psi = apply_bracket_grad(apply_x_weight(s.psi, -sigma), -1.0);
      out.pi = apply_x_weight(s.pi, -sigma);
    } else {
      out.psi = apply_x_weight(apply_bracket_grad(s.psi, 1.0), sigma);
      out.pi = apply_x_weight(s.pi, sigma);
    }
    return out;
  };
  auto lam_adj = [](const StateVector& s, double sigma, bool inverse) {
    StateVector out;
    if (inverse) {
      out.psi = apply_x_weight(apply_bracket_grad(s.psi, -1.0), -sigma);
      out.pi = apply_x_weight(s.pi, -sigma);
    } else {
      out.psi = apply_bracket_grad(apply_x_weight(s.psi, sigma), 1.0);
      out.pi = apply_x_weight(s.pi, sigma);
    }
    return out;
  };
  auto S = [&](const StateVector& s) { return lam(T(lam(s, sig_in, true)), sig_out, false); };
  auto S_adj = [&](const StateVector& s) {
    return lam_adj(T_adj(lam_adj(s, sig_out, false)), sig_in, true);
  };

  double best = 0.0;
  StateVector best_v;
  for (int pr = 0; pr < probes; ++pr) {
    StateVector v = random_state(grid, seed + 1000 * pr + 31);
    StateVector w = S(v);
    const double val = norm_l2(w) / norm_l2(v);
    if (val > best) {
      best = val;
      best_v = v;
    }
  }
  if (best_v.psi.v.empty()) return best;
  StateVector v = best_v;
  for (int it = 0; it < power_iters; ++it) {
    StateVector w = S(v);
    best = std::max(best, norm_l2(w) / norm_l2(v));
    StateVector u = S_adj(w);
    const double un = norm_l2(u);
    if (un == 0.0) break;
    v = scaled(u, 1.0 / un);
  }
  return best;
}

struct LineFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  const int n = static_cast<int>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  LineFit f;
  const double det = n * sxx - sx * sx;
  if (det == 0.0) return f;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / n;
  for (int i = 0; i < n; ++i) {
    const double pred = f.slope * xs[i] + f.intercept;
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - mean) * (ys[i] - mean);
  }
  f.r2 = ss_tot > 0.0 ? std::max(0.0, 1.0 - ss_res / ss_tot) : 1.0;
  return f;
}

}  // namespace

SlopeFit asymptotics_slope(const PotentialSet& p, const SlopeTarget& target,
                           const std::vector<cplx>& omega_samples, double sigma, int probes,
                           int power_iters, double solver_tol, std::uint64_t seed,
                           bool strict_r2) {
  if (omega_samples.size() < 4) throw InvalidArgument("asymptotics_slope: need >= 4 samples");
  SlopeFit fit;
  const GridPtr grid = p.grid;

  auto solve_at = [&](cplx om, const ScalarField& f, bool with_V) {
    ResolventQuery q{om, solver_tol, 3000};
    return with_V ? solve_R(p, q, f) : solve_R0(p, q, f);
  };

  const bool needs_p0 = target.id == SlopeTarget::Id::SandwichedPotential ||
                        target.id == SlopeTarget::Id::BornComposite;
  PotentialSet p0_storage;
  if (needs_p0) p0_storage = without_V(p);
  const PotentialSet& p0 = needs_p0 ? p0_storage : p;

  std::uint64_t widx = 0;
  for (const cplx& omega : omega_samples) {
    double val = 0.0;
    const std::uint64_t s_i = seed + 7919 * (widx++);
    switch (target.id) {
      case SlopeTarget::Id::HighEnergy:
      case SlopeTarget::Id::LowEnergyDerivative:
      case SlopeTarget::Id::MagneticHighEnergy:
      case SlopeTarget::Id::MagneticFullHighEnergy: {
        const bool with_V = target.id != SlopeTarget::Id::MagneticHighEnergy;
        const int k = (target.id == SlopeTarget::Id::MagneticHighEnergy) ? 0 : target.k;
        const double kf = (k == 2) ? 2.0 : 1.0;
        FieldOp T = [&, k, kf, with_V](const ScalarField& f) {
          ScalarField u = solve_at(omega, f, with_V);
          for (int i = 0; i < k; ++i) u = solve_at(omega, u, with_V);
          return scaled(u, kf);
        };
        FieldOp T_adj = [&, k, kf, with_V](const ScalarField& f) {
          ScalarField u = solve_at(std::conj(omega), f, with_V);
          for (int i = 0; i < k; ++i) u = solve_at(std::conj(omega), u, with_V);
          return scaled(u, kf);
        };
        WeightedNormSpec in, out;
        if (target.id == SlopeTarget::Id::HighEnergy) {
          in = {target.s, sigma};
          out = {target.s + target.l, -sigma};
        } else if (target.id == SlopeTarget::Id::LowEnergyDerivative) {
          in = {0, sigma};
          out = {2, -sigma};
        } else {
          in = {1, sigma};
          out = {1 + target.l, -sigma};
        }
        val = estimate_weighted_norm(grid, T, T_adj, in, out, probes, power_iters, s_i);
        break;
      }
      case SlopeTarget::Id::SandwichedPotential: {
        const cplx zeta = omega * omega - p.m * p.m;
        // chain-rule derivatives of V R0(omega^2 - m^2) V in omega
        auto core = [&](cplx z, const ScalarField& f, int powers) {
          ScalarField u = multiply(p.V, f);
          for (int i = 0; i < powers; ++i) {
            ResolventQuery q{z, solver_tol, 3000};
            u = solve_R0(p0, q, u);
          }
          return multiply(p.V, u);
        };
        FieldOp T = [&](const ScalarField& f) {
          if (target.k == 0) return core(zeta, f, 1);
          if (target.k == 1) return scaled(core(zeta, f, 2), 2.0 * omega);
          ScalarField a = scaled(core(zeta, f, 3), 8.0 * omega * omega);
          ScalarField b = scaled(core(zeta, f, 2), 2.0);
          return added(a, b);
        };
        FieldOp T_adj = [&](const ScalarField& f) {
          const cplx zc = std::conj(zeta);
          if (target.k == 0) return core(zc, f, 1);
          if (target.k == 1) return scaled(core(zc, f, 2), std::conj(2.0 * omega));
          ScalarField a = scaled(core(zc, f, 3), std::conj(8.0 * omega * omega));
          ScalarField b = scaled(core(zc, f, 2), 2.0);
          return added(a, b);
        };
        val = estimate_weighted_norm(grid, T, T_adj, {1, -sigma}, {0, sigma}, probes, power_iters,
                                     s_i);
        break;
      }
      case SlopeTarget::Id::BornComposite: {
        auto Rk = [&](const PotentialSet& pot, cplx om, const StateVector& s, int powers) {
          StateVector u = s;
          for (int i = 0; i < powers; ++i) {
            ResolventQuery q{om, solver_tol, 3000};
            u = kg_resolvent(pot, q, u, true).out;
          }
          return u;
        };
        auto Rk_adj = [&](const PotentialSet& pot, const StateVector& s, int powers) {
          StateVector u = s;
          for (int i = 0; i < powers; ++i) {
            ResolventQuery q{omega, solver_tol, 3000};
            u = kg_resolvent_adjoint(pot, q, u);
          }
          return u;
        };
        // M^{(k)} = k! sum_{a+b+c=k} R0^{a+1} V R0^{b+1} V R^{c+1}
        auto apply_Mk = [&](cplx om, const StateVector& s) {
          StateVector acc;
          bool first = true;
          const double kfac = target.k == 2 ? 2.0 : 1.0;
          for (int a = 0; a <= target.k; ++a)
            for (int b = 0; a + b <= target.k; ++b) {
              const int c = target.k - a - b;
              StateVector t = Rk(p, om, s, c + 1);
              t = apply_V_block(p, t);
              t = Rk(p0, om, t, b + 1);
              t = apply_V_block(p, t);
              t = Rk(p0, om, t, a + 1);
              if (first) {
                acc = scaled(t, kfac);
                first = false;
              } else {
                acc = added(acc, scaled(t, kfac));
              }
            }
          return acc;
        };
        StateOp T = [&](const StateVector& s) { return apply_Mk(omega, s); };
        // adjoint: reversed factor order at conj(omega); V block adjoint is
        // (psi,pi) -> (+i V pi, 0)
        auto V_adj = [&](const StateVector& s) {
          StateVector out;
          out.psi = multiply(p.V, s.pi);
          for (auto& z : out.psi.v) z *= cplx(0.0, 1.0);
          out.pi = ScalarField(s.pi.grid);
          return out;
        };
        StateOp T_adj = [&](const StateVector& s) {
          StateVector acc;
          bool first = true;
          const double kfac = target.k == 2 ? 2.0 : 1.0;
          for (int a = 0; a <= target.k; ++a)
            for (int b = 0; a + b <= target.k; ++b) {
              const int c = target.k - a - b;
              StateVector t = Rk_adj(p0, s, a + 1);
              t = V_adj(t);
              t = Rk_adj(p0, t, b + 1);
              t = V_adj(t);
              t = Rk_adj(p, t, c + 1);
              if (first) {
                acc = scaled(t, kfac);
                first = false;
              } else {
                acc = added(acc, scaled(t, kfac));
              }
            }
          return acc;
        };
        val = estimate_weighted_norm_state(grid, T, T_adj, sigma, -sigma, probes, power_iters,
                                           s_i);
        break;
      }
    }
    fit.abs_omega.push_back(std::abs(omega));
    fit.norm_estimate.push_back(std::max(val, 1e-300));
  }

  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < fit.abs_omega.size(); ++i) {
    lx.push_back(std::log(fit.abs_omega[i]));
    ly.push_back(std::log(fit.norm_estimate[i]));
  }
  LineFit lf = fit_line(lx, ly);
  fit.exponent = lf.slope;
  fit.amplitude = std::exp(lf.intercept);
  fit.r2 = lf.r2;
  fit.samples = static_cast<int>(fit.abs_omega.size());
  auto mm = std::minmax_element(fit.abs_omega.begin(), fit.abs_omega.end());
  fit.window_lo = *mm.first;
  fit.window_hi = *mm.second;
  if (strict_r2 && target.expects_decay() && fit.r2 < 0.9)
    throw ConvergenceFailure("asymptotics_slope: fit rejected, r2=" + std::to_string(fit.r2) +
                                 " slope=" + std::to_string(fit.exponent),
                             fit.r2);
  return fit;
}

// --- zero-resonance scanner ------------------------------------------------

namespace {

struct NewtonKernel {
  int n2 = 0;            // doubled points per axis
  cvec kernel_hat;       // unitary FFT of the kernel table
};

std::mutex g_kernel_mutex;
std::map<std::pair<int, long long>, NewtonKernel>& kernel_cache() {
  static std::map<std::pair<int, long long>, NewtonKernel> cache;
  return cache;
}

// Average of 1/(4 pi |y|) over the unit cube, by midpoint refinement.
double unit_cell_average() {
  static double cached = [] {
    const int nq = 48;
    double acc = 0.0;
    for (int i = 0; i < nq; ++i)
      for (int j = 0; j < nq; ++j)
        for (int k = 0; k < nq; ++k) {
          const double x = (i + 0.5) / nq - 0.5;
          const double y = (j + 0.5) / nq - 0.5;
          const double z = (k + 0.5) / nq - 0.5;
          acc += 1.0 / std::sqrt(x * x + y * y + z * z);
        }
    return acc / (nq * nq * nq) / (4.0 * M_PI);
  }();
  return cached;
}

const NewtonKernel& get_newton_kernel(const SpectralGrid& g) {
  const auto key = std::make_pair(g.n, static_cast<long long>(g.L * 1e9));
  std::lock_guard<std::mutex> lock(g_kernel_mutex);
  auto& cache = kernel_cache();
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  NewtonKernel ker;
  ker.n2 = 2 * g.n;
  const int n2 = ker.n2;
  ker.kernel_hat.assign(static_cast<std::size_t>(n2) * n2 * n2, cplx(0.0, 0.0));
  const double h = g.h;
  for (int ix = 0; ix < n2; ++ix) {
    const double dx = ((ix < g.n) ? ix : ix - n2) * h;
    for (int iy = 0; iy < n2; ++iy) {
      const double dy = ((iy < g.n) ? iy : iy - n2) * h;
      for (int iz = 0; iz < n2; ++iz) {
        const double dz = ((iz < g.n) ? iz : iz - n2) * h;
        const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
        const std::size_t id = (static_cast<std::size_t>(ix) * n2 + iy) * n2 + iz;
        ker.kernel_hat[id] = (r == 0.0) ? cplx(unit_cell_average() / h, 0.0)
                                        : cplx(1.0 / (4.0 * M_PI * r), 0.0);
      }
    }
  }
  fft::forward_raw(n2, ker.kernel_hat.data());
  return cache.emplace(key, std::move(ker)).first->second;
}

}  // namespace

ScalarField newton_potential_apply(const ScalarField& src) {
  check_position(src);
  const auto& g = *src.grid;
  const NewtonKernel& ker = get_newton_kernel(g);
  const int n2 = ker.n2;
  const std::size_t total2 = static_cast<std::size_t>(n2) * n2 * n2;
  cvec pad(total2, cplx(0.0, 0.0));
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz)
        pad[(static_cast<std::size_t>(ix) * n2 + iy) * n2 + iz] = src.v[g.index(ix, iy, iz)];
  fft::forward_raw(n2, pad.data());
  const double conv_scale = std::pow(static_cast<double>(n2), 1.5) * g.h * g.h * g.h;
  for (std::size_t i = 0; i < total2; ++i) pad[i] *= ker.kernel_hat[i] * conv_scale;
  fft::inverse_raw(n2, pad.data());
  ScalarField out(src.grid);
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz)
        out.v[g.index(ix, iy, iz)] = pad[(static_cast<std::size_t>(ix) * n2 + iy) * n2 + iz];
  return out;
}

double sigma_min_zero_mode(const PotentialSet& p, double sigma_star, int lanczos_dim,
                           std::uint64_t seed) {
  const auto& g = *p.grid;
  const std::size_t N = g.size();

  // tail-truncation guard: the |W|-mass carried by the outermost cell layer
  {
    double shell = 0.0, total = 0.0;
    const double edge = g.L - 1.5 * g.h;
    for (int ix = 0; ix < g.n; ++ix)
      for (int iy = 0; iy < g.n; ++iy)
        for (int iz = 0; iz < g.n; ++iz) {
          const std::size_t id = g.index(ix, iy, iz);
          double wmag = std::abs(p.V[id]) + std::abs(p.div_A[id]) + p.A_sq[id] +
                        std::abs(p.A[0][id]) + std::abs(p.A[1][id]) + std::abs(p.A[2][id]);
          total += wmag;
          if (std::abs(g.x[ix]) >= edge || std::abs(g.x[iy]) >= edge || std::abs(g.x[iz]) >= edge)
            shell += wmag;
        }
    if (total > 0.0 && shell / total > 1e-6)
      throw QuadratureFailure("zero-mode: potential mass outside the convolution-safe interior (" +
                              std::to_string(shell / total) + ")");
  }

  rvec weight(N), inv_weight(N);
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz) {
        const std::size_t id = g.index(ix, iy, iz);
        const double w = std::pow(1.0 + g.x_sq(ix, iy, iz), -0.5 * sigma_star);
        weight[id] = w;
        inv_weight[id] = 1.0 / w;
      }

  GridPtr grid = p.grid;
  const PotentialSet* pp = &p;
  auto T = [pp, grid](const cvec& in, cvec& out) {
    ScalarField f(grid);
    f.v = in;
    ScalarField wf = apply_W(*pp, f);
    ScalarField a0wf = newton_potential_apply(wf);
    out = in;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += a0wf.v[i];
  };
  auto T_star = [pp, grid](const cvec& in, cvec& out) {
    ScalarField f(grid);
    f.v = in;
    ScalarField a0f = newton_potential_apply(f);
    ScalarField wa0f = apply_W(*pp, a0f);
    out = in;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += wa0f.v[i];
  };
  // M = (D T D^{-1})^* (D T D^{-1}) with D = diag(<x>^{-sigma*})
  LinOp M = [&, T, T_star](const cvec& in, cvec& out) {
    cvec a(N);
    for (std::size_t i = 0; i < N; ++i) a[i] = in[i] * inv_weight[i];
    cvec b(N);
    T(a, b);
    for (std::size_t i = 0; i < N; ++i) b[i] *= weight[i] * weight[i];
    T_star(b, out);
    for (std::size_t i = 0; i < N; ++i) out[i] *= inv_weight[i];
  };

  KrylovSpec spec;
  spec.max_dim = lanczos_dim;
  auto pairs = lanczos_lowest(M, N, 1e300, 1, spec, seed);
  if (pairs.empty()) return 1.0;
  return std::sqrt(std::max(0.0, pairs.front().value));
}

ZeroModeScanResult zero_mode_scan(const GridPtr& grid, double m, const std::vector<double>& gs,
                                  double sigma_star, int refine_rounds) {
  if (gs.size() < 3) throw InvalidArgument("zero_mode_scan: need >= 3 couplings");
  ZeroModeScanResult res;
  auto eval = [&](double g) {
    PotentialParams params;
    params.g = g;
    params.m = m;
    PotentialSet p = make_potential(g == 0.0 ? "zero" : "scaled-well", params, grid);
    return sigma_min_zero_mode(p, sigma_star);
  };
  for (double g : gs) res.curve.push_back({g, eval(g)});

  // refine around the deepest dip by shrinking bracket bisection
  std::size_t imin = 0;
  for (std::size_t i = 1; i < res.curve.size(); ++i)
    if (res.curve[i].sigma_min < res.curve[imin].sigma_min) imin = i;
  double lo = res.curve[imin > 0 ? imin - 1 : imin].g;
  double hi = res.curve[imin + 1 < res.curve.size() ? imin + 1 : imin].g;
  double gbest = res.curve[imin].g;
  double sbest = res.curve[imin].sigma_min;
  for (int round = 0; round < refine_rounds; ++round) {
    const double g1 = 0.5 * (lo + gbest);
    const double g2 = 0.5 * (gbest + hi);
    const double s1 = eval(g1);
    const double s2 = eval(g2);
    if (s1 < sbest && s1 <= s2) {
      hi = gbest;
      gbest = g1;
      sbest = s1;
    } else if (s2 < sbest) {
      lo = gbest;
      gbest = g2;
      sbest = s2;
    } else {
      lo = g1;
      hi = g2;
    }
  }
  res.g_star = gbest;
  res.sigma_min_star = sbest;
  return res;
}

}  // namespace kg
