#include "kg/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <optional>

#include "kg/errors.hpp"
#include "kg/fft.hpp"

namespace kg {

double concentration_radius(const StateVector& s, double tail) {
  const auto& g = *s.psi.grid;
  // histogram of mass per max-coordinate radius shell (h-wide bins)
  const int bins = g.n / 2 + 1;
  std::vector<double> shell(bins, 0.0);
  double total = 0.0;
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz) {
        const std::size_t id = g.index(ix, iy, iz);
        const double mass = std::norm(s.psi.v[id]) + std::norm(s.pi.v[id]);
        const double r = std::max({std::abs(g.x[ix]), std::abs(g.x[iy]), std::abs(g.x[iz])});
        const int b = std::min(bins - 1, static_cast<int>(r / g.h));
        shell[b] += mass;
        total += mass;
      }
  if (total == 0.0) return 0.0;
  double acc = 0.0;
  for (int b = bins - 1; b >= 0; --b) {
    acc += shell[b];
    if (acc > tail * total) return std::min((b + 1) * g.h, g.L);
  }
  return 0.0;
}

void check_horizon(const SpectralGrid& grid, double r0, double t) {
  if (grid.L - r0 - t < 0.0)
    throw HorizonExceeded("horizon guard violated: L - r0 - t = " +
                          std::to_string(grid.L - r0 - t));
}

namespace {

// U0-style multiplier propagation for A = V = 0 (exact on the grid).
StateVector propagate_free_multiplier(const PotentialSet& p, double t, const StateVector& s) {
  StateVector out;
  out.psi = s.psi;
  out.pi = s.pi;
  ScalarField psi_hat = s.psi;
  ScalarField pi_hat = s.pi;
  fft::forward(psi_hat);
  fft::forward(pi_hat);
  const auto& g = *p.grid;
  const double m2 = p.m * p.m;
  for (int jx = 0; jx < g.n; ++jx)
    for (int jy = 0; jy < g.n; ++jy)
      for (int jz = 0; jz < g.n; ++jz) {
        const std::size_t id = g.index(jx, jy, jz);
        const double w = std::sqrt(g.k_sq(jx, jy, jz) + m2);
        const double c = std::cos(w * t);
        const double sn = std::sin(w * t);
        const cplx a = psi_hat.v[id], b = pi_hat.v[id];
        psi_hat.v[id] = c * a + sn / w * b;
        pi_hat.v[id] = -w * sn * a + c * b;
      }
  fft::inverse(psi_hat);
  fft::inverse(pi_hat);
  out.psi = std::move(psi_hat);
  out.pi = std::move(pi_hat);
  return out;
}

// One matrix-function step of the half-group formula on B^2 = op.
StateVector half_group_step(const LinOp& op, const GridPtr& grid, double t, const StateVector& s,
                            const KrylovSpec& spec) {
  std::vector<SpectralFn> fns_psi{spectral_fn::cos_sqrt(t), spectral_fn::sqrt_sin_sqrt(t)};
  std::vector<SpectralFn> fns_pi{spectral_fn::cos_sqrt(t), spectral_fn::sinc_sqrt(t)};
  auto from_psi = krylov_apply_multi(op, fns_psi, s.psi.v, spec);
  auto from_pi = krylov_apply_multi(op, fns_pi, s.pi.v, spec);
  StateVector out;
  out.psi = ScalarField(grid);
  out.pi = ScalarField(grid);
  for (std::size_t i = 0; i < out.psi.v.size(); ++i) {
    out.psi.v[i] = from_psi[0][i] + from_pi[1][i];
    out.pi.v[i] = -from_psi[1][i] + from_pi[0][i];
  }
  return out;
}

}  // namespace

StateVector propagate_U0(const PotentialSet& p, double t, const StateVector& s,
                         const KrylovSpec& spec) {
  check_same_grid(s.psi, s.pi);
  if (!p.zero_V) throw InvalidArgument("propagate_U0: requires V = 0");
  if (t == 0.0) return s;
  if (p.zero_A) return propagate_free_multiplier(p, t, s);
  return half_group_step(linop_H0_plus_m2(p), p.grid, t, s, spec);
}

double quadratic_energy(const PotentialSet& p, const StateVector& s) {
  // <(H + m^2) psi, psi> + |pi|^2, evaluated through the factored form
  ScalarField hpsi = apply_H_plus_m2(p, s.psi);
  const double a = inner(s.psi, hpsi).real();
  const double b = norm_l2(s.pi);
  return a + b * b;
}

double lambda_min_estimate(const PotentialSet& p) {
  SpectralCertCache* cache = p.cache.get();
  std::lock_guard<std::mutex> lock(cache->mutex);
  if (cache->lambda_min) return *cache->lambda_min;
  if (p.zero_A && p.zero_V) {
    cache->lambda_min = 0.0;
    return 0.0;
  }
  LinOp H = [&p](const cvec& in, cvec& out) {
    ScalarField f(p.grid);
    f.v = in;
    out = apply_H(p, f).v;
  };
  KrylovSpec spec;
  spec.max_dim = std::min<std::size_t>(140, p.grid->size());
  auto pairs = lanczos_lowest(H, p.grid->size(), -1e300, 1, spec, 4242);
  double lam = pairs.empty() ? 0.0 : std::min(0.0, pairs.front().value);
  cache->lambda_min = lam;
  return lam;
}

double lambda_max_estimate(const PotentialSet& p) {
  SpectralCertCache* cache = p.cache.get();
  std::lock_guard<std::mutex> lock(cache->mutex);
  if (cache->lambda_max) return *cache->lambda_max;
  const double lam = power_iteration_largest(linop_H_plus_m2(p), p.grid->size());
  cache->lambda_max = lam * 1.02;  // small safety headroom on the estimate
  return *cache->lambda_max;
}

StateVector propagate_U(const PotentialSet& p, double t, const StateVector& s,
                        const EvolutionPlan& plan) {
  check_same_grid(s.psi, s.pi);
  const double m2 = p.m * p.m;
  const double lam_min = lambda_min_estimate(p);
  if (lam_min <= -m2)
    throw SupercriticalPotential(
        "propagate_U: lambda_min(H) <= -m^2, first-order system not unitary", lam_min);
  if (plan.enforce_horizon) check_horizon(*p.grid, concentration_radius(s), t);
  if (t == 0.0) return s;

  if (plan.method == EvolveMethod::KrylovPropagator) {
    if (p.zero_A && p.zero_V) return propagate_free_multiplier(p, t, s);
    LinOp op = linop_H_plus_m2(p);
    StateVector cur = s;
    double done = 0.0;
    while (done < t) {
      const double step = std::min(plan.dt, t - done);
      cur = half_group_step(op, p.grid, step, cur, plan.krylov);
      done += step;
    }
    return cur;
  }

  // leapfrog with pi half-steps
  const double lam_max = lambda_max_estimate(p);
  const double dt_stable = 2.0 / std::sqrt(lam_max);
  if (plan.dt > dt_stable)
    throw InvalidArgument("leapfrog: dt=" + std::to_string(plan.dt) +
                          " exceeds the stability bound " + std::to_string(dt_stable));
  const long steps = std::lround(std::ceil(t / plan.dt - 1e-12));
  const double dt = t / static_cast<double>(steps);
  StateVector cur = s;
  ScalarField acc = apply_H_plus_m2(p, cur.psi);
  for (long st = 0; st < steps; ++st) {
    axpy(cplx(-0.5 * dt, 0.0), acc, cur.pi);
    axpy(cplx(dt, 0.0), cur.pi, cur.psi);
    acc = apply_H_plus_m2(p, cur.psi);
    axpy(cplx(-0.5 * dt, 0.0), acc, cur.pi);
  }
  return cur;
}

std::vector<double> DiscreteSpectrumData::omegas() const {
  std::vector<double> out;
  for (double lam : lambdas) out.push_back(std::sqrt(std::max(0.0, m * m + lam)));
  return out;
}

DiscreteSpectrumData discrete_spectrum(const PotentialSet& p, double residual_tol) {
  DiscreteSpectrumData data;
  data.m = p.m;
  const double m2 = p.m * p.m;
  const std::size_t N = p.grid->size();

  if (N <= 1728) {
    DenseEig eig = dense_eig_schrodinger(p, true);
    data.lambda_min = eig.values(0);
    if (data.lambda_min <= -m2)
      throw SupercriticalPotential("discrete_spectrum: lambda_min(H) = " +
                                       std::to_string(data.lambda_min) + " <= -m^2",
                                   data.lambda_min);
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
      const double lam = eig.values(i);
      if (lam >= 0.0) break;
      ScalarField phi(p.grid);
      for (std::size_t q = 0; q < N; ++q) phi.v[q] = eig.vectors(q, i);
      const double nrm = norm_l2(phi);
      for (auto& z : phi.v) z /= nrm;
      data.lambdas.push_back(lam);
      data.eigenfields.push_back(std::move(phi));
      data.residuals.push_back(0.0);
    }
    return data;
  }

  LinOp H = [&p](const cvec& in, cvec& out) {
    ScalarField f(p.grid);
    f.v = in;
    out = apply_H(p, f).v;
  };
  KrylovSpec spec;
  spec.max_dim = 180;
  auto pairs = lanczos_lowest(H, N, 0.0, 40, spec, 31337);
  data.lambda_min = pairs.empty() ? 0.0 : pairs.front().value;
  if (data.lambda_min <= -m2)
    throw SupercriticalPotential("discrete_spectrum: lambda_min(H) = " +
                                     std::to_string(data.lambda_min) + " <= -m^2",
                                 data.lambda_min);
  for (const auto& ep : pairs) {
    if (ep.value >= 0.0) continue;
    if (ep.residual > residual_tol)
      throw ConvergenceFailure("discrete_spectrum: eigenpair residual " +
                                   std::to_string(ep.residual) + " above tolerance",
                               ep.residual);
    ScalarField phi(p.grid);
    phi.v = ep.vector;
    const double nrm = norm_l2(phi);
    for (auto& z : phi.v) z /= nrm;
    data.lambdas.push_back(ep.value);
    data.eigenfields.push_back(std::move(phi));
    data.residuals.push_back(ep.residual);
  }
  return data;
}

StateVector project_Pc(const DiscreteSpectrumData& data, const StateVector& s) {
  StateVector out = s;
  for (const auto& phi : data.eigenfields) {
    const cplx c_psi = inner(phi, out.psi);
    const cplx c_pi = inner(phi, out.pi);
    axpy(-c_psi, phi, out.psi);
    axpy(-c_pi, phi, out.pi);
  }
  return out;
}

namespace {
double std_bump(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }
// smooth step: 0 for x <= 0, 1 for x >= 1
double smooth_step(double x) {
  const double a = std_bump(x);
  const double b = std_bump(1.0 - x);
  return a / (a + b);
}
}  // namespace

CutoffSpec chi_identity() {
  return {[](double) { return 1.0; }, "one"};
}

CutoffSpec chi_low_energy(double m, double delta1) {
  return {[m, delta1](double w) {
            const double a = std::abs(w);
            return 1.0 - smooth_step((a - (m + delta1)) / delta1);
          },
          "low-energy"};
}

CutoffSpec chi_complement(const CutoffSpec& base) {
  auto f = base.chi;
  return {[f](double w) { return 1.0 - f(w); }, "1-(" + base.name + ")"};
}

CutoffSpec chi_bump(double a, double b) {
  const double w = 0.25 * (b - a);
  return {[a, b, w](double x) {
            return smooth_step((x - a) / w) * smooth_step((b - x) / w);
          },
          "bump"};
}

StateVector chi_filter(const PotentialSet& p, const CutoffSpec& chi, const StateVector& s,
                       const KrylovSpec& spec) {
  check_same_grid(s.psi, s.pi);
  auto chi_f = chi.chi;
  SpectralFn even_part = [chi_f](double lam) {
    const double mu = std::sqrt(std::max(lam, 0.0));
    return 0.5 * (chi_f(mu) + chi_f(-mu));
  };
  SpectralFn odd_over_mu = [chi_f](double lam) {
    const double mu = std::sqrt(std::max(lam, 1e-300));
    return 0.5 * (chi_f(mu) - chi_f(-mu)) / mu;
  };

  if (p.zero_A && p.zero_V) {
    // operator diagonal in the Fourier basis: apply the 2x2 mode blocks exactly
    ScalarField psi_hat = s.psi, pi_hat = s.pi;
    fft::forward(psi_hat);
    fft::forward(pi_hat);
    const auto& g = *p.grid;
    const double m2 = p.m * p.m;
    for (int jx = 0; jx < g.n; ++jx)
      for (int jy = 0; jy < g.n; ++jy)
        for (int jz = 0; jz < g.n; ++jz) {
          const std::size_t id = g.index(jx, jy, jz);
          const double lam = g.k_sq(jx, jy, jz) + m2;
          const double mu = std::sqrt(lam);
          const double fe = even_part(lam);
          const double fo_mu = odd_over_mu(lam);
          const cplx a = psi_hat.v[id], b = pi_hat.v[id];
          psi_hat.v[id] = fe * a + cplx(0.0, 1.0) * fo_mu * b;
          pi_hat.v[id] = cplx(0.0, -1.0) * mu * mu * fo_mu * a + fe * b;
        }
    fft::inverse(psi_hat);
    fft::inverse(pi_hat);
    StateVector out;
    out.psi = std::move(psi_hat);
    out.pi = std::move(pi_hat);
    return out;
  }

  LinOp op = linop_H_plus_m2(p);
  auto psi_parts = krylov_apply_multi(op, {even_part, odd_over_mu}, s.psi.v, spec);
  auto pi_parts = krylov_apply_multi(op, {even_part, odd_over_mu}, s.pi.v, spec);

  StateVector even_term;
  even_term.psi = ScalarField(p.grid);
  even_term.pi = ScalarField(p.grid);
  even_term.psi.v = std::move(psi_parts[0]);
  even_term.pi.v = std::move(pi_parts[0]);

  StateVector odd_arg;
  odd_arg.psi = ScalarField(p.grid);
  odd_arg.pi = ScalarField(p.grid);
  odd_arg.psi.v = std::move(psi_parts[1]);
  odd_arg.pi.v = std::move(pi_parts[1]);
  StateVector odd_term = apply_K(p, odd_arg);

  return added(even_term, odd_term);
}

SpectralRepResult spectral_rep_check(const PotentialSet& p, double t, const StateVector& s,
                                     const CutoffSpec& chi, const ContourQuadratureSpec& quad,
                                     const EvolutionPlan& plan) {
  SpectralRepResult res;

  // --- route 1: propagate the filtered, projected state
  DiscreteSpectrumData spec_data = discrete_spectrum(p);
  StateVector projected = project_Pc(spec_data, s);
  StateVector filtered = chi_filter(p, chi, projected, plan.krylov);
  res.propagated_state = propagate_U(p, t, filtered, plan);

  // --- route 2: boundary-value jump quadrature over the cutoff's support
  // support detection on |w| up to the grid's spectral reach
  const double m = p.m;
  const double mu_max =
      std::sqrt(lambda_max_estimate(p)) + 1.0;
  auto support_interval = [&](double sgn) -> std::pair<double, double> {
    const int scan = 4000;
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i <= scan; ++i) {
      const double w = sgn * (m + (mu_max - m) * i / scan);
      if (std::abs(chi.chi(w)) > 1e-14) {
        lo = std::min(lo, w);
        hi = std::max(hi, w);
      }
    }
    return {lo, hi};
  };

  // panel breakpoints packed around the discrete K-eigenvalue spikes
  std::vector<double> eigs;
  if (quad.adaptive_panels && p.grid->size() <= 1728) {
    DenseEig eig = dense_eig_schrodinger(p, true);
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
      const double lam = eig.values(i) + m * m;
      if (lam > 0.0) {
        eigs.push_back(std::sqrt(lam));
        eigs.push_back(-std::sqrt(lam));
      }
    }
  }

  auto build_panels = [&](double lo, double hi) {
    std::vector<double> brk{lo, hi};
    for (double e : eigs)
      if (e > lo - 0.5 && e < hi + 0.5) {
        // geometric ladder out from the spectral point until panel widths
        // reach the macroscopic scale; keeps every panel resolvable by the
        // fixed-order rule despite the near-pole integrand
        for (double c = 1.0; c * quad.eps < (hi - lo) + 1.0; c *= 3.0) {
          const double l = e - c * quad.eps, r = e + c * quad.eps;
          if (l > lo && l < hi) brk.push_back(l);
          if (r > lo && r < hi) brk.push_back(r);
        }
      }
    std::sort(brk.begin(), brk.end());
    brk.erase(std::unique(brk.begin(), brk.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-13; }),
              brk.end());
    return brk;
  };

  std::vector<std::pair<double, double>> intervals;
  for (double sgn : {1.0, -1.0}) {
    auto [lo, hi] = support_interval(sgn);
    if (lo > hi) continue;
    intervals.emplace_back(std::min(lo, hi), std::max(lo, hi));
  }
  if (intervals.empty()) throw InvalidArgument("spectral_rep_check: cutoff support is empty");

  std::vector<std::pair<double, double>> segments;
  if (!eigs.empty()) {
    for (const auto& [lo, hi] : intervals) {
      auto brk = build_panels(lo, hi);
      for (std::size_t i = 0; i + 1 < brk.size(); ++i) segments.emplace_back(brk[i], brk[i + 1]);
    }
  } else {
    // smoothing-regime quadrature: equal composite panels, 8-node rule each
    const int panels_total = std::max<int>(intervals.size(), quad.nodes / 8);
    for (const auto& [lo, hi] : intervals) {
      const int np = std::max(1, static_cast<int>(panels_total / intervals.size()));
      for (int i = 0; i < np; ++i)
        segments.emplace_back(lo + (hi - lo) * i / np, lo + (hi - lo) * (i + 1) / np);
    }
  }

  const int per_panel =
      eigs.empty() ? 8 : std::max(4, static_cast<int>(quad.nodes / segments.size()));
  // Gauss-Legendre nodes/weights on [-1,1] via Newton on Legendre polynomials
  auto gauss_legendre = [](int nq) {
    std::vector<double> xs(nq), ws(nq);
    for (int i = 0; i < nq; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (nq + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= nq; ++k) {
          const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        const double dp = nq * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= nq; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = nq * (x * p1 - p0) / (x * x - 1.0);
      xs[i] = x;
      ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return std::make_pair(xs, ws);
  };
  auto [gx, gw] = gauss_legendre(per_panel);

  StateVector acc;
  acc.psi = ScalarField(p.grid);
  acc.pi = ScalarField(p.grid);
  for (const auto& [a, b] : segments) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < per_panel; ++i) {
      const double w = mid + half * gx[i];
      const double weight = half * gw[i];
      const double chiw = chi.chi(w);
      if (std::abs(chiw) < 1e-15) continue;
      ResolventQuery q{cplx(w, quad.eps), 1e-9, 2000};
      StateVector up = kg_resolvent(p, q, s, true).out;
      q.omega = cplx(w, -quad.eps);
      StateVector um = kg_resolvent(p, q, s, true).out;
      const StateVector jump = subtracted(up, um);
      const cplx phase = std::exp(cplx(0.0, -w * t)) * chiw * weight / cplx(0.0, 2.0 * M_PI);
      axpy(phase, jump.psi, acc.psi);
      axpy(phase, jump.pi, acc.pi);
    }
  }
  // The finite-eps jump smears each spectral point by a Lorentzian of width
  // eps; for the time phase this smearing contributes exactly e^{-eps |t|},
  // which is corrected here. The remaining bias is O(eps^2) in the cutoff.
  const double bias = std::exp(quad.eps * std::abs(t));
  acc.psi = scaled(acc.psi, bias);
  acc.pi = scaled(acc.pi, bias);
  res.quadrature_state = acc;

  const double den = energy_norm(res.propagated_state, -quad.sigma);
  res.rel_err =
      den > 0.0 ? energy_norm(subtracted(acc, res.propagated_state), -quad.sigma) / den : 0.0;
  return res;
}

}  // namespace kg
