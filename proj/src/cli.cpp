#include "kg/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "kg/analysis.hpp"
#include "kg/config.hpp"
#include "kg/errors.hpp"
#include "kg/mourre.hpp"

namespace kg {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunContext {
  ExperimentConfig cfg;
  fs::path out_dir;
  std::uint64_t seed = 42;
  bool force_oracle = false;
  json summary;
  bool all_passed = true;

  void add_check(const std::string& name, double value, double tolerance, bool passed,
                 const std::string& relation = "<=") {
    summary["checks"].push_back({{"name", name},
                                 {"value", value},
                                 {"tolerance", tolerance},
                                 {"relation", relation},
                                 {"passed", passed}});
    all_passed = all_passed && passed;
  }

  void write_artifacts(const std::string& subcommand) {
    fs::create_directories(out_dir);
    summary["schema_version"] = 1;
    summary["subcommand"] = subcommand;
    summary["config_hash"] = cfg.hash_hex();
    summary["seed"] = seed;
    summary["pass"] = all_passed;
    std::ofstream(out_dir / "resolved.cfg") << cfg.canonical();
    std::ofstream(out_dir / "summary.json") << summary.dump(2) << "\n";
  }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  out << header << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

GridPtr grid_from_config(const ExperimentConfig& cfg) {
  const long n = cfg.get_int("grid", "n");
  const double L = cfg.get_double("grid", "L");
  if (n < 4 || n % 2 != 0)
    throw InvalidArgument("config: grid.n must be even and >= 4, got " + std::to_string(n));
  if (!(L > 0.0)) throw InvalidArgument("config: grid.L must be > 0");
  return make_grid(static_cast<int>(n), L);
}

PotentialSet potential_from_config(const ExperimentConfig& cfg, const GridPtr& grid) {
  PotentialParams params;
  params.amplitude = {cfg.get_double_or("potential", "ax", 0.0),
                      cfg.get_double_or("potential", "ay", 0.0),
                      cfg.get_double_or("potential", "az", 0.0)};
  params.v0 = cfg.get_double_or("potential", "v0", 0.0);
  params.width = cfg.get_double_or("potential", "width", 1.0);
  params.center = {cfg.get_double_or("potential", "cx", 0.0),
                   cfg.get_double_or("potential", "cy", 0.0),
                   cfg.get_double_or("potential", "cz", 0.0)};
  params.g = cfg.get_double_or("potential", "g", 0.0);
  params.m = cfg.get_double_or("potential", "m", 1.0);
  params.beta = cfg.get_double_or("potential", "beta", 3.5);
  return make_potential(cfg.get_string_or("potential", "kind", "zero"), params, grid);
}

StateVector initial_data_from_config(const ExperimentConfig& cfg, const GridPtr& grid,
                                     std::uint64_t seed) {
  const std::string kind = cfg.get_string_or("data", "kind", "gaussian");
  if (kind == "gaussian") {
    const double w = cfg.get_double_or("data", "width", 3.0);
    StateVector s;
    s.psi = sample_field(grid, [w](double x, double y, double z) {
      return std::exp(-(x * x + y * y + z * z) / (2.0 * w * w));
    });
    s.pi = ScalarField(grid);
    return s;
  }
  if (kind == "random") return random_state(grid, seed);
  throw InvalidArgument("config: data.kind must be gaussian or random, got '" + kind + "'");
}

EvolutionPlan plan_from_config(const ExperimentConfig& cfg) {
  EvolutionPlan plan;
  const std::string method = cfg.get_string_or("evolve", "method", "krylov");
  if (method == "krylov")
    plan.method = EvolveMethod::KrylovPropagator;
  else if (method == "leapfrog")
    plan.method = EvolveMethod::Leapfrog;
  else
    throw InvalidArgument("config: evolve.method must be krylov or leapfrog");
  plan.dt = cfg.get_double_or("evolve", "dt", 1.0);
  plan.t_max = cfg.get_double_or("evolve", "t_max", 10.0);
  plan.krylov.tol = cfg.get_double_or("evolve", "krylov_tol", 1e-10);
  plan.krylov.max_dim = static_cast<int>(cfg.get_int_or("evolve", "krylov_max_dim", 128));
  plan.enforce_horizon = cfg.get_bool_or("evolve", "enforce_horizon", true);
  return plan;
}

// ---- subcommands ----------------------------------------------------------

int run_check_potential(RunContext& ctx) {
  GridPtr grid = grid_from_config(ctx.cfg);
  PotentialSet p = potential_from_config(ctx.cfg, grid);
  const double beta = ctx.cfg.get_double_or("potential", "beta", 3.5);
  AdmissibilityReport rep = check_admissible(p, beta);
  ctx.summary["C_fit"] = rep.C_fit;
  ctx.summary["argmax"] = {rep.argmax_x[0], rep.argmax_x[1], rep.argmax_x[2]};
  ctx.summary["boundary_flag"] = rep.boundary_flag;
  const bool allow_boundary = ctx.cfg.get_bool_or("potential", "allow_boundary", false);
  ctx.add_check("admissibility.boundary_resolved", rep.boundary_flag ? 1.0 : 0.0, 0.0,
                allow_boundary || !rep.boundary_flag);
  write_csv(ctx.out_dir / "admissibility.csv", "C_fit,x,y,z,boundary_flag",
            {{fmt(rep.C_fit), fmt(rep.argmax_x[0]), fmt(rep.argmax_x[1]), fmt(rep.argmax_x[2]),
              rep.boundary_flag ? "1" : "0"}});
  return 0;
}

void write_series_csv(const RunContext& ctx, const std::vector<DecaySeries>& branches) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& series : branches)
    for (std::size_t i = 0; i < series.times.size(); ++i)
      rows.push_back({fmt(series.times[i]), fmt(series.norms[i]), fmt(series.sigma),
                      series.branch, ctx.cfg.hash_hex()});
  write_csv(ctx.out_dir / "series.csv", "t,norm,sigma,branch,config_hash", rows);
}

std::vector<DecaySeries> run_evolution(RunContext& ctx) {
  GridPtr grid = grid_from_config(ctx.cfg);
  PotentialSet p = potential_from_config(ctx.cfg, grid);
  StateVector s0 = initial_data_from_config(ctx.cfg, grid, ctx.seed);
  EvolutionPlan plan = plan_from_config(ctx.cfg);
  DecayExperimentSpec spec;
  spec.sigma = ctx.cfg.get_double_or("evolve", "sigma", 3.0);
  spec.t_min = ctx.cfg.get_double_or("evolve", "t_min", 1.0);
  spec.samples_per_decade =
      static_cast<int>(ctx.cfg.get_int_or("evolve", "samples_per_decade", 16));
  const std::string split = ctx.cfg.get_string_or("evolve", "split", "none");
  if (split == "none")
    spec.split = DecaySplit::None;
  else if (split == "low-high")
    spec.split = DecaySplit::LowHigh;
  else
    throw InvalidArgument("config: evolve.split must be none or low-high");
  spec.chi_delta1 = ctx.cfg.get_double_or("evolve", "chi_delta1", -1.0);
  auto branches = run_decay_experiment(p, s0, spec, plan);
  write_series_csv(ctx, branches);
  return branches;
}

int run_evolve(RunContext& ctx) {
  auto branches = run_evolution(ctx);
  ctx.add_check("evolve.branches", static_cast<double>(branches.size()), 1.0, !branches.empty(),
                ">=");
  return 0;
}

int run_decay_fit(RunContext& ctx) {
  auto branches = run_evolution(ctx);
  const double lo = ctx.cfg.get_double_or("fit", "window_lo", 10.0);
  const double hi =
      ctx.cfg.get_double_or("fit", "window_hi", 0.8 * ctx.cfg.get_double_or("evolve", "t_max", 10.0));
  const double emin = ctx.cfg.get_double_or("fit", "min_exponent", -1.75);
  const double emax = ctx.cfg.get_double_or("fit", "max_exponent", -1.25);
  const double r2min = ctx.cfg.get_double_or("fit", "min_r2", 0.98);
  for (const auto& series : branches) {
    DecayFit fit = fit_decay(series, lo, hi);
    ctx.summary["fits"].push_back({{"branch", series.branch},
                                   {"exponent", fit.exponent},
                                   {"amplitude", fit.amplitude},
                                   {"r2", fit.r2},
                                   {"flagged", fit.flagged}});
    if (series.branch == "full" || series.branch == "low") {
      ctx.add_check("decay." + series.branch + ".exponent_min", fit.exponent, emin,
                    fit.exponent >= emin, ">=");
      ctx.add_check("decay." + series.branch + ".exponent_max", fit.exponent, emax,
                    fit.exponent <= emax);
      ctx.add_check("decay." + series.branch + ".r2", fit.r2, r2min, fit.r2 >= r2min, ">=");
    }
  }
  return 0;
}

int run_resolvent_scan(RunContext& ctx) {
  GridPtr grid = grid_from_config(ctx.cfg);
  PotentialSet p = potential_from_config(ctx.cfg, grid);
  SlopeTarget target;
  const std::string tname = ctx.cfg.get_string_or("resolvent", "target", "high-energy");
  if (tname == "high-energy")
    target.id = SlopeTarget::Id::HighEnergy;
  else if (tname == "low-energy-derivative")
    target.id = SlopeTarget::Id::LowEnergyDerivative;
  else if (tname == "sandwiched-potential")
    target.id = SlopeTarget::Id::SandwichedPotential;
  else if (tname == "born-composite")
    target.id = SlopeTarget::Id::BornComposite;
  else if (tname == "magnetic-high-energy")
    target.id = SlopeTarget::Id::MagneticHighEnergy;
  else if (tname == "magnetic-full")
    target.id = SlopeTarget::Id::MagneticFullHighEnergy;
  else
    throw InvalidArgument("config: resolvent.target unknown: '" + tname + "'");
  target.k = static_cast<int>(ctx.cfg.get_int_or("resolvent", "k", 0));
  target.l = static_cast<int>(ctx.cfg.get_int_or("resolvent", "l", 0));
  target.s = static_cast<int>(ctx.cfg.get_int_or("resolvent", "s", 0));

  const double lo = ctx.cfg.get_double_or("resolvent", "omega_lo", 10.0);
  const double hi = ctx.cfg.get_double_or("resolvent", "omega_hi", 200.0);
  const int count = static_cast<int>(ctx.cfg.get_int_or("resolvent", "omega_count", 12));
  const std::string ray = ctx.cfg.get_string_or("resolvent", "ray", "imag-shifted");
  std::vector<cplx> omegas;
  if (ray == "negative-real")
    omegas = ray_negative_real(lo, hi, count);
  else if (ray == "imag-shifted")
    omegas = ray_imag_shifted(lo, hi, count, ctx.cfg.get_double_or("resolvent", "im", 1.0));
  else if (ray == "imaginary-axis")
    omegas = ray_imaginary_axis(lo, hi, count);
  else
    throw InvalidArgument("config: resolvent.ray unknown: '" + ray + "'");

  const double sigma = ctx.cfg.get_double_or("resolvent", "sigma", 1.0);
  SlopeFit fit = asymptotics_slope(p, target, omegas, sigma,
                                   static_cast<int>(ctx.cfg.get_int_or("resolvent", "probes", 8)),
                                   4, ctx.cfg.get_double_or("resolvent", "tol", 1e-8), ctx.seed);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < fit.abs_omega.size(); ++i) {
    const double pred = fit.amplitude * std::pow(fit.abs_omega[i], fit.exponent);
    rows.push_back({fmt(omegas[i].real()), fmt(omegas[i].imag()), fmt(fit.abs_omega[i]),
                    fmt(fit.norm_estimate[i]),
                    fmt(std::log(fit.norm_estimate[i]) - std::log(pred))});
  }
  write_csv(ctx.out_dir / "scan.csv", "omega_re,omega_im,abs_omega,norm_estimate,log_residual",
            rows);

  ctx.summary["slope"] = fit.exponent;
  ctx.summary["expected_slope"] = target.expected_exponent();
  ctx.summary["r2"] = fit.r2;
  const double slope_tol = ctx.cfg.get_double_or("resolvent", "slope_tol", 0.15);
  ctx.add_check("slope.error", std::abs(fit.exponent - target.expected_exponent()), slope_tol,
                std::abs(fit.exponent - target.expected_exponent()) <= slope_tol);
  if (target.expects_decay())
    ctx.add_check("slope.r2", fit.r2, 0.9, fit.r2 >= 0.9, ">=");
  return 0;
}

int run_lap(RunContext& ctx) {
  GridPtr grid = grid_from_config(ctx.cfg);
  PotentialSet p = potential_from_config(ctx.cfg, grid);
  LapSchedule sched;
  sched.eps0 = ctx.cfg.get_double_or("lap", "eps0", 0.1);
  sched.ratio = ctx.cfg.get_double_or("lap", "ratio", 0.5);
  sched.count = static_cast<int>(ctx.cfg.get_int_or("lap", "count", 6));
  const double omega = ctx.cfg.get_double_or("lap", "omega", 4.0);
  const double sigma = ctx.cfg.get_double_or("lap", "sigma", 1.0);
  StateVector probe = random_state(grid, ctx.seed);
  LapResult res = lap_limit(p, omega, +1, probe.psi, sched, sigma,
                            ctx.cfg.get_double_or("lap", "tol", 1e-10));

  std::vector<std::vector<std::string>> rows;
  for (std::size_t j = 0; j < res.d.size(); ++j)
    rows.push_back({fmt(sched.eps0 * std::pow(sched.ratio, j)), fmt(res.d[j]),
                    j < res.ratios.size() ? fmt(res.ratios[j]) : "nan"});
  write_csv(ctx.out_dir / "lap.csv", "eps,d,ratio", rows);

  int streak = 0, best_streak = 0;
  for (double r : res.ratios) {
    streak = (r <= ctx.cfg.get_double_or("lap", "ratio_max", 0.9)) ? streak + 1 : 0;
    best_streak = std::max(best_streak, streak);
  }
  ctx.summary["ratios"] = res.ratios;
  ctx.summary["estimated_order"] = res.estimated_order;
  ctx.summary["failure_flag"] = res.failure_flag;
  const bool expect_failure = ctx.cfg.get_bool_or("lap", "expect_failure", false);
  if (expect_failure) {
    ctx.add_check("lap.failure_flag_fired", res.failure_flag ? 1.0 : 0.0, 1.0, res.failure_flag,
                  "==");
  } else {
    ctx.add_check("lap.consecutive_decreasing", best_streak,
                  static_cast<double>(ctx.cfg.get_int_or("lap", "min_streak", 4)),
                  best_streak >= ctx.cfg.get_int_or("lap", "min_streak", 4), ">=");
    ctx.add_check("lap.failure_flag_clear", res.failure_flag ? 1.0 : 0.0, 0.0, !res.failure_flag,
                  "==");
  }
  return 0;
}

int run_born_check(RunContext& ctx) {
  GridPtr grid = grid_from_config(ctx.cfg);
  PotentialSet p = potential_from_config(ctx.cfg, grid);
  const double tol = ctx.cfg.get_double_or("born", "tol", 1e-10);
  const double sigma = ctx.cfg.get_double_or("born", "sigma", 1.0);
  std::vector<cplx> omegas = ctx.cfg.get_complex_list("born", "omegas");
  StateVector F = random_state(grid, ctx.seed);
  ScalarField f = random_band_limited(grid, ctx.seed + 5);

  std::vector<std::vector<std::string>> rows;
  for (const cplx& om : omegas) {
    ResolventQuery q{om, tol, 3000};
    BornSeriesReport series = born_series_residual(p, q, F, sigma);
    BornSplittingReport split = born_splitting_check(p, q, f);
    rows.push_back({fmt(om.real()), fmt(om.imag()), fmt(series.residual_second_order),
                    fmt(series.residual_one_step), fmt(split.rel_difference),
                    std::to_string(split.inner_iterations)});
    const std::string tag = "omega(" + fmt(om.real()) + "," + fmt(om.imag()) + ")";
    ctx.add_check("born.series." + tag, series.residual_second_order, 10.0 * tol,
                  series.residual_second_order <= 10.0 * tol);
    ctx.add_check("born.one_step." + tag, series.residual_one_step, 10.0 * tol,
                  series.residual_one_step <= 10.0 * tol);
    ctx.add_check("born.splitting." + tag, split.rel_difference, 10.0 * tol,
                  split.rel_difference <= 10.0 * tol);
  }
  write_csv(ctx.out_dir / "born.csv",
            "omega_re,omega_im,series_residual,one_step_residual,splitting_diff,inner_iters",
            rows);
  return 0;
}

int run_rkg_check(RunContext& ctx) {
  GridPtr grid = grid_from_config(ctx.cfg);
  PotentialSet p = potential_from_config(ctx.cfg, grid);
  const double tol = ctx.cfg.get_double_or("rkg", "tol", 1e-10);
  std::vector<cplx> omegas = ctx.cfg.get_complex_list("rkg", "omegas");
  StateVector F = random_state(grid, ctx.seed);

  std::vector<std::vector<std::string>> rows;
  for (const cplx& om : omegas) {
    ResolventQuery q{om, tol, 3000};
    KgResolventResult res = kg_resolvent(p, q, F);
    // defining-equation residual
    StateVector kr = apply_K(p, res.out);
    StateVector defect = subtracted(subtracted(kr, scaled(res.out, om)), F);
    const double def_res = norm_l2(defect) / norm_l2(F);
    double oracle_gap = 0.0;
    if (ctx.force_oracle && grid->size() <= 1728) {
      DenseEig eig = dense_eig_schrodinger(p, true);
      StateVector dense = dense_k_apply(
          eig, p.m, [om](cplx z) { return 1.0 / (z - om); }, F);
      oracle_gap = norm_l2(subtracted(dense, res.out)) / norm_l2(dense);
      ctx.add_check("rkg.oracle(" + fmt(om.real()) + "," + fmt(om.imag()) + ")", oracle_gap, 1e-8,
                    oracle_gap <= 1e-8);
    }
    rows.push_back({fmt(om.real()), fmt(om.imag()), fmt(res.cross_discrepancy), fmt(def_res),
                    fmt(oracle_gap)});
    const std::string tag = "(" + fmt(om.real()) + "," + fmt(om.imag()) + ")";
    ctx.add_check("rkg.cross" + tag, res.cross_discrepancy, 10.0 * tol,
                  res.cross_discrepancy <= 10.0 * tol);
    ctx.add_check("rkg.defining" + tag, def_res, 10.0 * tol, def_res <= 10.0 * tol);
  }
  write_csv(ctx.out_dir / "rkg.csv",
            "omega_re,omega_im,cross_discrepancy,defining_residual,oracle_gap", rows);
  return 0;
}

int run_mourre_check(RunContext& ctx) {
  GridPtr grid = grid_from_config(ctx.cfg);
  PotentialSet p = potential_from_config(ctx.cfg, grid);
  Calibration cal = calibrate_P(grid, p.m);
  ctx.summary["calibration"] = cal.c;
  ctx.summary["calibration_residual"] = cal.residual;
  ctx.add_check("mourre.calibration_residual", cal.residual, 1e-6, cal.residual <= 1e-6);

  // probe concentrated away from the boundary
  const double w = grid->L / 5.0;
  ScalarField f = sample_field(grid, [w](double x, double y, double z) {
    return std::exp(-(x * x + y * y + z * z) / (2.0 * w * w));
  });

  PotentialSet p_free = without_V(p);
  PotentialSet* base = &p_free;
  if (p.zero_A) {
    CommutatorReport a0 = commutator_first_order(*base, f, cal);
    ctx.add_check("mourre.remainder_at_zero_A", a0.residual,
                  ctx.cfg.get_double_or("mourre", "a1_tol", 1e-8),
                  a0.residual <= ctx.cfg.get_double_or("mourre", "a1_tol", 1e-8));
  } else {
    CommutatorReport a1 = commutator_first_order(*base, f, cal);
    ctx.summary["first_order_residual"] = a1.residual;
    ctx.summary["printed_residual_a"] = a1.printed_residual_a;
    ctx.summary["printed_residual_b"] = a1.printed_residual_b;
    ctx.summary["structure_residual"] = a1.structure_residual;
  }

  std::vector<std::vector<std::string>> rows;
  if (grid->size() <= 512) {
    const double sqrt_res = kato_sqrt_residual(p, f);
    ctx.add_check("mourre.sqrt_formula", sqrt_res,
                  ctx.cfg.get_double_or("mourre", "sqrt_tol", 1e-5),
                  sqrt_res <= ctx.cfg.get_double_or("mourre", "sqrt_tol", 1e-5));
    CommutatorReport k1 = commutator_dilation(p, f, cal);
    ctx.add_check("mourre.two_path_J", k1.residual,
                  ctx.cfg.get_double_or("mourre", "k1_tol", 1e-4),
                  k1.residual <= ctx.cfg.get_double_or("mourre", "k1_tol", 1e-4));
    rows.push_back({"sqrt_formula", fmt(sqrt_res)});
    rows.push_back({"two_path_J", fmt(k1.residual)});
  }
  if (grid->size() <= 1000 && ctx.cfg.has("mourre", "lambda")) {
    MourreWindow window;
    window.full = ctx.cfg.get_string_or("mourre", "window", "local") == "full";
    window.lambda = ctx.cfg.get_double_or("mourre", "lambda", 1.5);
    window.mu = ctx.cfg.get_double_or("mourre", "mu", 0.1);
    window.nu = ctx.cfg.get_double_or("mourre", "nu", 0.5);
    const double delta = ctx.cfg.get_double_or("mourre", "delta", 0.1);
    CommutatorReport mb = mourre_bound(p, window, delta, cal);
    ctx.summary["mourre_min_eig"] = mb.min_eig;
    ctx.summary["mourre_rhs"] = mb.rhs;
    ctx.add_check("mourre.window_bound", mb.min_eig, mb.rhs, mb.passed, ">=");
    rows.push_back({"window_min_eig", fmt(mb.min_eig)});
    rows.push_back({"window_rhs", fmt(mb.rhs)});
  }
  write_csv(ctx.out_dir / "mourre.csv", "check,value", rows);
  return 0;
}

int run_zero_mode_scan(RunContext& ctx) {
  GridPtr grid = grid_from_config(ctx.cfg);
  const double m = ctx.cfg.get_double_or("potential", "m", 1.0);
  const double g_lo = ctx.cfg.get_double_or("zero-mode", "g_lo", 0.5);
  const double g_hi = ctx.cfg.get_double_or("zero-mode", "g_hi", 12.0);
  const int count = static_cast<int>(ctx.cfg.get_int_or("zero-mode", "g_count", 24));
  const double sigma_star = ctx.cfg.get_double_or("zero-mode", "sigma_star", 0.51);
  std::vector<double> gs;
  for (int i = 0; i < count; ++i) gs.push_back(g_lo + (g_hi - g_lo) * i / (count - 1));
  ZeroModeScanResult res = zero_mode_scan(grid, m, gs, sigma_star);

  std::vector<std::vector<std::string>> rows;
  for (const auto& pt : res.curve) rows.push_back({fmt(pt.g), fmt(pt.sigma_min)});
  write_csv(ctx.out_dir / "zeromode.csv", "g,sigma_min", rows);
  ctx.summary["g_star"] = res.g_star;
  ctx.summary["sigma_min_star"] = res.sigma_min_star;

  const double dip = ctx.cfg.get_double_or("zero-mode", "dip_threshold", 0.05);
  ctx.add_check("zeromode.dip", res.sigma_min_star, dip, res.sigma_min_star <= dip);
  ctx.add_check("zeromode.g_star_min", res.g_star, g_lo, res.g_star > g_lo, ">");
  ctx.add_check("zeromode.g_star_max", res.g_star, g_hi, res.g_star < g_hi, "<");
  return 0;
}

int run_spectral_rep_check(RunContext& ctx) {
  GridPtr grid = grid_from_config(ctx.cfg);
  PotentialSet p = potential_from_config(ctx.cfg, grid);
  ContourQuadratureSpec quad;
  quad.nodes = static_cast<int>(ctx.cfg.get_int_or("spectral-rep", "nodes", 128));
  quad.eps = ctx.cfg.get_double_or("spectral-rep", "eps", 1e-3);
  quad.sigma = ctx.cfg.get_double_or("spectral-rep", "sigma", 1.0);
  const double t = ctx.cfg.get_double_or("spectral-rep", "t", 2.0);
  const double chi_lo = ctx.cfg.get_double_or("spectral-rep", "chi_lo", 1.2 * p.m);
  const double chi_hi = ctx.cfg.get_double_or("spectral-rep", "chi_hi", 2.8 * p.m);
  CutoffSpec chi = chi_bump(chi_lo, chi_hi);
  StateVector s = random_state(grid, ctx.seed);
  EvolutionPlan plan = plan_from_config(ctx.cfg);
  plan.enforce_horizon = false;
  SpectralRepResult res = spectral_rep_check(p, t, s, chi, quad, plan);
  ctx.summary["rel_err"] = res.rel_err;
  const double tol = ctx.cfg.get_double_or("spectral-rep", "tol", 5e-2);
  ctx.add_check("spectral_rep.rel_err", res.rel_err, tol, res.rel_err <= tol);
  write_csv(ctx.out_dir / "specrep.csv", "nodes,eps,rel_err",
            {{std::to_string(quad.nodes), fmt(quad.eps), fmt(res.rel_err)}});
  return 0;
}

int run_oracle_dump(RunContext& ctx) {
  GridPtr grid = grid_from_config(ctx.cfg);
  if (grid->size() > 1728)
    throw InvalidArgument("oracle-dump: dense matrices restricted to n <= 12");
  PotentialSet p = potential_from_config(ctx.cfg, grid);
  const std::string kinds = ctx.cfg.get_string_or("oracle", "kinds", "H0,H,K");
  std::istringstream in(kinds);
  std::string item;
  while (std::getline(in, item, ',')) {
    OpKind kind;
    if (item == "H0")
      kind = OpKind::H0;
    else if (item == "H")
      kind = OpKind::H;
    else if (item == "B")
      kind = OpKind::B;
    else if (item == "B_V")
      kind = OpKind::B_V;
    else if (item == "K")
      kind = OpKind::K;
    else
      throw InvalidArgument("oracle-dump: unknown kind '" + item + "'");
    Eigen::MatrixXcd M = dense_operator(p, kind);
    std::ofstream out(ctx.out_dir / (item + ".mat"));
    out << "# " << M.rows() << " " << M.cols() << "\n";
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      for (Eigen::Index c = 0; c < M.cols(); ++c)
        out << (c ? " " : "") << fmt(M(r, c).real()) << " " << fmt(M(r, c).imag());
      out << "\n";
    }
    ctx.summary["dumped"].push_back(item);
  }
  ctx.add_check("oracle.dumped", 1.0, 1.0, true, "==");
  return 0;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
  CLI::App app{"pseudospectral Klein-Gordon toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::vector<std::string> overrides;
  std::uint64_t seed = 42;
  bool force_oracle = false;
  app.add_option("--config", config_path, "experiment config file");
  app.add_option("--set", overrides, "override: section.key=value (repeatable)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "deterministic seed");
  app.add_flag("--oracle", force_oracle, "force dense-oracle cross-checks where n permits");

  static const std::vector<std::pair<std::string, int (*)(RunContext&)>> table = {
      {"check-potential", &run_check_potential}, {"evolve", &run_evolve},
      {"decay-fit", &run_decay_fit},             {"resolvent-scan", &run_resolvent_scan},
      {"lap", &run_lap},                         {"born-check", &run_born_check},
      {"rkg-check", &run_rkg_check},             {"mourre-check", &run_mourre_check},
      {"zero-mode-scan", &run_zero_mode_scan},   {"spectral-rep-check", &run_spectral_rep_check},
      {"oracle-dump", &run_oracle_dump}};
  for (const auto& [name, fn] : table) app.add_subcommand(name, name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  RunContext ctx;
  ctx.out_dir = out_dir;
  ctx.seed = seed;
  ctx.force_oracle = force_oracle;
  std::string chosen;
  try {
    ctx.cfg = config_path.empty() ? ExperimentConfig{} : ExperimentConfig::parse_file(config_path);
    for (const auto& ov : overrides) {
      const std::size_t eq = ov.find('=');
      if (eq == std::string::npos)
        throw InvalidArgument("--set expects section.key=value, got '" + ov + "'");
      ctx.cfg.set(ov.substr(0, eq), ov.substr(eq + 1));
    }
    for (const auto& [name, fn] : table)
      if (app.get_subcommand(name)->parsed()) {
        chosen = name;
        fs::create_directories(ctx.out_dir);
        fn(ctx);
        break;
      }
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  ctx.write_artifacts(chosen);
  std::printf("%s: %s (summary: %s)\n", chosen.c_str(), ctx.all_passed ? "PASS" : "FAIL",
              (ctx.out_dir / "summary.json").c_str());
  return ctx.all_passed ? 0 : 1;
}

}  // namespace kg
