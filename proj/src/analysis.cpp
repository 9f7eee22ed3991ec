#include "kg/analysis.hpp"

#include <cmath>

#include "kg/errors.hpp"

namespace kg {

DecayFit fit_decay(const DecaySeries& series, double window_lo, double window_hi) {
  if (window_lo < 1.0)
    throw InvalidArgument("fit_decay: window must start at t >= 1 (power-law regime)");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    const double t = series.times[i];
    if (t < window_lo || t > window_hi) continue;
    if (!(series.norms[i] > 0.0))
      throw InvalidArgument("fit_decay: nonpositive norm inside the fit window");
    lx.push_back(std::log(t));
    ly.push_back(std::log(series.norms[i]));
  }
  if (lx.size() < 8)
    throw InvalidArgument("fit_decay: need >= 8 samples in the window, got " +
                          std::to_string(lx.size()));

  const int n = static_cast<int>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double det = n * sxx - sx * sx;
  DecayFit fit;
  fit.window_lo = window_lo;
  fit.window_hi = window_hi;
  fit.exponent = (n * sxy - sx * sy) / det;
  const double intercept = (sy - fit.exponent * sx) / n;
  fit.amplitude = std::exp(intercept);
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / n;
  for (int i = 0; i < n; ++i) {
    const double pred = fit.exponent * lx[i] + intercept;
    fit.residuals.push_back(ly[i] - pred);
    ss_res += (ly[i] - pred) * (ly[i] - pred);
    ss_tot += (ly[i] - mean) * (ly[i] - mean);
  }
  fit.r2 = ss_tot > 0.0 ? std::max(0.0, 1.0 - ss_res / ss_tot) : 1.0;
  fit.flagged = fit.r2 < 0.95;
  return fit;
}

std::vector<DecaySeries> run_decay_experiment(const PotentialSet& p, const StateVector& initial,
                                              const DecayExperimentSpec& spec,
                                              const EvolutionPlan& plan) {
  // certification: reject supercritical potentials up front
  DiscreteSpectrumData bound_states = discrete_spectrum(p);
  StateVector projected = project_Pc(bound_states, initial);

  const double r0 = concentration_radius(projected);
  check_horizon(*p.grid, r0, plan.t_max);

  std::vector<std::pair<std::string, StateVector>> branches;
  if (spec.split == DecaySplit::None) {
    branches.emplace_back("full", projected);
  } else {
    const double delta1 = spec.chi_delta1 > 0.0 ? spec.chi_delta1 : p.m / 4.0;
    CutoffSpec low = chi_low_energy(p.m, delta1);
    CutoffSpec high = chi_complement(low);
    branches.emplace_back("low", chi_filter(p, low, projected, plan.krylov));
    branches.emplace_back("high", chi_filter(p, high, projected, plan.krylov));
  }

  // log-spaced sampling times: t = 0 start, then t_min .. t_max
  std::vector<double> ts;
  const double decades = std::log10(plan.t_max / spec.t_min);
  const int count = std::max(2, static_cast<int>(std::ceil(decades * spec.samples_per_decade)));
  for (int i = 0; i <= count; ++i)
    ts.push_back(spec.t_min * std::pow(plan.t_max / spec.t_min, static_cast<double>(i) / count));

  std::vector<DecaySeries> out;
  for (auto& [name, state0] : branches) {
    DecaySeries series;
    series.sigma = spec.sigma;
    series.branch = name;
    StateVector cur = state0;
    double t_cur = 0.0;
    EvolutionPlan step_plan = plan;
    step_plan.enforce_horizon = false;  // guarded once above for the full horizon
    for (double t : ts) {
      cur = propagate_U(p, t - t_cur, cur, step_plan);
      t_cur = t;
      series.times.push_back(t);
      series.norms.push_back(energy_norm(cur, -spec.sigma));
    }
    out.push_back(std::move(series));
  }
  return out;
}

}  // namespace kg
