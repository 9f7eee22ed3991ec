#pragma once

#include "kg/evolution.hpp"

namespace kg {

struct DecaySeries {
  std::vector<double> times;
  std::vector<double> norms;  // F_{-sigma} values
  double sigma = 0.0;
  std::string branch = "full";
  std::string config_fingerprint;
};

struct DecayFit {
  double exponent = 0.0;
  double amplitude = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  double r2 = 0.0;
  bool flagged = false;  // r2 < 0.95: oscillatory or contaminated series
  std::vector<double> residuals;
};

// Least-squares line on (log t, log norm) inside the window.
DecayFit fit_decay(const DecaySeries& series, double window_lo, double window_hi);

enum class DecaySplit { None, LowHigh };

struct DecayExperimentSpec {
  double sigma = 3.0;
  double t_min = 1.0;
  int samples_per_decade = 16;
  DecaySplit split = DecaySplit::None;
  double chi_delta1 = -1.0;  // low-energy cutoff half-width; < 0 means m/4
};

// Evolves the projected (and optionally cutoff-split) state, sampling the
// F_{-sigma} norm on a log-spaced grid inside the horizon guard. Returns one
// series per branch.
std::vector<DecaySeries> run_decay_experiment(const PotentialSet& p, const StateVector& initial,
                                              const DecayExperimentSpec& spec,
                                              const EvolutionPlan& plan);

}  // namespace kg
