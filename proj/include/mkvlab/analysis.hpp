#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mkvlab/lyapunov.hpp"
#include "mkvlab/measure.hpp"
#include "mkvlab/model.hpp"
#include "mkvlab/scenarios.hpp"
#include "mkvlab/simulate.hpp"

namespace mkv {

struct StabilityReport {
  LyapunovMode mode = LyapunovMode::Pointwise;
  double g = 0.0;
  double h = 0.0;
  double exponent = 0.0;  // g + h + 2|h| or h
  double tolerance = 0.1;
  std::vector<double> t;
  std::vector<double> measured;     // E vbar(x1_t - x2_t)
  std::vector<double> measured_sd;  // Monte Carlo standard error of the mean
  std::vector<double> bound;        // exp(exponent t) E vbar(x1_0 - x2_0)
  /// min over checkpoints of bound (1 + tol) + 3 sd - measured.
  double margin = 0.0;
  /// max over checkpoints with a positive bound of |measured / bound - 1|.
  double max_relative_gap = 0.0;
  bool pass = true;
};

StabilityReport stability_experiment(const ModelSpec& model, const Vbar& vbar, const ContractionCertificate& cert,
                                     const SimConfig& cfg, const InitialLaw& init1, const InitialLaw& init2,
                                     double tolerance = 0.1);

struct ScheutzowReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> t;
  /// Largest W1 between replica 0 and any other replica, per checkpoint.
  std::vector<double> max_w1;
  double worst = 0.0;       // over checkpoints with t >= transient
  double threshold = 0.0;   // 5 / sqrt(N)
  bool pass = true;
};

/// Independent replicas (one per seed) from the same initial law; the
/// replicas' empirical laws are compared in W1 at every checkpoint.
ScheutzowReport scheutzow_probe(const ModelSpec& model, const SimConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                const InitialLaw& init, double transient = 0.0);

struct OccupationMeasure {
  double horizon = 0.0;
  std::size_t checkpoints = 0;
  std::size_t particles_kept = 0;
  std::vector<double> samples;  // (checkpoints x particles_kept) x d
  int dim = 1;

  EmpiricalMeasure measure() const { return EmpiricalMeasure(samples, dim); }
};

struct StationaryReport {
  std::vector<OccupationMeasure> occupation;
  /// W1 between consecutive horizons' occupation measures.
  std::vector<double> w1_gaps;
  /// Declared functionals evaluated on each occupation measure.
  std::vector<std::string> functional_names;
  std::vector<std::vector<double>> functionals;
  /// Set when the envelope is not bounded in time (m1 > 0 somewhere sampled).
  bool envelope_warning = false;
};

/// Krylov-Bogolyubov time averages: for each horizon T the occupation
/// measure pools the cloud at times j T / checkpoints, j = 1..checkpoints,
/// keeping at most max_points / checkpoints particles per time by stride.
StationaryReport stationary_estimate(const ModelSpec& model, const SimConfig& cfg, const std::vector<double>& horizons,
                                     const InitialLaw& init, const LyapunovSpec* lyap = nullptr,
                                     std::size_t checkpoints = 100, std::size_t max_points = 1000000);

/// Fourth moment of example1 solving m' = 3m - 4m^2.
double moment_ode_oracle(double m0, double t);

}  // namespace mkv
