#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mkvlab/simulate.hpp"

namespace mkv {

/// Initial law as written in a config: point, uniform or file.
struct InitSpec {
  std::string kind = "point";
  std::vector<double> value{1.0};  // point
  std::vector<double> lo, hi;      // uniform box
  std::string path;                // file

  InitialLaw build(int dim) const;
  bool operator==(const InitSpec&) const = default;
};

/// Flat key = value run description. Keys, with their sections:
///   experiment, out, tolerance
///   scenario.name, scenario.<param>
///   sim.particles sim.horizon sim.steps_per_unit sim.substeps sim.cut_level
///   sim.seed sim.exit_levels sim.lag sim.threads sim.checkpoint_every
///   init.kind init.value init.lo init.hi init.path (init2.* for the second
///   law of a coupled run)
///   stability.probe stability.certificate stability.vbar_power stability.seeds
///   stability.transient
///   stationary.horizons stationary.checkpoints stationary.max_points
///   lions.functions lions.probes lions.particles lions.residual
///   lyapunov.probes lyapunov.probe_particles lyapunov.probe_scale
/// Lists are comma separated.
struct RunConfig {
  std::string experiment = "simulate";
  std::string out = ".";
  double tolerance = 0.1;

  std::string scenario = "example1-quartic";
  std::map<std::string, double> params;

  SimConfig sim{.exit_levels = {2, 5, 10}};
  InitSpec init;
  InitSpec init2{"point", {0.0}, {}, {}, {}};

  std::string stability_probe = "contraction";  // or scheutzow
  std::string stability_certificate = "all";    // pointwise, integrated, all
  double stability_vbar_power = 2.0;
  std::vector<std::uint64_t> stability_seeds{1, 2, 3, 4, 5};
  double stability_transient = 0.0;

  std::vector<double> stationary_horizons{10.0, 20.0, 40.0};
  std::size_t stationary_checkpoints = 100;
  std::size_t stationary_max_points = 1000000;

  std::vector<std::string> lions_functions{"moment4", "example2-v", "mean-squared"};
  std::size_t lions_probes = 20;
  std::size_t lions_particles = 8;
  std::string lions_residual = "none";  // none, measure, full

  std::size_t lyapunov_probes = 50;
  std::size_t lyapunov_probe_particles = 64;
  double lyapunov_probe_scale = 0.3;

  static RunConfig parse(const std::string& text);
  /// Applies one key = value assignment; line is only used for errors.
  void set(const std::string& key, const std::string& value, int line = 0);
  static RunConfig load(const std::string& path);
  std::string serialize() const;

  bool operator==(const RunConfig&) const = default;
};

const std::vector<std::string>& experiment_names();

}  // namespace mkv
