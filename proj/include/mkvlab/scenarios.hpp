#pragma once

#include <map>
#include <string>
#include <vector>

#include "mkvlab/lyapunov.hpp"
#include "mkvlab/model.hpp"

namespace mkv {

/// Constant rates (g, h) for the coupled-path stability bound:
///   pointwise:  E vbar(x1_t - x2_t) <= exp((g + h + 2|h|) t) E vbar(x1_0 - x2_0)
///   integrated: E vbar(x1_t - x2_t) <= exp(h t) E vbar(x1_0 - x2_0)
struct ContractionCertificate {
  LyapunovMode mode = LyapunovMode::Pointwise;
  double g = 0.0;
  double h = 0.0;

  double exponent() const;
};

struct Scenario {
  std::string name;
  std::map<std::string, double> params;
  ModelSpec model;
  LyapunovSpec lyapunov;
  std::vector<ContractionCertificate> certificates;
};

/// Built-in scenarios and their parameters (defaults in brackets):
///   example1-quartic
///   example2-nonlinear     alpha [-0.5], sigma [0.5]
///   example3-cir           kappa [1], theta [1.5], sigma [1], alpha [0.05]
///   linear-meanfield       a [-1], b [0], sigma [1]
///   scheutzow-clamp        sigma [0.5]
/// Unknown names or parameters, and parameters outside a scenario's
/// admissible range, throw InvalidArgument.
Scenario builtin_scenario(const std::string& name, const std::map<std::string, double>& params = {});

std::vector<std::string> builtin_scenario_names();
/// Parameter names and defaults for a scenario.
std::map<std::string, double> scenario_defaults(const std::string& name);

}  // namespace mkv
