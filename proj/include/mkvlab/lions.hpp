#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mkvlab/expr.hpp"
#include "mkvlab/lyapunov.hpp"
#include "mkvlab/measure.hpp"
#include "mkvlab/model.hpp"
#include "mkvlab/simulate.hpp"

namespace mkv {

/// u(mu) = F(functionals of mu), with optional closed-form L-derivatives.
/// dmu[a] and dydmu[a*d+c] are expressions in y (Expr::aux) and the
/// functional values.
struct MeasureFunction {
  std::string id;
  int dim = 1;
  std::vector<FunctionalTag> functionals;
  Expr value;
  std::vector<Expr> dmu;
  std::vector<Expr> dydmu;
  /// Magnitude of the third derivative of the lift in one coordinate,
  /// used for the finite-difference tolerance 10 h^2 scale.
  std::function<double(const EmpiricalMeasure&)> cubic_scale;

  bool has_derivatives() const { return !dmu.empty(); }
  double operator()(const EmpiricalMeasure& mu) const;
  double operator()(std::span<const double> samples) const;
  /// Analytic d_mu u(mu)(y).
  std::vector<double> derivative(const EmpiricalMeasure& mu, std::span<const double> y) const;
};

/// moment4: int x^4 dmu; example2-v: (xbar - alpha mean)^4 with xbar = 0.7,
/// alpha = -0.5; mean-squared: (int x dmu)^2.
std::vector<MeasureFunction> measure_function_registry();
MeasureFunction registry_function(const std::string& id);
MeasureFunction example2_function(double xbar, double alpha);

/// eps^(1/3) (1 + |x|_inf).
double default_fd_step(std::span<const double> x);

/// N (u(mu with x_i + h e_a) - u(mu with x_i - h e_a)) / (2h), per axis a.
/// h <= 0 selects default_fd_step(x_i).
std::vector<double> lift_gradient(const MeasureFunction& u, const EmpiricalMeasure& mu, std::size_t i, double h = 0.0);

struct StructureReport {
  std::size_t duplicate_pairs = 0;
  double max_duplicate_deviation = 0.0;
  /// Largest |lift gradient - analytic| over particles (0 without analytic derivatives).
  double max_analytic_deviation = 0.0;
  double h = 0.0;
  double tolerance = 0.0;
  bool ok = true;
};

/// Compares lift gradients at duplicated atoms and against the analytic
/// derivative; tolerance is 10 h^2 cubic_scale(mu).
StructureReport check_structure(const MeasureFunction& u, const EmpiricalMeasure& mu, double h = 0.0);

struct ResidualSeries {
  std::vector<double> t;
  std::vector<double> value;        // u(mu_t), or mean v along tagged particles
  std::vector<double> R;            // Ito residual without the martingale term
  std::vector<double> compensated;  // R minus the realized stochastic integral
  std::vector<double> band;         // 3-sigma scale of the subtracted term (measure) or of the mean (full)
};

/// u(mu_t) - u(mu_0) - sum over steps of (1/N) sum_i [b . d_mu u(x_i) + 1/2 tr(sigma sigma^T d_y d_mu u(x_i))] h.
ResidualSeries ito_residual_measure(const MeasureFunction& u, const ModelSpec& model, const SimConfig& cfg,
                                    const InitialLaw& init);

/// Tagged particles driven by an independent cloud (separate noise keys)
/// that supplies the law argument. Per tagged particle:
///   v(t, x_t, mu~_t) - v(0, x_0, mu~_0) - sum L^{mu~} v(x) h - realized martingales,
/// averaged over tagged particles. R omits the martingale subtraction.
ResidualSeries ito_residual_full(const LyapunovSpec& v, const ModelSpec& model, const SimConfig& cfg,
                                 const InitialLaw& init);

}  // namespace mkv
