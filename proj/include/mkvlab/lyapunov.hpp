#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mkvlab/expr.hpp"
#include "mkvlab/measure.hpp"
#include "mkvlab/model.hpp"

namespace mkv {

/// Scalar rate m(t): a constant or a general callable.
class Rate {
 public:
  Rate() = default;
  Rate(double c) : value_(c) {}  // NOLINT(google-explicit-constructor)
  static Rate function(std::function<double(double)> f);

  bool is_constant() const { return !fn_; }
  double operator()(double t) const { return fn_ ? fn_(t) : value_; }

 private:
  double value_ = 0.0;
  std::function<double(double)> fn_;
};

enum class LyapunovMode { Pointwise, Integrated };

/// Lyapunov package for a model. Expressions use the model's declared
/// functional list for their measure arguments.
///
/// Measure derivatives are separable: dmu[a] is the a-th component of
/// d_mu v(t,x,mu)(y) written as sum_r A_r(t,x,fv) B_r(t,y,fv); dydmu holds
/// the d x d matrix d_y d_mu v in the same form. Empty kernels mean zero.
struct LyapunovSpec {
  Expr v;
  Expr dt;
  std::vector<Expr> dx;                // d
  std::vector<Expr> dxx;               // d x d
  std::vector<SeparableKernel> dmu;    // d
  std::vector<SeparableKernel> dydmu;  // d x d
  Expr floor;                          // V(t, x)
  Rate m1;
  Rate m2;
  std::function<double(int)> boundary_infimum;  // k -> V_k
  LyapunovMode mode = LyapunovMode::Integrated;
  /// Trapezoid step for envelopes when a rate is not constant.
  double quadrature_step = 2.5e-4;

  /// Throws InvalidArgument when the closures do not fit the model.
  void validate(const ModelSpec& model) const;
  bool measure_dependent() const;

  double value(double t, std::span<const double> x, std::span<const double> fv) const;
};

/// L^mu v at (t, x) for the empirical measure mu. Measure terms use the
/// separable fast path.
double generator(const ModelSpec& model, const LyapunovSpec& lyap, double t, std::span<const double> x,
                 const EmpiricalMeasure& mu);

/// (1/N) sum_i L^mu v(t, x_i). O(N) via kernel averages.
double integrated_generator(const ModelSpec& model, const LyapunovSpec& lyap, double t, const EmpiricalMeasure& mu,
                            int threads = 1);

/// Same quantity with the inner measure integral evaluated directly, O(N^2).
double integrated_generator_reference(const ModelSpec& model, const LyapunovSpec& lyap, double t,
                                      const EmpiricalMeasure& mu);

/// Per-particle generator values, fast path.
std::vector<double> generator_values(const ModelSpec& model, const LyapunovSpec& lyap, double t,
                                     const EmpiricalMeasure& mu, int threads = 1);

struct LyapunovProbe {
  double t = 0.0;
  EmpiricalMeasure mu;
};

struct ProbeMargin {
  std::size_t id = 0;
  double t = 0.0;
  double lhs = 0.0;     // integrated: int L v dmu; pointwise: L v at the worst particle
  double rhs = 0.0;     // m1 * v + m2 at the same place
  double margin = 0.0;  // rhs - lhs
  double growth_ratio = 0.0;  // int(|b| + |sigma|^2) dmu / (1 + int v dmu)
};

struct LyapunovReport {
  LyapunovMode mode = LyapunovMode::Integrated;
  std::vector<ProbeMargin> probes;
  double min_margin = 0.0;
  /// Smallest c with int(|b| + |sigma|^2) dmu <= c (1 + int v dmu) on the probes.
  double fitted_growth_constant = 0.0;
  /// Probes on which int V dmu > int v dmu.
  std::size_t floor_violations = 0;
  /// Probes with v < 0 at some particle.
  std::size_t negative_v = 0;
  bool ok = true;
};

LyapunovReport check_lyapunov_condition(const ModelSpec& model, const LyapunovSpec& lyap,
                                        std::span<const LyapunovProbe> probes, double tolerance = 1e-9);

/// exp(-int_0^t m1).
double gamma(const LyapunovSpec& lyap, double t);
/// M(t) = Ev0 / gamma(t) + int_0^t gamma(s)/gamma(t) m2(s) ds.
double envelope_M(const LyapunovSpec& lyap, double ev0, double t);
/// M+(t) = exp(int_0^t m1+) (Ev0 + int_0^t gamma(s) m2+(s) ds).
double envelope_Mplus(const LyapunovSpec& lyap, double ev0, double t);

enum class ExitBoundKind {
  CutLevel,  // P(first exit from D_k before t) for the level-k cut process: P0 + M / V_k
  SubLevel,  // P(first exit from D_m before t), m < k, pointwise mode: P0 + M+ / V_m
};

double exit_probability_bound(const LyapunovSpec& lyap, double ev0, double t, int level, double p0_out,
                              ExitBoundKind kind);

}  // namespace mkv
