#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mkvlab/lyapunov.hpp"
#include "mkvlab/measure.hpp"
#include "mkvlab/model.hpp"
#include "mkvlab/noise.hpp"

namespace mkv {

enum class LagMode {
  None,   // coefficients at the current position, functionals at the substep start
  Kappa,  // position and functionals frozen at the last lag-grid point i/n
};

struct SimConfig {
  std::size_t particles = 1000;
  double horizon = 1.0;
  /// n: lag grid t_i = i/n.
  int steps_per_unit = 1000;
  /// Integration steps per lag interval; the Euler step is 1/(n * substeps).
  int substeps = 1;
  /// Cut level k; 0 runs without a cut (coefficients still vanish outside D).
  int cut_level = 0;
  std::uint64_t seed = 0;
  std::vector<int> exit_levels;
  LagMode lag = LagMode::None;
  /// 0 resolves through MKVLAB_THREADS, then the hardware.
  int threads = 0;
  /// Lag-grid intervals between diagnostics records.
  int checkpoint_every = 100;

  void validate() const;
  double lag_step() const { return 1.0 / steps_per_unit; }
  double step_size() const { return 1.0 / (static_cast<double>(steps_per_unit) * substeps); }
  /// Lag-grid intervals covering the horizon.
  std::int64_t lag_intervals() const;
  std::optional<int> cut() const { return cut_level > 0 ? std::optional<int>(cut_level) : std::nullopt; }

  bool operator==(const SimConfig&) const = default;
};

/// kappa_n(t) = floor(n t) / n.
double kappa(int n, double t);

struct ParticleCloud {
  int dim = 1;
  std::vector<double> x;  // N x d, row-major
  std::vector<int> exit_levels;
  /// first_exit[l][i]: integration step after which particle i was first
  /// seen outside D_{exit_levels[l]}; -1 if never. Step 0 is the initial state.
  std::vector<std::vector<std::int64_t>> first_exit;
  std::int64_t step = 0;
  double t = 0.0;

  std::size_t size() const { return x.size() / static_cast<std::size_t>(dim); }
  EmpiricalMeasure measure() const { return EmpiricalMeasure(x, dim); }
  std::span<double> point(std::size_t i) { return {x.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)}; }
  std::span<const double> point(std::size_t i) const {
    return {x.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  /// Marks particles outside each tracked level at the current step.
  void record_exits(const DomainLadder& ladder);
  double exit_fraction(std::size_t level_index) const;
};

struct InitialLaw {
  enum class Kind { PointMass, UniformBox, Samples };
  Kind kind = Kind::PointMass;
  std::vector<double> point;
  std::vector<Interval> box;
  std::vector<double> samples;  // M x d; particle i takes sample i mod M

  static InitialLaw point_mass(std::vector<double> x);
  static InitialLaw uniform_box(std::vector<Interval> box);
  static InitialLaw from_samples(std::vector<double> samples, int dim);
  /// Plain text, one particle per line, d whitespace-separated reals; '#' starts a comment.
  static InitialLaw from_file(const std::string& path, int dim);

  int dim() const;
  ParticleCloud sample(std::size_t n, int dim, std::uint64_t seed) const;
};

/// Reads a sample file into an N x d row-major array.
std::vector<double> read_samples(const std::string& path, int dim);

/// Coefficients and increments used by one Euler step, for Ito residuals.
struct StepTrace {
  std::vector<double> drift;      // N x d
  std::vector<double> diffusion;  // N x d x d'
  std::vector<double> dw;         // N x d'
};

/// Functional values of the model's declared functionals on the cloud.
std::vector<double> cloud_functionals(const ParticleCloud& cloud, const ModelSpec& model, int threads);

/// One Euler step of size cfg.step_size():
///   x_i <- x_i + b^k(t_arg, xarg_i, fv) h + sigma^k(t_arg, xarg_i, fv) dW_i
/// x_arg is the cloud itself (LagMode::None) or a lag-point snapshot.
/// Exit records are updated after the move. Throws NumericalError on a
/// non-finite position or coefficient.
void euler_step(ParticleCloud& cloud, const ModelSpec& model, const SimConfig& cfg, const NoiseStream& noise,
                double t_arg, std::span<const double> x_arg, std::span<const double> fv, int threads,
                StepTrace* trace = nullptr);

/// Steps one lag interval [i/n, (i+1)/n), honoring the lag mode and substeps.
/// When trace_hook is given it is called before every Euler step with the
/// cloud, the argument time and functionals, then the filled trace.
class Simulation {
 public:
  Simulation(const ModelSpec& model, SimConfig cfg, ParticleCloud init, std::uint32_t stream = 0);

  void advance_lag_interval();
  template <class Hook>
  void advance_lag_interval(Hook&& hook);

  const ParticleCloud& cloud() const { return cloud_; }
  ParticleCloud& cloud() { return cloud_; }
  const SimConfig& config() const { return cfg_; }
  const ModelSpec& model() const { return model_; }
  int threads() const { return threads_; }
  std::int64_t lag_index() const { return lag_index_; }

 private:
  const ModelSpec& model_;
  SimConfig cfg_;
  ParticleCloud cloud_;
  NoiseStream noise_;
  int threads_;
  std::int64_t lag_index_ = 0;
  std::vector<double> anchor_;
  StepTrace trace_;
};

struct DiagnosticsSeries {
  std::vector<std::string> functional_names;
  std::vector<int> exit_levels;
  int cut_level = 0;
  bool has_lyapunov = false;
  LyapunovMode mode = LyapunovMode::Integrated;
  double ev0 = 0.0;
  std::vector<double> p0_out;  // per exit level

  std::vector<double> t;
  std::vector<std::vector<double>> functionals;  // [record][functional]
  std::vector<double> v_mean, v_sup, v_std, M, M_plus;
  std::vector<std::vector<double>> exit_frac;  // [record][level]
  std::vector<std::vector<double>> out_frac;   // currently outside D_m
  std::vector<std::vector<double>> exit_bound;

  std::size_t records() const { return t.size(); }
  /// Bound applicable to level l: exit_frac when true, out_frac otherwise.
  bool bound_on_exit(std::size_t level_index) const;
};

/// Full localized-Euler run with diagnostics at t = 0 and every
/// cfg.checkpoint_every lag intervals (plus the horizon).
DiagnosticsSeries simulate(const ModelSpec& model, const LyapunovSpec* lyap, const SimConfig& cfg,
                           const InitialLaw& init);

/// Same, starting from a given cloud; returns the final cloud through out.
DiagnosticsSeries simulate(const ModelSpec& model, const LyapunovSpec* lyap, const SimConfig& cfg,
                           ParticleCloud init, ParticleCloud* final_cloud);

struct CoupledSeries {
  DiagnosticsSeries first;
  DiagnosticsSeries second;
  std::vector<double> t;
  std::vector<double> distance;      // mean vbar(x1_i - x2_i)
  std::vector<double> distance_std;  // sample std of vbar(x1_i - x2_i)
};

/// Two clouds driven by the same noise keys, each under its own empirical law.
CoupledSeries coupled_simulate(const ModelSpec& model, const SimConfig& cfg, const InitialLaw& init1,
                               const InitialLaw& init2, const Vbar& vbar, const LyapunovSpec* lyap = nullptr);

template <class Hook>
void Simulation::advance_lag_interval(Hook&& hook) {
  const double t0 = static_cast<double>(lag_index_) / cfg_.steps_per_unit;
  const bool kappa_mode = cfg_.lag == LagMode::Kappa;
  std::vector<double> fv = cloud_functionals(cloud_, model_, threads_);
  if (kappa_mode) anchor_ = cloud_.x;
  for (int s = 0; s < cfg_.substeps; ++s) {
    if (!kappa_mode && s > 0) fv = cloud_functionals(cloud_, model_, threads_);
    const double t_arg = kappa_mode ? t0 : cloud_.t;
    std::span<const double> x_arg = kappa_mode ? std::span<const double>(anchor_) : std::span<const double>();
    hook.before(cloud_, t_arg, fv);
    euler_step(cloud_, model_, cfg_, noise_, t_arg, x_arg, fv, threads_, &trace_);
    hook.after(cloud_, trace_);
  }
  ++lag_index_;
  cloud_.t = static_cast<double>(lag_index_) / cfg_.steps_per_unit;
}

}  // namespace mkv
