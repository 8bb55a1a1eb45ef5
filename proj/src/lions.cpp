#include "mkvlab/lions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mkvlab/error.hpp"
#include "mkvlab/reduce.hpp"

namespace mkv {

double MeasureFunction::operator()(std::span<const double> samples) const {
  const auto fv = evaluate_functionals(functionals, samples, dim);
  return value.eval(EvalPoint{0.0, {}, {}, fv});
}

double MeasureFunction::operator()(const EmpiricalMeasure& mu) const { return (*this)(mu.samples()); }

std::vector<double> MeasureFunction::derivative(const EmpiricalMeasure& mu, std::span<const double> y) const {
  if (dmu.empty()) throw InvalidArgument("measure function '" + id + "' has no analytic derivative");
  const auto fv = evaluate_functionals(functionals, mu.samples(), dim);
  std::vector<double> out;
  for (const auto& e : dmu) out.push_back(e.eval(EvalPoint{0.0, y, y, fv}));
  return out;
}

namespace {

double max_abs(const EmpiricalMeasure& mu) {
  double m = 0.0;
  for (double v : mu.samples()) m = std::max(m, std::abs(v));
  return m;
}

MeasureFunction moment4_function() {
  const Expr y = Expr::aux(0);
  MeasureFunction f;
  f.id = "moment4";
  f.functionals = {FunctionalTag::raw_moment(4)};
  f.value = Expr::functional(0);
  f.dmu = {4.0 * pow(y, 3)};
  f.dydmu = {12.0 * pow(y, 2)};
  f.cubic_scale = [](const EmpiricalMeasure& mu) { return 4.0 * std::pow(std::max(1.0, max_abs(mu)), 3); };
  return f;
}

MeasureFunction mean_squared_function() {
  MeasureFunction f;
  f.id = "mean-squared";
  f.functionals = {FunctionalTag::mean()};
  f.value = pow(Expr::functional(0), 2);
  f.dmu = {2.0 * Expr::functional(0)};
  f.dydmu = {Expr(0.0)};
  f.cubic_scale = [](const EmpiricalMeasure&) { return 1.0; };
  return f;
}

}  // namespace

MeasureFunction example2_function(double xbar, double alpha) {
  // lincomb value is alpha * mean, so u = (xbar - f0)^4
  const Expr u = Expr(xbar) - Expr::functional(0);
  MeasureFunction f;
  f.id = "example2-v";
  f.functionals = {FunctionalTag::linear_combination(alpha)};
  f.value = pow(u, 4);
  f.dmu = {-4.0 * alpha * pow(u, 3)};
  f.dydmu = {Expr(0.0)};
  f.cubic_scale = [xbar, alpha](const EmpiricalMeasure& mu) {
    const double c = std::abs(xbar - alpha * mean(mu));
    return 4.0 * std::abs(alpha) * std::pow(std::max(1.0, c), 3);
  };
  return f;
}

std::vector<MeasureFunction> measure_function_registry() {
  return {moment4_function(), example2_function(0.7, -0.5), mean_squared_function()};
}

MeasureFunction registry_function(const std::string& id) {
  for (auto& f : measure_function_registry())
    if (f.id == id) return f;
  throw InvalidArgument("unknown measure function '" + id + "'");
}

double default_fd_step(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + m);
}

std::vector<double> lift_gradient(const MeasureFunction& u, const EmpiricalMeasure& mu, std::size_t i, double h) {
  if (i >= mu.size()) throw InvalidArgument("particle index out of range");
  if (mu.dim() != u.dim) throw InvalidArgument("measure dimension does not match the function");
  if (std::isnan(h)) throw InvalidArgument("step must be a number");
  const double step = h > 0.0 ? h : default_fd_step(mu.point(i));
  const auto d = static_cast<std::size_t>(mu.dim());
  std::vector<double> work(mu.samples().begin(), mu.samples().end());
  std::vector<double> grad(d);
  const double n = static_cast<double>(mu.size());
  for (std::size_t a = 0; a < d; ++a) {
    double& slot = work[i * d + a];
    const double x0 = slot;
    slot = x0 + step;
    const double up = u(work);
    slot = x0 - step;
    const double down = u(work);
    slot = x0;
    grad[a] = n * (up - down) / (2.0 * step);
    if (!std::isfinite(grad[a])) throw NumericalError("non-finite finite difference in '" + u.id + "'");
  }
  return grad;
}

StructureReport check_structure(const MeasureFunction& u, const EmpiricalMeasure& mu, double h) {
  StructureReport rep;
  const std::size_t n = mu.size();
  std::vector<std::vector<double>> grads(n);
  for (std::size_t i = 0; i < n; ++i) {
    grads[i] = lift_gradient(u, mu, i, h);
    rep.h = std::max(rep.h, h > 0.0 ? h : default_fd_step(mu.point(i)));
  }
  rep.tolerance = 10.0 * rep.h * rep.h * (u.cubic_scale ? u.cubic_scale(mu) : 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (u.has_derivatives()) {
      const auto exact = u.derivative(mu, mu.point(i));
      for (std::size_t a = 0; a < exact.size(); ++a)
        rep.max_analytic_deviation = std::max(rep.max_analytic_deviation, std::abs(grads[i][a] - exact[a]));
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto pi = mu.point(i), pj = mu.point(j);
      if (!std::equal(pi.begin(), pi.end(), pj.begin())) continue;
      ++rep.duplicate_pairs;
      for (std::size_t a = 0; a < grads[i].size(); ++a)
        rep.max_duplicate_deviation = std::max(rep.max_duplicate_deviation, std::abs(grads[i][a] - grads[j][a]));
    }
  }
  rep.ok = rep.max_duplicate_deviation <= rep.tolerance && rep.max_analytic_deviation <= rep.tolerance;
  return rep;
}

namespace {

// sigma dW for particle i from a step trace.
void sigma_dw(const StepTrace& tr, std::size_t i, std::size_t d, std::size_t q, std::span<double> out) {
  for (std::size_t a = 0; a < d; ++a) {
    double acc = 0.0;
    for (std::size_t r = 0; r < q; ++r) acc += tr.diffusion[i * d * q + a * q + r] * tr.dw[i * q + r];
    out[a] = acc;
  }
}

double cov(const StepTrace& tr, std::size_t i, std::size_t d, std::size_t q, std::size_t a, std::size_t c) {
  double acc = 0.0;
  for (std::size_t r = 0; r < q; ++r)
    acc += tr.diffusion[i * d * q + a * q + r] * tr.diffusion[i * d * q + c * q + r];
  return acc;
}

struct MeasureResidualHook {
  const MeasureFunction& u;
  const ModelSpec& model;
  double h;
  int threads;
  std::vector<double> grad;   // N x d, d_mu u at pre-step positions
  std::vector<double> hess;   // N x d x d
  double drift_sum = 0.0;
  double mart_sum = 0.0;
  double mart_var = 0.0;

  void before(const ParticleCloud& c, double, std::span<const double>) {
    const std::size_t n = c.size();
    const auto d = static_cast<std::size_t>(c.dim);
    const auto fv = evaluate_functionals(u.functionals, c.x, c.dim, threads);
    grad.assign(n * d, 0.0);
    hess.assign(n * d * d, 0.0);
    const long nl = static_cast<long>(n);
#pragma omp parallel for num_threads(threads) schedule(static)
    for (long il = 0; il < nl; ++il) {
      const auto i = static_cast<std::size_t>(il);
      const auto y = c.point(i);
      const EvalPoint p{c.t, y, y, fv};
      for (std::size_t a = 0; a < d; ++a) grad[i * d + a] = u.dmu[a].eval(p);
      for (std::size_t ac = 0; ac < u.dydmu.size(); ++ac) hess[i * d * d + ac] = u.dydmu[ac].eval(p);
    }
  }

  void after(const ParticleCloud& c, const StepTrace& tr) {
    const std::size_t n = c.size();
    const auto d = static_cast<std::size_t>(c.dim);
    const auto q = static_cast<std::size_t>(model.noise_dim());
    std::vector<double> drift(n), mart(n), var(n), sdw(d);
    for (std::size_t i = 0; i < n; ++i) {
      double gen = 0.0;
      for (std::size_t a = 0; a < d; ++a) gen += tr.drift[i * d + a] * grad[i * d + a];
      if (!u.dydmu.empty())
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t e = 0; e < d; ++e) gen += 0.5 * cov(tr, i, d, q, a, e) * hess[i * d * d + a * d + e];
      drift[i] = gen;
      sigma_dw(tr, i, d, q, sdw);
      double m = 0.0, v = 0.0;
      for (std::size_t a = 0; a < d; ++a) m += grad[i * d + a] * sdw[a];
      for (std::size_t r = 0; r < q; ++r) {
        double s = 0.0;
        for (std::size_t a = 0; a < d; ++a) s += grad[i * d + a] * tr.diffusion[i * d * q + a * q + r];
        v += s * s;
      }
      mart[i] = m;
      var[i] = v;
    }
    const double nd = static_cast<double>(n);
    drift_sum += pairwise_sum(drift) / nd * h;
    mart_sum += pairwise_sum(mart) / nd;
    mart_var += pairwise_sum(var) / (nd * nd) * h;
  }
};

bool due(std::int64_t done, std::int64_t total, int every) { return done % every == 0 || done == total; }

}  // namespace

ResidualSeries ito_residual_measure(const MeasureFunction& u, const ModelSpec& model, const SimConfig& cfg,
                                    const InitialLaw& init) {
  if (!u.has_derivatives()) throw InvalidArgument("Ito residual needs analytic derivatives");
  if (u.dim != model.dim()) throw InvalidArgument("measure function dimension does not match the model");
  cfg.validate();
  Simulation sim(model, cfg, init.sample(cfg.particles, model.dim(), cfg.seed));
  MeasureResidualHook hook{u, model, cfg.step_size(), sim.threads(), {}, {}};
  ResidualSeries out;
  const double u0 = u(sim.cloud().x);
  auto record = [&] {
    const double ut = u(sim.cloud().x);
    out.t.push_back(sim.cloud().t);
    out.value.push_back(ut);
    out.R.push_back(ut - u0 - hook.drift_sum);
    out.compensated.push_back(ut - u0 - hook.drift_sum - hook.mart_sum);
    out.band.push_back(3.0 * std::sqrt(hook.mart_var));
  };
  record();
  const std::int64_t total = cfg.lag_intervals();
  for (std::int64_t i = 1; i <= total; ++i) {
    sim.advance_lag_interval(hook);
    if (due(i, total, cfg.checkpoint_every)) record();
  }
  return out;
}

ResidualSeries ito_residual_full(const LyapunovSpec& v, const ModelSpec& model, const SimConfig& cfg,
                                 const InitialLaw& init) {
  cfg.validate();
  v.validate(model);
  const std::size_t n = cfg.particles;
  const auto d = static_cast<std::size_t>(model.dim());
  const auto q = static_cast<std::size_t>(model.noise_dim());
  Simulation tagged_sim(model, cfg, init.sample(n, model.dim(), cfg.seed));
  Simulation tilde_sim(model, cfg, init.sample(n, model.dim(), cfg.seed ^ 0x9E3779B97F4A7C15ull));
  ParticleCloud& tagged = tagged_sim.cloud();
  ParticleCloud& tilde = tilde_sim.cloud();
  const NoiseStream noise_tagged(cfg.seed, 1), noise_tilde(cfg.seed, 2);
  const int threads = tagged_sim.threads();
  const double h = cfg.step_size();
  const bool kappa_mode = cfg.lag == LagMode::Kappa;

  std::vector<double> v0(n), integral(n, 0.0), mart(n, 0.0), vals(n);
  auto values_now = [&](std::vector<double>& dst) {
    const auto fv = cloud_functionals(tilde, model, threads);
    for (std::size_t i = 0; i < n; ++i) dst[i] = v.value(tagged.t, tagged.point(i), fv);
  };
  values_now(v0);

  ResidualSeries out;
  auto record = [&] {
    values_now(vals);
    std::vector<double> raw(n), comp(n);
    for (std::size_t i = 0; i < n; ++i) {
      raw[i] = vals[i] - v0[i] - integral[i];
      comp[i] = raw[i] - mart[i];
    }
    const double nd = static_cast<double>(n);
    const double cm = pairwise_sum(comp) / nd;
    std::vector<double> dev(n);
    for (std::size_t i = 0; i < n; ++i) dev[i] = (comp[i] - cm) * (comp[i] - cm);
    const double sd = n > 1 ? std::sqrt(pairwise_sum(dev) / (nd - 1.0)) : 0.0;
    out.t.push_back(tagged.t);
    out.value.push_back(pairwise_sum(vals) / nd);
    out.R.push_back(pairwise_sum(raw) / nd);
    out.compensated.push_back(cm);
    out.band.push_back(3.0 * sd / std::sqrt(nd));
  };
  record();

  StepTrace tr1, tr2;
  std::vector<double> anchor1, anchor2, pre1, pre2;
  const std::int64_t total = cfg.lag_intervals();
  for (std::int64_t lag = 1; lag <= total; ++lag) {
    const double t0 = static_cast<double>(lag - 1) / cfg.steps_per_unit;
    const auto fv0 = cloud_functionals(tilde, model, threads);
    if (kappa_mode) {
      anchor1 = tagged.x;
      anchor2 = tilde.x;
    }
    for (int s = 0; s < cfg.substeps; ++s) {
      const auto fv_now = s == 0 ? fv0 : cloud_functionals(tilde, model, threads);
      const auto& fv_arg = kappa_mode ? fv0 : fv_now;
      const double t_arg = kappa_mode ? t0 : tagged.t;
      const double t_pre = tagged.t;
      pre1 = tagged.x;
      pre2 = tilde.x;
      euler_step(tagged, model, cfg, noise_tagged, t_arg, kappa_mode ? std::span<const double>(anchor1) : std::span<const double>(),
                 fv_arg, threads, &tr1);
      euler_step(tilde, model, cfg, noise_tilde, t_arg, kappa_mode ? std::span<const double>(anchor2) : std::span<const double>(),
                 fv_arg, threads, &tr2);

      // Averages over mu~ of b~_a B_r, S~_ac B_r and B_r (sigma~ dW~)_a.
      std::vector<double> drift_means, diff_means, mart_means;
      std::vector<double> buf(n), buf_m(n), sdw(d);
      for (std::size_t a = 0; a < v.dmu.size(); ++a)
        for (const auto& term : v.dmu[a].terms) {
          for (std::size_t j = 0; j < n; ++j) {
            const std::span<const double> y(pre2.data() + j * d, d);
            const double bj = term.second.eval(EvalPoint{t_pre, y, y, fv_now});
            sigma_dw(tr2, j, d, q, sdw);
            buf[j] = tr2.drift[j * d + a] * bj;
            buf_m[j] = sdw[a] * bj;
          }
          drift_means.push_back(pairwise_sum(buf) / static_cast<double>(n));
          mart_means.push_back(pairwise_sum(buf_m) / static_cast<double>(n));
        }
      for (std::size_t ac = 0; ac < v.dydmu.size(); ++ac)
        for (const auto& term : v.dydmu[ac].terms) {
          for (std::size_t j = 0; j < n; ++j) {
            const std::span<const double> y(pre2.data() + j * d, d);
            buf[j] = cov(tr2, j, d, q, ac / d, ac % d) * term.second.eval(EvalPoint{t_pre, y, y, fv_now});
          }
          diff_means.push_back(pairwise_sum(buf) / static_cast<double>(n));
        }

      const long nl = static_cast<long>(n);
#pragma omp parallel for num_threads(threads) schedule(static)
      for (long il = 0; il < nl; ++il) {
        const auto i = static_cast<std::size_t>(il);
        const std::span<const double> x(pre1.data() + i * d, d);
        const EvalPoint p{t_pre, x, {}, fv_now};
        double gen = v.dt.eval(p);
        double m = 0.0;
        std::vector<double> s1(d);
        sigma_dw(tr1, i, d, q, s1);
        for (std::size_t a = 0; a < d; ++a) {
          const double g = v.dx[a].eval(p);
          gen += tr1.drift[i * d + a] * g;
          m += g * s1[a];
          for (std::size_t c = 0; c < d; ++c) gen += 0.5 * cov(tr1, i, d, q, a, c) * v.dxx[a * d + c].eval(p);
        }
        std::size_t idx = 0;
        for (const auto& k : v.dmu)
          for (const auto& term : k.terms) {
            const double A = term.first.eval(p);
            gen += A * drift_means[idx];
            m += A * mart_means[idx];
            ++idx;
          }
        idx = 0;
        for (const auto& k : v.dydmu)
          for (const auto& term : k.terms) gen += 0.5 * term.first.eval(p) * diff_means[idx++];
        integral[i] += gen * h;
        mart[i] += m;
      }
    }
    if (due(lag, total, cfg.checkpoint_every)) record();
  }
  return out;
}

}  // namespace mkv
