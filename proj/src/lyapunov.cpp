#include "mkvlab/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "mkvlab/error.hpp"
#include "mkvlab/reduce.hpp"

namespace mkv {

Rate Rate::function(std::function<double(double)> f) {
  Rate r;
  r.fn_ = std::move(f);
  return r;
}

namespace {

void check_expr(const Expr& e, int nf, int d, bool allow_state, bool allow_aux, const char* what) {
  if (e.max_functional() >= nf) throw InvalidArgument(std::string(what) + " references an undeclared functional");
  if (e.max_state_axis() >= d) throw InvalidArgument(std::string(what) + " references a state axis beyond d");
  if (!allow_state && e.max_state_axis() >= 0) throw InvalidArgument(std::string(what) + " may not depend on x");
  if (!allow_aux && e.uses_aux()) throw InvalidArgument(std::string(what) + " may not depend on y");
}

void check_kernel(const SeparableKernel& k, int nf, int d) {
  for (const auto& [a, b] : k.terms) {
    check_expr(a, nf, d, true, false, "measure-derivative factor A");
    check_expr(b, nf, d, false, true, "measure-derivative factor B");
  }
}

// Per-particle coefficients at every atom of mu.
struct CloudCoefficients {
  std::vector<double> drift;   // N x d
  std::vector<double> cov;     // N x d x d, sigma sigma^T
  std::vector<double> b_norm;  // |b|
  std::vector<double> s_sq;    // |sigma|_F^2
};

CloudCoefficients cloud_coefficients(const ModelSpec& model, double t, const EmpiricalMeasure& mu,
                                     std::span<const double> fv, int threads) {
  const auto n = mu.size();
  const auto d = static_cast<std::size_t>(model.dim());
  const auto q = static_cast<std::size_t>(model.noise_dim());
  CloudCoefficients c{std::vector<double>(n * d), std::vector<double>(n * d * d), std::vector<double>(n),
                      std::vector<double>(n)};
  std::optional<std::string> failure;
  const long nl = static_cast<long>(n);
#pragma omp parallel num_threads(threads)
  {
    std::vector<double> sig(d * q);
#pragma omp for schedule(static)
    for (long il = 0; il < nl; ++il) {
      const auto i = static_cast<std::size_t>(il);
      try {
        std::span<double> b(c.drift.data() + i * d, d);
        model.evaluate(t, mu.point(i), fv, std::nullopt, b, sig);
        double bn = 0.0, ss = 0.0;
        for (std::size_t a = 0; a < d; ++a) bn += b[a] * b[a];
        for (double s : sig) ss += s * s;
        c.b_norm[i] = std::sqrt(bn);
        c.s_sq[i] = ss;
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t e = 0; e < d; ++e) {
            double acc = 0.0;
            for (std::size_t r = 0; r < q; ++r) acc += sig[a * q + r] * sig[e * q + r];
            c.cov[i * d * d + a * d + e] = acc;
          }
      } catch (const std::exception& ex) {
#pragma omp critical(mkv_lyap_fail)
        if (!failure) failure = ex.what();
      }
    }
  }
  if (failure) throw NumericalError(*failure);
  return c;
}

// Averages over y of b_a(y) B_r(y) and S_ac(y) B_r(y), in kernel/term order.
struct KernelMeans {
  std::vector<double> drift;
  std::vector<double> diffusion;
};

KernelMeans kernel_means(const LyapunovSpec& lyap, double t, const EmpiricalMeasure& mu, std::span<const double> fv,
                         const CloudCoefficients& cc, int d, int threads) {
  KernelMeans km;
  const auto n = mu.size();
  const auto du = static_cast<std::size_t>(d);
  std::vector<double> buf(n);
  auto average = [&](const Expr& b, auto coef) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto y = mu.point(j);
      buf[j] = coef(j) * b.eval(EvalPoint{t, y, y, fv});
    }
    return parallel_pairwise_sum(buf, threads) / static_cast<double>(n);
  };
  for (std::size_t a = 0; a < lyap.dmu.size(); ++a)
    for (const auto& term : lyap.dmu[a].terms)
      km.drift.push_back(average(term.second, [&](std::size_t j) { return cc.drift[j * du + a]; }));
  for (std::size_t ac = 0; ac < lyap.dydmu.size(); ++ac)
    for (const auto& term : lyap.dydmu[ac].terms)
      km.diffusion.push_back(average(term.second, [&](std::size_t j) { return cc.cov[j * du * du + ac]; }));
  return km;
}

double local_part(const LyapunovSpec& lyap, double t, std::span<const double> x, std::span<const double> fv,
                  std::span<const double> b, std::span<const double> cov, int d) {
  const EvalPoint p{t, x, {}, fv};
  double acc = lyap.dt.eval(p);
  for (int a = 0; a < d; ++a) acc += b[static_cast<std::size_t>(a)] * lyap.dx[static_cast<std::size_t>(a)].eval(p);
  for (int ac = 0; ac < d * d; ++ac)
    acc += 0.5 * cov[static_cast<std::size_t>(ac)] * lyap.dxx[static_cast<std::size_t>(ac)].eval(p);
  return acc;
}

double measure_part(const LyapunovSpec& lyap, double t, std::span<const double> x, std::span<const double> fv,
                    const KernelMeans& km) {
  const EvalPoint p{t, x, {}, fv};
  double acc = 0.0;
  std::size_t idx = 0;
  for (const auto& k : lyap.dmu)
    for (const auto& term : k.terms) acc += term.first.eval(p) * km.drift[idx++];
  idx = 0;
  for (const auto& k : lyap.dydmu)
    for (const auto& term : k.terms) acc += 0.5 * term.first.eval(p) * km.diffusion[idx++];
  return acc;
}

std::vector<double> values_with(const ModelSpec& model, const LyapunovSpec& lyap, double t,
                                const EmpiricalMeasure& mu, std::span<const double> fv, const CloudCoefficients& cc,
                                int threads) {
  const int d = model.dim();
  const auto du = static_cast<std::size_t>(d);
  const KernelMeans km = kernel_means(lyap, t, mu, fv, cc, d, threads);
  const auto n = mu.size();
  std::vector<double> out(n);
  const long nl = static_cast<long>(n);
#pragma omp parallel for num_threads(threads) schedule(static)
  for (long il = 0; il < nl; ++il) {
    const auto i = static_cast<std::size_t>(il);
    const auto x = mu.point(i);
    out[i] = local_part(lyap, t, x, fv, std::span<const double>(cc.drift.data() + i * du, du),
                        std::span<const double>(cc.cov.data() + i * du * du, du * du), d) +
             measure_part(lyap, t, x, fv, km);
  }
  return out;
}

}  // namespace

void LyapunovSpec::validate(const ModelSpec& model) const {
  const int d = model.dim();
  const int nf = static_cast<int>(model.functionals().size());
  const auto du = static_cast<std::size_t>(d);
  if (dx.size() != du) throw InvalidArgument("Lyapunov gradient must have d components");
  if (dxx.size() != du * du) throw InvalidArgument("Lyapunov Hessian must be d x d");
  if (!dmu.empty() && dmu.size() != du) throw InvalidArgument("measure derivative must have d components");
  if (!dydmu.empty() && dydmu.size() != du * du) throw InvalidArgument("d_y d_mu v must be d x d");
  if (!boundary_infimum) throw InvalidArgument("Lyapunov package needs boundary infima V_k");
  check_expr(v, nf, d, true, false, "v");
  check_expr(dt, nf, d, true, false, "d_t v");
  for (const auto& e : dx) check_expr(e, nf, d, true, false, "d_x v");
  for (const auto& e : dxx) check_expr(e, nf, d, true, false, "d_xx v");
  check_expr(floor, 0, d, true, false, "V");
  for (const auto& k : dmu) check_kernel(k, nf, d);
  for (const auto& k : dydmu) check_kernel(k, nf, d);
}

bool LyapunovSpec::measure_dependent() const {
  auto nonempty = [](const std::vector<SeparableKernel>& ks) {
    return std::any_of(ks.begin(), ks.end(), [](const SeparableKernel& k) { return !k.empty(); });
  };
  return nonempty(dmu) || nonempty(dydmu);
}

double LyapunovSpec::value(double t, std::span<const double> x, std::span<const double> fv) const {
  return v.eval(EvalPoint{t, x, {}, fv});
}

double generator(const ModelSpec& model, const LyapunovSpec& lyap, double t, std::span<const double> x,
                 const EmpiricalMeasure& mu) {
  const int d = model.dim();
  const auto fv = evaluate_functionals(model.functionals(), mu.samples(), d);
  const CloudCoefficients cc = cloud_coefficients(model, t, mu, fv, 1);
  const KernelMeans km = kernel_means(lyap, t, mu, fv, cc, d, 1);
  const Coefficients c = model.evaluate(t, x, fv);
  const auto du = static_cast<std::size_t>(d), q = static_cast<std::size_t>(model.noise_dim());
  std::vector<double> cov(du * du, 0.0);
  for (std::size_t a = 0; a < du; ++a)
    for (std::size_t e = 0; e < du; ++e)
      for (std::size_t r = 0; r < q; ++r) cov[a * du + e] += c.diffusion[a * q + r] * c.diffusion[e * q + r];
  return local_part(lyap, t, x, fv, c.drift, cov, d) + measure_part(lyap, t, x, fv, km);
}

std::vector<double> generator_values(const ModelSpec& model, const LyapunovSpec& lyap, double t,
                                     const EmpiricalMeasure& mu, int threads) {
  const auto fv = evaluate_functionals(model.functionals(), mu.samples(), model.dim(), threads);
  const CloudCoefficients cc = cloud_coefficients(model, t, mu, fv, threads);
  return values_with(model, lyap, t, mu, fv, cc, threads);
}

double integrated_generator(const ModelSpec& model, const LyapunovSpec& lyap, double t, const EmpiricalMeasure& mu,
                            int threads) {
  const auto vals = generator_values(model, lyap, t, mu, threads);
  return parallel_pairwise_sum(vals, threads) / static_cast<double>(vals.size());
}

double integrated_generator_reference(const ModelSpec& model, const LyapunovSpec& lyap, double t,
                                      const EmpiricalMeasure& mu) {
  const int d = model.dim();
  const auto du = static_cast<std::size_t>(d);
  const auto n = mu.size();
  const auto fv = evaluate_functionals(model.functionals(), mu.samples(), d);
  const CloudCoefficients cc = cloud_coefficients(model, t, mu, fv, 1);
  std::vector<double> outer(n), inner(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = mu.point(i);
    for (std::size_t j = 0; j < n; ++j) {
      const EvalPoint p{t, x, mu.point(j), fv};
      double acc = 0.0;
      for (std::size_t a = 0; a < lyap.dmu.size(); ++a) acc += cc.drift[j * du + a] * lyap.dmu[a].eval(p);
      for (std::size_t ac = 0; ac < lyap.dydmu.size(); ++ac)
        acc += 0.5 * cc.cov[j * du * du + ac] * lyap.dydmu[ac].eval(p);
      inner[j] = acc;
    }
    outer[i] = local_part(lyap, t, x, fv, std::span<const double>(cc.drift.data() + i * du, du),
                          std::span<const double>(cc.cov.data() + i * du * du, du * du), d) +
               pairwise_sum(inner) / static_cast<double>(n);
  }
  return pairwise_sum(outer) / static_cast<double>(n);
}

LyapunovReport check_lyapunov_condition(const ModelSpec& model, const LyapunovSpec& lyap,
                                        std::span<const LyapunovProbe> probes, double tolerance) {
  LyapunovReport rep;
  rep.mode = lyap.mode;
  rep.min_margin = std::numeric_limits<double>::infinity();
  const int d = model.dim();
  for (std::size_t id = 0; id < probes.size(); ++id) {
    const auto& probe = probes[id];
    const auto& mu = probe.mu;
    const auto n = mu.size();
    const auto fv = evaluate_functionals(model.functionals(), mu.samples(), d);
    const CloudCoefficients cc = cloud_coefficients(model, probe.t, mu, fv, 1);
    const auto gen = values_with(model, lyap, probe.t, mu, fv, cc, 1);
    std::vector<double> v(n), floor(n), growth(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = lyap.value(probe.t, mu.point(i), fv);
      floor[i] = lyap.floor.eval(EvalPoint{probe.t, mu.point(i), {}, {}});
      growth[i] = cc.b_norm[i] + cc.s_sq[i];
      if (v[i] < 0.0) {
        ++rep.negative_v;
        break;
      }
    }
    const double nd = static_cast<double>(n);
    const double v_mean = pairwise_sum(v) / nd;
    const double m1 = lyap.m1(probe.t), m2 = lyap.m2(probe.t);
    ProbeMargin pm;
    pm.id = id;
    pm.t = probe.t;
    if (lyap.mode == LyapunovMode::Integrated) {
      pm.lhs = pairwise_sum(gen) / nd;
      pm.rhs = m1 * v_mean + m2;
      pm.margin = pm.rhs - pm.lhs;
    } else {
      pm.margin = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        const double rhs = m1 * v[i] + m2;
        if (rhs - gen[i] < pm.margin) {
          pm.margin = rhs - gen[i];
          pm.lhs = gen[i];
          pm.rhs = rhs;
        }
      }
    }
    pm.growth_ratio = pairwise_sum(growth) / nd / (1.0 + v_mean);
    if (pairwise_sum(floor) / nd > v_mean + tolerance * (1.0 + std::abs(v_mean))) ++rep.floor_violations;
    rep.min_margin = std::min(rep.min_margin, pm.margin);
    rep.fitted_growth_constant = std::max(rep.fitted_growth_constant, pm.growth_ratio);
    rep.probes.push_back(pm);
  }
  if (probes.empty()) rep.min_margin = 0.0;
  rep.ok = rep.min_margin >= -tolerance && rep.floor_violations == 0 && rep.negative_v == 0;
  return rep;
}

namespace {

bool constant_rates(const LyapunovSpec& lyap) { return lyap.m1.is_constant() && lyap.m2.is_constant(); }

// Trapezoid grid shared by the general-rate envelopes.
struct Grid {
  std::size_t n;
  double h;
};

Grid make_grid(const LyapunovSpec& lyap, double t) {
  if (!(lyap.quadrature_step > 0.0)) throw InvalidArgument("quadrature step must be positive");
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(t / lyap.quadrature_step - 1e-9)));
  return {n, t / static_cast<double>(n)};
}

// Cumulative int_0^{s_i} f on the grid.
std::vector<double> cumulative(const Grid& g, const std::function<double(double)>& f) {
  std::vector<double> c(g.n + 1, 0.0);
  double prev = f(0.0);
  for (std::size_t i = 1; i <= g.n; ++i) {
    const double cur = f(static_cast<double>(i) * g.h);
    c[i] = c[i - 1] + 0.5 * g.h * (prev + cur);
    prev = cur;
  }
  return c;
}

}  // namespace

double gamma(const LyapunovSpec& lyap, double t) {
  if (t <= 0.0) return 1.0;
  if (lyap.m1.is_constant()) return std::exp(-lyap.m1(0.0) * t);
  const Grid g = make_grid(lyap, t);
  return std::exp(-cumulative(g, [&](double s) { return lyap.m1(s); }).back());
}

double envelope_M(const LyapunovSpec& lyap, double ev0, double t) {
  if (t <= 0.0) return ev0;
  if (constant_rates(lyap)) {
    const double m1 = lyap.m1(0.0), m2 = lyap.m2(0.0);
    if (m1 == 0.0) return ev0 + m2 * t;
    const double em1 = std::expm1(m1 * t);
    return ev0 * (1.0 + em1) + m2 * em1 / m1;
  }
  const Grid g = make_grid(lyap, t);
  const auto i1 = cumulative(g, [&](double s) { return lyap.m1(s); });
  const double total = i1.back();
  double acc = 0.0;
  for (std::size_t i = 0; i <= g.n; ++i) {
    const double s = static_cast<double>(i) * g.h;
    const double w = (i == 0 || i == g.n) ? 0.5 : 1.0;
    acc += w * g.h * std::exp(total - i1[i]) * lyap.m2(s);
  }
  return ev0 * std::exp(total) + acc;
}

double envelope_Mplus(const LyapunovSpec& lyap, double ev0, double t) {
  if (t <= 0.0) return ev0;
  if (constant_rates(lyap)) {
    const double m1 = lyap.m1(0.0), m2p = std::max(lyap.m2(0.0), 0.0);
    const double growth = std::exp(std::max(m1, 0.0) * t);
    const double weighted = m1 == 0.0 ? m2p * t : m2p * (-std::expm1(-m1 * t)) / m1;
    return growth * (ev0 + weighted);
  }
  const Grid g = make_grid(lyap, t);
  const auto i1 = cumulative(g, [&](double s) { return lyap.m1(s); });
  const auto i1p = cumulative(g, [&](double s) { return std::max(lyap.m1(s), 0.0); });
  double acc = 0.0;
  for (std::size_t i = 0; i <= g.n; ++i) {
    const double s = static_cast<double>(i) * g.h;
    const double w = (i == 0 || i == g.n) ? 0.5 : 1.0;
    acc += w * g.h * std::exp(-i1[i]) * std::max(lyap.m2(s), 0.0);
  }
  return std::exp(i1p.back()) * (ev0 + acc);
}

double exit_probability_bound(const LyapunovSpec& lyap, double ev0, double t, int level, double p0_out,
                              ExitBoundKind kind) {
  const double vm = lyap.boundary_infimum(level);
  if (!(vm > 0.0)) throw InvalidArgument("boundary infimum V_m must be positive");
  const double env = kind == ExitBoundKind::CutLevel ? envelope_M(lyap, ev0, t) : envelope_Mplus(lyap, ev0, t);
  return p0_out + env / vm;
}

}  // namespace mkv
