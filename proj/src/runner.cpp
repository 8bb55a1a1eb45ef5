#include "mkvlab/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mkvlab/analysis.hpp"
#include "mkvlab/error.hpp"
#include "mkvlab/lions.hpp"
#include "mkvlab/lyapunov.hpp"
#include "mkvlab/noise.hpp"
#include "mkvlab/scenarios.hpp"
#include "mkvlab/simulate.hpp"

namespace mkv {

namespace {

namespace fs = std::filesystem;

std::string path_in(const RunConfig& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

double binomial_sd(double p, std::size_t n) {
  p = std::clamp(p, 0.0, 1.0);
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

void common_summary(Summary& s, const RunConfig& c) {
  s.set("experiment", c.experiment);
  s.set("scenario", c.scenario);
  for (const auto& [k, v] : c.params) s.set("scenario." + k, v);
  s.set("seed", static_cast<unsigned long long>(c.sim.seed));
  s.set("particles", static_cast<unsigned long long>(c.sim.particles));
  s.set("horizon", c.sim.horizon);
  s.set("dt", c.sim.step_size());
  s.set("tolerance", c.tolerance);
}

void finish(RunResult& r, const RunConfig& c, bool finding) {
  r.code = finding ? kExitFinding : kExitOk;
  r.summary.set("status", finding ? "finding" : "ok");
  r.summary.write(path_in(c, "summary.txt"));
}

RunResult cmd_simulate(const RunConfig& c) {
  RunResult r;
  const auto sc = builtin_scenario(c.scenario, c.params);
  const auto init = c.init.build(sc.model.dim());
  const auto d = simulate(sc.model, &sc.lyapunov, c.sim, init);
  const double root_n = std::sqrt(static_cast<double>(c.sim.particles));

  std::vector<std::string> header{"t"};
  for (const auto& n : d.functional_names) header.push_back(n);
  for (const char* n : {"v_mean", "M", "M_plus"}) header.push_back(n);
  for (int m : d.exit_levels) header.push_back("exit_frac_" + std::to_string(m));
  header.push_back("v_sup");
  header.push_back("v_std");
  for (int m : d.exit_levels) header.push_back("out_frac_" + std::to_string(m));
  for (int m : d.exit_levels) header.push_back("exit_bound_" + std::to_string(m));
  CsvTable table(header);

  std::size_t env_viol = 0, exit_viol = 0;
  double env_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < d.records(); ++i) {
    std::vector<Cell> row{d.t[i]};
    for (double f : d.functionals[i]) row.emplace_back(f);
    row.emplace_back(d.v_mean[i]);
    row.emplace_back(d.M[i]);
    row.emplace_back(d.M_plus[i]);
    for (double e : d.exit_frac[i]) row.emplace_back(e);
    row.emplace_back(d.v_sup[i]);
    row.emplace_back(d.v_std[i]);
    for (double e : d.out_frac[i]) row.emplace_back(e);
    for (double e : d.exit_bound[i]) row.emplace_back(e);
    table.add_row(std::move(row));

    const double margin = d.M[i] * (1.0 + c.tolerance) + 3.0 * d.v_std[i] / root_n - d.v_mean[i];
    env_margin = std::min(env_margin, margin);
    if (margin < 0.0) ++env_viol;
    for (std::size_t l = 0; l < d.exit_levels.size(); ++l) {
      const double frac = d.bound_on_exit(l) ? d.exit_frac[i][l] : d.out_frac[i][l];
      const double b = d.exit_bound[i][l];
      if (frac > b * (1.0 + c.tolerance) + 3.0 * binomial_sd(std::min(1.0, b), c.sim.particles)) ++exit_viol;
    }
  }
  table.write(path_in(c, "diagnostics.csv"));

  common_summary(r.summary, c);
  r.summary.set("records", static_cast<unsigned long long>(d.records()));
  r.summary.set("ev0", d.ev0);
  r.summary.set("mode", d.mode == LyapunovMode::Pointwise ? "pointwise" : "integrated");
  for (std::size_t k = 0; k < d.functional_names.size(); ++k)
    r.summary.set("final." + d.functional_names[k], d.functionals.back()[k]);
  r.summary.set("final.v_mean", d.v_mean.back());
  r.summary.set("final.M", d.M.back());
  r.summary.set("envelope_min_margin", env_margin);
  r.summary.set("envelope_violations", static_cast<unsigned long long>(env_viol));
  r.summary.set("exit_violations", static_cast<unsigned long long>(exit_viol));
  std::ostringstream rep;
  rep << "simulate " << c.scenario << ": " << d.records() << " records, envelope violations " << env_viol
      << ", exit-bound violations " << exit_viol << "\n";
  r.report = rep.str();
  finish(r, c, env_viol + exit_viol > 0);
  return r;
}

RunResult cmd_stability(const RunConfig& c) {
  RunResult r;
  const auto sc = builtin_scenario(c.scenario, c.params);
  common_summary(r.summary, c);
  std::ostringstream rep;
  bool finding = false;
  if (c.stability_probe == "scheutzow") {
    const auto p = scheutzow_probe(sc.model, c.sim, c.stability_seeds, c.init.build(sc.model.dim()),
                                   c.stability_transient);
    CsvTable t({"t", "max_w1", "threshold"});
    for (std::size_t i = 0; i < p.t.size(); ++i) t.add_row({p.t[i], p.max_w1[i], p.threshold});
    t.write(path_in(c, "scheutzow.csv"));
    r.summary.set("probe", "scheutzow");
    r.summary.set("replicas", static_cast<unsigned long long>(p.seeds.size()));
    r.summary.set("worst_w1", p.worst);
    r.summary.set("threshold", p.threshold);
    r.summary.set("pass", p.pass);
    rep << "scheutzow probe: worst W1 " << p.worst << " vs " << p.threshold << (p.pass ? " ok" : " FINDING") << "\n";
    finding = !p.pass;
  } else {
    if (sc.certificates.empty()) throw InvalidArgument("scenario '" + c.scenario + "' ships no contraction certificate");
    const auto init1 = c.init.build(sc.model.dim());
    const auto init2 = c.init2.build(sc.model.dim());
    CsvTable t({"certificate", "t", "measured", "measured_sd", "bound"});
    r.summary.set("probe", "contraction");
    r.summary.set("vbar_power", c.stability_vbar_power);
    int used = 0;
    for (const auto& cert : sc.certificates) {
      const std::string name = cert.mode == LyapunovMode::Pointwise ? "pointwise" : "integrated";
      if (c.stability_certificate != "all" && c.stability_certificate != name) continue;
      ++used;
      const auto s = stability_experiment(sc.model, Vbar::power(c.stability_vbar_power), cert, c.sim, init1, init2,
                                          c.tolerance);
      for (std::size_t i = 0; i < s.t.size(); ++i) t.add_row({name, s.t[i], s.measured[i], s.measured_sd[i], s.bound[i]});
      r.summary.set(name + ".g", s.g);
      r.summary.set(name + ".h", s.h);
      r.summary.set(name + ".exponent", s.exponent);
      r.summary.set(name + ".margin", s.margin);
      r.summary.set(name + ".max_relative_gap", s.max_relative_gap);
      r.summary.set(name + ".pass", s.pass);
      rep << name << " certificate: exponent " << s.exponent << ", margin " << s.margin << ", max |measured/bound-1| "
          << s.max_relative_gap << (s.pass ? " ok" : " FINDING") << "\n";
      finding = finding || !s.pass;
    }
    if (used == 0) throw InvalidArgument("scenario has no " + c.stability_certificate + " certificate");
    t.write(path_in(c, "stability.csv"));
  }
  r.report = rep.str();
  finish(r, c, finding);
  return r;
}

RunResult cmd_stationary(const RunConfig& c) {
  RunResult r;
  const auto sc = builtin_scenario(c.scenario, c.params);
  const auto s = stationary_estimate(sc.model, c.sim, c.stationary_horizons, c.init.build(sc.model.dim()),
                                     &sc.lyapunov, c.stationary_checkpoints, c.stationary_max_points);
  std::vector<std::string> header{"horizon", "checkpoints", "particles_kept"};
  for (const auto& n : s.functional_names) header.push_back(n);
  header.push_back("w1_to_previous");
  CsvTable t(header);
  bool decreasing = true;
  for (std::size_t h = 0; h < s.occupation.size(); ++h) {
    const auto& o = s.occupation[h];
    std::vector<Cell> row{o.horizon, static_cast<unsigned long long>(o.checkpoints),
                          static_cast<unsigned long long>(o.particles_kept)};
    for (double f : s.functionals[h]) row.emplace_back(f);
    row.emplace_back(h == 0 ? std::string() : format_double(s.w1_gaps[h - 1]));
    t.add_row(std::move(row));
    if (h >= 2 && !(s.w1_gaps[h - 1] < s.w1_gaps[h - 2])) decreasing = false;
  }
  t.write(path_in(c, "stationary.csv"));
  common_summary(r.summary, c);
  for (std::size_t k = 0; k < s.functional_names.size(); ++k)
    r.summary.set("occupation." + s.functional_names[k], s.functionals.back()[k]);
  for (std::size_t g = 0; g < s.w1_gaps.size(); ++g) r.summary.set("w1_gap." + std::to_string(g), s.w1_gaps[g]);
  r.summary.set("gaps_decreasing", decreasing);
  r.summary.set("envelope_warning", s.envelope_warning);
  r.summary.set("caveat", "Feller continuity is assumed, not tested");
  std::ostringstream rep;
  rep << "stationary: " << s.occupation.size() << " horizons, W1 gaps" << (decreasing ? " decreasing" : " NOT decreasing")
      << "\n";
  if (s.envelope_warning) rep << "warning: m1 > 0 somewhere, the envelope may diverge\n";
  r.report = rep.str();
  finish(r, c, !decreasing);
  return r;
}

std::vector<double> probe_cloud(const DomainLadder& ladder, std::size_t n, double scale, std::uint64_t seed,
                                std::uint64_t probe) {
  const int dim = ladder.dim();
  const NoiseStream noise(seed, 7);
  std::vector<double> out(n * static_cast<std::size_t>(dim));
  std::vector<double> g(static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    noise.gaussian(i, probe, scale, g);
    for (int a = 0; a < dim; ++a) {
      const Interval dom = ladder.domain()[static_cast<std::size_t>(a)];
      double x = g[static_cast<std::size_t>(a)];
      if (std::isfinite(dom.lo) && std::isfinite(dom.hi))
        x = dom.lo + (dom.hi - dom.lo) / (1.0 + std::exp(-x));
      else if (std::isfinite(dom.lo))
        x = dom.lo + std::exp(x);
      else if (std::isfinite(dom.hi))
        x = dom.hi - std::exp(x);
      out[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(a)] = x;
    }
  }
  return out;
}

RunResult cmd_lions(const RunConfig& c) {
  RunResult r;
  common_summary(r.summary, c);
  CsvTable t({"function", "probe", "h", "max_analytic_deviation", "max_duplicate_deviation", "tolerance", "ok"});
  std::ostringstream rep;
  bool finding = false;
  for (const auto& id : c.lions_functions) {
    const auto u = registry_function(id);
    double worst = 0.0, worst_ratio = 0.0;
    bool ok = true;
    for (std::size_t p = 0; p < c.lions_probes; ++p) {
      auto xs = probe_cloud(DomainLadder::full_space(u.dim), c.lions_particles, 1.0, c.sim.seed, p);
      // a duplicated atom in every probe
      const auto d = static_cast<std::size_t>(u.dim);
      if (c.lions_particles >= 2)
        for (std::size_t a = 0; a < d; ++a) xs[xs.size() - d + a] = xs[a];
      const EmpiricalMeasure mu(xs, u.dim);
      const auto s = check_structure(u, mu);
      t.add_row({id, static_cast<unsigned long long>(p), s.h, s.max_analytic_deviation, s.max_duplicate_deviation,
                 s.tolerance, s.ok});
      worst = std::max({worst, s.max_analytic_deviation, s.max_duplicate_deviation});
      worst_ratio = std::max(worst_ratio, std::max(s.max_analytic_deviation, s.max_duplicate_deviation) / s.tolerance);
      ok = ok && s.ok;
    }
    r.summary.set(id + ".max_deviation", worst);
    r.summary.set(id + ".max_deviation_over_tolerance", worst_ratio);
    r.summary.set(id + ".ok", ok);
    rep << id << ": max FD deviation " << worst << " (" << worst_ratio << " of tolerance)" << (ok ? "" : " FINDING")
        << "\n";
    finding = finding || !ok;
  }
  t.write(path_in(c, "lions.csv"));

  if (c.lions_residual != "none") {
    const auto sc = builtin_scenario(c.scenario, c.params);
    const auto init = c.init.build(sc.model.dim());
    ResidualSeries res;
    if (c.lions_residual == "measure") {
      if (c.lions_functions.empty()) throw InvalidArgument("measure residual needs a function in lions.functions");
      res = ito_residual_measure(registry_function(c.lions_functions.front()), sc.model, c.sim, init);
    } else {
      res = ito_residual_full(sc.lyapunov, sc.model, c.sim, init);
    }
    CsvTable rt({"t", "value", "R", "compensated", "band"});
    std::size_t outside = 0;
    for (std::size_t i = 0; i < res.t.size(); ++i) {
      rt.add_row({res.t[i], res.value[i], res.R[i], res.compensated[i], res.band[i]});
      if (std::abs(res.compensated[i]) > res.band[i]) ++outside;
    }
    rt.write(path_in(c, "residual.csv"));
    r.summary.set("residual.kind", c.lions_residual);
    r.summary.set("residual.final_R", res.R.back());
    r.summary.set("residual.final_compensated", res.compensated.back());
    r.summary.set("residual.final_band", res.band.back());
    r.summary.set("residual.outside_band", static_cast<unsigned long long>(outside));
    rep << "Ito residual (" << c.lions_residual << "): final compensated " << res.compensated.back() << ", band "
        << res.band.back() << ", " << outside << " checkpoints outside the band\n";
  }
  r.report = rep.str();
  finish(r, c, finding);
  return r;
}

RunResult cmd_lyapunov(const RunConfig& c) {
  RunResult r;
  const auto sc = builtin_scenario(c.scenario, c.params);
  std::vector<LyapunovProbe> probes;
  for (std::size_t p = 0; p < c.lyapunov_probes; ++p) {
    const double scale = c.lyapunov_probe_scale * (1.0 + 0.1 * static_cast<double>(p));
    const double t = c.lyapunov_probes > 1 ? c.sim.horizon * static_cast<double>(p) / static_cast<double>(c.lyapunov_probes - 1) : 0.0;
    probes.push_back({t, EmpiricalMeasure::owning(probe_cloud(sc.model.ladder(), c.lyapunov_probe_particles, scale,
                                                             c.sim.seed, p),
                                                 sc.model.dim())});
  }
  const auto rep_l = check_lyapunov_condition(sc.model, sc.lyapunov, probes);
  CsvTable t({"probe", "t", "lhs", "rhs", "margin", "growth_ratio"});
  for (const auto& p : rep_l.probes)
    t.add_row({static_cast<unsigned long long>(p.id), p.t, p.lhs, p.rhs, p.margin, p.growth_ratio});
  t.write(path_in(c, "lyapunov.csv"));
  common_summary(r.summary, c);
  r.summary.set("mode", rep_l.mode == LyapunovMode::Pointwise ? "pointwise" : "integrated");
  r.summary.set("probes", static_cast<unsigned long long>(rep_l.probes.size()));
  r.summary.set("min_margin", rep_l.min_margin);
  r.summary.set("fitted_growth_constant", rep_l.fitted_growth_constant);
  r.summary.set("floor_violations", static_cast<unsigned long long>(rep_l.floor_violations));
  r.summary.set("negative_v", static_cast<unsigned long long>(rep_l.negative_v));
  r.summary.set("ok", rep_l.ok);
  std::ostringstream rep;
  rep << "lyapunov-check " << c.scenario << ": " << rep_l.probes.size() << " probes, min margin " << rep_l.min_margin
      << ", floor violations " << rep_l.floor_violations << (rep_l.ok ? " ok" : " FINDING") << "\n";
  r.report = rep.str();
  finish(r, c, !rep_l.ok);
  return r;
}

template <class F>
RunResult guarded(F&& f) {
  RunResult r;
  try {
    return f();
  } catch (const ConfigError& e) {
    r.code = kExitConfig;
    r.message = e.what();
  } catch (const InvalidArgument& e) {
    r.code = kExitConfig;
    r.message = e.what();
  } catch (const NumericalError& e) {
    r.code = kExitBlowUp;
    r.message = e.what();
  } catch (const std::exception& e) {
    r.code = kExitFailure;
    r.message = e.what();
  }
  return r;
}

}  // namespace

RunResult run_experiment(const RunConfig& c) {
  return guarded([&] {
    if (c.experiment == "wasserstein") throw InvalidArgument("wasserstein takes two sample files, not a config");
    if (!(c.tolerance >= 0.0)) throw InvalidArgument("tolerance must be >= 0");
    fs::create_directories(c.out);
    if (c.experiment == "simulate") return cmd_simulate(c);
    if (c.experiment == "stability") return cmd_stability(c);
    if (c.experiment == "stationary") return cmd_stationary(c);
    if (c.experiment == "lions-check") return cmd_lions(c);
    if (c.experiment == "lyapunov-check") return cmd_lyapunov(c);
    throw InvalidArgument("unknown experiment '" + c.experiment + "'");
  });
}

int sample_file_dim(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read sample file " + path);
  std::string line;
  while (std::getline(f, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream in(line);
    std::string tok;
    int n = 0;
    while (in >> tok) ++n;
    if (n > 0) return n;
  }
  throw ConfigError("sample file " + path + " has no data");
}

RunResult run_wasserstein(const std::string& file_a, const std::string& file_b, double p, const std::string& out_dir) {
  return guarded([&] {
    if (!(p >= 1.0)) throw InvalidArgument("power must be >= 1");
    const int dim = sample_file_dim(file_a);
    const auto a = read_samples(file_a, dim);
    const auto b = read_samples(file_b, dim);
    const EmpiricalMeasure mu(a, dim), nu(b, dim);
    if (mu.size() != nu.size()) throw InvalidArgument("sample files must have the same number of points");
    const auto w = semi_wasserstein(mu, nu, Vbar::power(p));
    RunResult r;
    r.summary.set("experiment", "wasserstein");
    r.summary.set("dim", dim);
    r.summary.set("points", static_cast<unsigned long long>(mu.size()));
    r.summary.set("power", p);
    r.summary.set("cost", w.value);
    r.summary.set("distance", std::pow(w.value, 1.0 / p));
    r.summary.set("upper_bound", w.upper_bound);
    r.report = r.summary.str();
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      r.summary.write((fs::path(out_dir) / "summary.txt").string());
    }
    return r;
  });
}

}  // namespace mkv
