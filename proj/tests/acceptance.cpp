// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mkvlab/analysis.hpp"
#include "mkvlab/lions.hpp"
#include "mkvlab/mkvlab.h"
#include "mkvlab/noise.hpp"
#include "mkvlab/runner.hpp"
#include "mkvlab/scenarios.hpp"
#include "mkvlab/simulate.hpp"

using namespace mkv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::vector<std::string> notes;
};

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SimConfig example1_config(std::uint64_t seed, int steps_per_unit) {
  SimConfig c;
  c.particles = 10000;
  c.horizon = 5.0;
  c.steps_per_unit = steps_per_unit;
  c.checkpoint_every = steps_per_unit / 10;
  c.seed = seed;
  return c;
}

// Shared by criteria 1 and 2.
struct Example1Runs {
  std::vector<DiagnosticsSeries> fine;    // dt = 1e-3
  std::vector<DiagnosticsSeries> coarse;  // dt = 2e-3, same record times
};

const Example1Runs& example1_runs() {
  static const Example1Runs runs = [] {
    Example1Runs r;
    const auto s = builtin_scenario("example1-quartic");
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      r.fine.push_back(simulate(s.model, &s.lyapunov, example1_config(seed, 1000), InitialLaw::point_mass({1.0})));
      r.coarse.push_back(simulate(s.model, &s.lyapunov, example1_config(seed, 500), InitialLaw::point_mass({1.0})));
    }
    return r;
  }();
  return runs;
}

Outcome criterion1() {
  Outcome o;
  const auto& runs = example1_runs().fine;
  int passing = 0;
  double worst = -1e300;
  for (const auto& d : runs) {
    bool ok = true;
    for (std::size_t r = 0; r < d.records(); ++r) {
      const double t = d.t[r];
      const double M = std::exp(-t) + 4.0 * (1.0 - std::exp(-t));
      const double band = 3.0 * d.v_std[r] / std::sqrt(10000.0);
      const double m4 = d.functionals[r][0];
      worst = std::max(worst, m4 / (M * 1.1 + band));
      if (m4 > M * 1.1 + band) ok = false;
      if (std::abs(d.M[r] - M) > 1e-12 * M) ok = false;  // library envelope equals the closed form
    }
    passing += ok;
  }
  o.pass = passing == 10;
  o.notes.push_back(fmt("%d/10 seeds inside M(t) + 3 sigma + 10%%; largest m4 / allowance = %.4f", passing, worst));
  return o;
}

Outcome criterion2() {
  Outcome o;
  const auto& runs = example1_runs();
  const double dt = 1e-3;
  const std::size_t records = runs.fine.front().records();
  // C from the dt vs 2 dt difference, keeping only the part above its 3-sigma seed noise
  double C = 0.0, C_raw = 0.0;
  for (std::size_t r = 0; r < records; ++r) {
    std::vector<double> diff(10);
    double m = 0.0;
    for (std::size_t s = 0; s < 10; ++s) {
      diff[s] = runs.fine[s].functionals[r][0] - runs.coarse[s].functionals[r][0];
      m += diff[s] / 10.0;
    }
    double var = 0.0;
    for (double x : diff) var += (x - m) * (x - m) / 9.0;
    const double se = std::sqrt(var / 10.0);
    C_raw = std::max(C_raw, std::abs(m) / dt);
    C = std::max(C, std::max(0.0, std::abs(m) - 3.0 * se) / dt);
  }
  std::size_t band_fail = 0, checked = 0;
  double worst_excess = 0.0;
  double lo = 1e300, hi = -1e300;
  for (const auto& d : runs.fine) {
    for (std::size_t r = 0; r < d.records(); ++r) {
      const double exact = moment_ode_oracle(1.0, d.t[r]);
      const double err = std::abs(d.functionals[r][0] - exact);
      const double allow = 3.0 * d.v_std[r] / 100.0 + C * dt;
      ++checked;
      if (err > allow) {
        ++band_fail;
        worst_excess = std::max(worst_excess, err - allow);
      }
    }
    lo = std::min(lo, d.functionals.back()[0]);
    hi = std::max(hi, d.functionals.back()[0]);
  }
  const bool terminal = lo >= 0.70 && hi <= 0.80;
  o.pass = band_fail == 0 && terminal;
  o.notes.push_back(fmt("fitted C = %.4g from dt = 2e-3 vs 1e-3 (significant part; raw seed-mean gap / dt = %.4g)", C, C_raw));
  o.notes.push_back(fmt("band: %zu of %zu checkpoints outside, worst excess %.4g", band_fail, checked, worst_excess));
  o.notes.push_back(fmt("terminal m4(5) over seeds in [%.4f, %.4f], logistic value %.6f", lo, hi,
                        moment_ode_oracle(1.0, 5.0)));
  return o;
}

Outcome criterion3() {
  Outcome o;
  const auto s = builtin_scenario("example3-cir", {{"kappa", 1.0}, {"theta", 1.5}, {"sigma", 1.0}, {"alpha", 0.05}});
  SimConfig c;
  c.particles = 10000;
  c.horizon = 5.0;
  c.steps_per_unit = 1000;
  c.checkpoint_every = 100;
  c.seed = 1;
  c.cut_level = 20;
  c.exit_levels = {5, 10, 20};
  const auto d = simulate(s.model, &s.lyapunov, c, InitialLaw::point_mass({1.0}));
  bool ok = true;
  for (std::size_t l = 0; l < 3; ++l) {
    const int m = c.exit_levels[l];
    const double vm = m * m + 1.0 / (m * m);
    double worst = -1e300, last_frac = 0.0, last_bound = 0.0;
    for (std::size_t r = 0; r < d.records(); ++r) {
      const double bound = d.p0_out[l] + d.M[r] / vm;
      const double p = std::clamp(bound, 0.0, 1.0);
      const double allow = bound + 3.0 * std::sqrt(p * (1.0 - p) / 10000.0);
      worst = std::max(worst, d.exit_frac[r][l] - allow);
      if (d.exit_frac[r][l] > allow) ok = false;
      last_frac = d.exit_frac[r][l];
      last_bound = bound;
    }
    o.notes.push_back(fmt("m = %2d: exit fraction at T %.4g, bound %.4g, max(frac - allowance) %.4g", m, last_frac,
                          last_bound, worst));
  }
  o.pass = ok;
  return o;
}

Outcome criterion4() {
  Outcome o;
  o.pass = true;
  for (const char* name : {"example1-quartic", "example2-nonlinear", "example3-cir"}) {
    RunConfig c;
    c.experiment = "lyapunov-check";
    c.scenario = name;
    c.out = (fs::temp_directory_path() / "mkvlab_acceptance" / "c4" / name).string();
    c.lyapunov_probes = 50;
    const auto r = run_experiment(c);
    const double margin = r.code == kExitFailure || r.code == kExitConfig ? -1e300 : std::stod(r.summary.get("min_margin"));
    const bool ok = margin >= -1e-9 && r.code == kExitOk;
    o.pass = o.pass && ok;
    o.notes.push_back(fmt("%s: 50 probes, min margin %.6g%s", name, margin, ok ? "" : " (fails)"));
  }
  return o;
}

Outcome criterion5() {
  Outcome o;
  const auto s = builtin_scenario("linear-meanfield", {{"a", -1.0}, {"b", 0.0}, {"sigma", 1.0}});
  SimConfig c;
  c.particles = 1000;
  c.horizon = 5.0;
  c.steps_per_unit = 1000;
  c.checkpoint_every = 100;
  c.seed = 1;
  const auto cert = s.certificates.at(1);
  const auto rep = stability_experiment(s.model, Vbar::power(2.0), cert, c, InitialLaw::point_mass({0.0}),
                                        InitialLaw::point_mass({1.0}));
  double vs_exp = 0.0, vs_discrete = 0.0, min_margin = 1e300;
  for (std::size_t r = 0; r < rep.t.size(); ++r) {
    const double steps = std::round(rep.t[r] * 1000.0);
    vs_exp = std::max(vs_exp, std::abs(rep.measured[r] / std::exp(-2.0 * rep.t[r]) - 1.0));
    vs_discrete = std::max(vs_discrete, std::abs(rep.measured[r] / std::pow(1.0 - 1e-3, 2.0 * steps) - 1.0));
    min_margin = std::min(min_margin, rep.bound[r] - rep.measured[r]);
  }
  const bool bound_ok = min_margin >= -1e-12;
  o.pass = vs_exp <= 1e-9 && bound_ok;
  o.notes.push_back(fmt("max |measured / exp(-2t) - 1| = %.3e (target 1e-9)", vs_exp));
  o.notes.push_back(fmt("max |measured / (1 - dt)^(2i) - 1| = %.3e: noise cancels pathwise, the gap is Euler's", vs_discrete));
  o.notes.push_back(fmt("bound exponent %.3g, min(bound - measured) = %.3e", rep.exponent, min_margin));
  return o;
}

Outcome criterion6() {
  Outcome o;
  o.pass = true;
  for (const char* id : {"moment4", "example2-v"}) {
    const auto u = registry_function(id);
    double worst_ratio = 0.0;
    std::size_t dups = 0;
    bool ok = true;
    for (std::uint64_t p = 0; p < 50; ++p) {
      auto xs = InitialLaw::uniform_box({{-2.0, 2.0}}).sample(8, 1, 100 + p).x;
      xs[7] = xs[0];
      xs[6] = xs[3];
      const auto rep = check_structure(u, EmpiricalMeasure(xs, 1));
      dups += rep.duplicate_pairs;
      worst_ratio = std::max(worst_ratio, std::max(rep.max_analytic_deviation, rep.max_duplicate_deviation) / rep.tolerance);
      ok = ok && rep.ok;
    }
    o.pass = o.pass && ok;
    o.notes.push_back(fmt("%s: 50 clouds, %zu duplicate pairs, worst deviation / tolerance %.3g", id, dups, worst_ratio));
  }
  return o;
}

Outcome criterion7() {
  Outcome o;
  const auto s = builtin_scenario("example1-quartic");
  const auto u = registry_function("moment4");
  const std::size_t n = 2000;
  std::vector<double> mean_abs, mean_raw;
  bool bound_ok = true;
  for (int steps : {250, 500, 1000}) {
    double acc = 0.0, raw = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      SimConfig c;
      c.particles = n;
      c.horizon = 1.0;
      c.steps_per_unit = steps;
      c.checkpoint_every = steps;
      c.seed = seed;
      const auto res = ito_residual_measure(u, s.model, c, InitialLaw::point_mass({1.0}));
      acc += std::abs(res.compensated.back()) / 20.0;
      raw += std::abs(res.R.back()) / 20.0;
    }
    const double dt = 1.0 / steps;
    const double allow = 5.0 * (dt + 1.0 / std::sqrt(static_cast<double>(n)));
    bound_ok = bound_ok && acc <= allow;
    mean_abs.push_back(acc);
    mean_raw.push_back(raw);
    o.notes.push_back(fmt("dt = %.0e: mean |R(T)| compensated %.4e, uncompensated %.4e, allowance %.3g", dt, acc, raw,
                          allow));
  }
  const bool monotone = mean_abs[1] < mean_abs[0] && mean_abs[2] < mean_abs[1];
  o.pass = monotone && bound_ok;
  o.notes.push_back(std::string("compensated residual decreasing: ") + (monotone ? "yes" : "no"));
  return o;
}

Outcome criterion8() {
  Outcome o;
  const NoiseStream noise(2024);
  double worst = 0.0, worst_semi = 0.0;
  std::vector<double> a(8), b(8);
  for (std::uint64_t k = 0; k < 100; ++k) {
    noise.gaussian(k, 0, 1.5, a);
    noise.gaussian(k, 1, 1.5, b);
    const EmpiricalMeasure mu(a, 1), nu(b, 1);
    for (double p : {1.0, 2.0, 3.0}) {
      const double sorted = std::pow(wasserstein_p_1d(mu, nu, p), p);
      const double exact = wasserstein_exact(mu, nu, Vbar::power(p));
      worst = std::max(worst, std::abs(sorted - exact));
    }
    const double w2 = wasserstein_p_1d(mu, nu, 2.0);
    const auto semi = semi_wasserstein(mu, nu, Vbar::power(2.0));
    worst_semi = std::max(worst_semi, std::abs(semi.value - w2 * w2));
  }
  o.pass = worst <= 1e-9 && worst_semi <= 1e-9;
  o.notes.push_back(fmt("100 pairs, p in {1,2,3}: max |sorted - exact| = %.3e", worst));
  o.notes.push_back(fmt("max |W_vbar(x^2) - W_2^2| = %.3e", worst_semi));
  return o;
}

Outcome criterion9() {
  Outcome o;
  const auto s = builtin_scenario("example1-quartic");
  SimConfig c;
  c.particles = 10000;
  c.steps_per_unit = 1000;
  c.seed = 1;
  const auto rep = stationary_estimate(s.model, c, {10.0, 20.0, 40.0}, InitialLaw::point_mass({1.0}), &s.lyapunov, 100);
  const bool cauchy = rep.w1_gaps[1] < rep.w1_gaps[0];
  double worst = 0.0;
  for (std::size_t h = 0; h < 3; ++h) worst = std::max(worst, std::abs(rep.functionals[h][0] - 0.75));
  const bool m4_ok = std::abs(rep.functionals[2][0] - 0.75) <= 0.05;
  o.pass = cauchy && m4_ok;
  o.notes.push_back(fmt("W1(occ10, occ20) = %.4g, W1(occ20, occ40) = %.4g", rep.w1_gaps[0], rep.w1_gaps[1]));
  o.notes.push_back(fmt("occupation m4 at T = 10, 20, 40: %.4f, %.4f, %.4f", rep.functionals[0][0],
                        rep.functionals[1][0], rep.functionals[2][0]));
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Runs a config text through the C interface; returns the exit code.
int capi_run(const std::string& text, const std::string& out, int threads) {
  mkv_config* c = nullptr;
  if (mkv_config_parse(text.c_str(), &c) != MKV_OK) return -1;
  mkv_config_set(c, "out", out.c_str());
  mkv_config_set(c, "sim.threads", std::to_string(threads).c_str());
  mkv_result* r = nullptr;
  int code = -1;
  if (mkv_run(c, &r) == MKV_OK) code = mkv_result_exit_code(r);
  mkv_result_free(r);
  mkv_config_free(c);
  return code;
}

Outcome criterion10() {
  Outcome o;
  const std::vector<std::pair<std::string, std::string>> runs{
      {"simulate", "experiment = simulate\nsim.particles = 4000\nsim.horizon = 1\n"},
      {"simulate-cir-cut",
       "experiment = simulate\nscenario.name = example3-cir\nsim.particles = 3000\nsim.horizon = 1\nsim.cut_level = 10\n"
       "sim.substeps = 2\nsim.lag = kappa\nsim.steps_per_unit = 250\nsim.checkpoint_every = 25\n"},
      {"stability", "experiment = stability\nscenario.name = linear-meanfield\nscenario.b = 0.5\nsim.particles = 3000\n"
                    "sim.horizon = 1\ninit.kind = uniform\ninit.lo = -1\ninit.hi = 1\n"},
      {"scheutzow", "experiment = stability\nstability.probe = scheutzow\nscenario.name = scheutzow-clamp\n"
                    "sim.particles = 2000\nsim.horizon = 1\nsim.steps_per_unit = 200\nsim.checkpoint_every = 20\n"},
      {"stationary", "experiment = stationary\nscenario.name = linear-meanfield\nsim.particles = 2000\n"
                     "sim.steps_per_unit = 100\nstationary.horizons = 2, 4, 8\nstationary.checkpoints = 20\n"},
      {"lions-check", "experiment = lions-check\nscenario.name = example2-nonlinear\nlions.residual = full\n"
                      "sim.particles = 2000\nsim.horizon = 1\nsim.steps_per_unit = 200\nsim.checkpoint_every = 20\n"
                      "init.kind = uniform\ninit.lo = -1\ninit.hi = 1\n"},
      {"lions-measure", "experiment = lions-check\nlions.residual = measure\nsim.particles = 3000\nsim.horizon = 1\n"
                        "sim.steps_per_unit = 200\nsim.checkpoint_every = 20\n"},
      {"lyapunov-check", "experiment = lyapunov-check\nscenario.name = example3-cir\n"},
  };
  const fs::path root = fs::temp_directory_path() / "mkvlab_acceptance" / "c10";
  fs::remove_all(root);
  o.pass = true;
  std::size_t files = 0;
  for (const auto& [name, text] : runs) {
    const auto a = root / (name + "-t1"), b = root / (name + "-t8");
    const int ca = capi_run(text, a.string(), 1);
    const int cb = capi_run(text, b.string(), 8);
    bool same = ca == cb && ca >= 0 && ca != kExitConfig && ca != kExitFailure;
    std::size_t here = 0;
    if (same)
      for (const auto& f : fs::directory_iterator(a)) {
        if (f.path().extension() != ".csv") continue;
        ++here;
        same = same && slurp(f.path()) == slurp(b / f.path().filename());
      }
    same = same && here > 0;
    files += here;
    o.pass = o.pass && same;
    if (!same) o.notes.push_back(fmt("%s differs (exit codes %d / %d)", name.c_str(), ca, cb));
  }
  o.notes.push_back(fmt("%zu experiments, %zu CSV files compared byte for byte", runs.size(), files));
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"envelope domination, example1", criterion1},
      {"moment-ODE oracle agreement, example1", criterion2},
      {"exit-probability bound, example3-cir", criterion3},
      {"integrated Lyapunov margins, examples 1-3", criterion4},
      {"contraction equality case, linear-meanfield", criterion5},
      {"Lions structure and derivative", criterion6},
      {"Ito residual convergence, example1", criterion7},
      {"Wasserstein oracle equivalence", criterion8},
      {"stationarity, example1 occupation measures", criterion9},
      {"determinism across thread counts", criterion10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("CRITERION %2zu %s: %s (%.1fs)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), secs);
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
