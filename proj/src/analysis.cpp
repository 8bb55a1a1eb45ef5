#include "mkvlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mkvlab/error.hpp"
#include "mkvlab/reduce.hpp"

namespace mkv {

StabilityReport stability_experiment(const ModelSpec& model, const Vbar& vbar, const ContractionCertificate& cert,
                                     const SimConfig& cfg, const InitialLaw& init1, const InitialLaw& init2,
                                     double tolerance) {
  StabilityReport rep;
  rep.mode = cert.mode;
  rep.g = cert.g;
  rep.h = cert.h;
  rep.exponent = cert.exponent();
  rep.tolerance = tolerance;
  const auto coupled = coupled_simulate(model, cfg, init1, init2, vbar);
  rep.t = coupled.t;
  rep.measured = coupled.distance;
  const double root_n = std::sqrt(static_cast<double>(cfg.particles));
  const double start = coupled.distance.front();
  rep.margin = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < rep.t.size(); ++r) {
    const double sd = coupled.distance_std[r] / root_n;
    const double b = std::exp(rep.exponent * rep.t[r]) * start;
    rep.measured_sd.push_back(sd);
    rep.bound.push_back(b);
    rep.margin = std::min(rep.margin, b * (1.0 + tolerance) + 3.0 * sd - rep.measured[r]);
    if (b > 0.0) rep.max_relative_gap = std::max(rep.max_relative_gap, std::abs(rep.measured[r] / b - 1.0));
  }
  rep.pass = rep.margin >= 0.0;
  return rep;
}

namespace {

double w1(std::span<const double> a, std::span<const double> b, int dim) {
  const EmpiricalMeasure mu(a, dim), nu(b, dim);
  if (dim == 1) return wasserstein_p_1d(mu, nu, 1.0);
  return semi_wasserstein(mu, nu, Vbar::power(1.0)).value;
}

}  // namespace

ScheutzowReport scheutzow_probe(const ModelSpec& model, const SimConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                const InitialLaw& init, double transient) {
  if (seeds.size() < 2) throw InvalidArgument("the probe needs at least two replicas");
  cfg.validate();
  ScheutzowReport rep;
  rep.seeds = seeds;
  rep.threshold = 5.0 / std::sqrt(static_cast<double>(cfg.particles));
  std::vector<Simulation> reps;
  reps.reserve(seeds.size());
  for (auto seed : seeds) {
    SimConfig c = cfg;
    c.seed = seed;
    reps.emplace_back(model, c, init.sample(c.particles, model.dim(), seed));
  }
  auto record = [&] {
    double worst = 0.0;
    for (std::size_t r = 1; r < reps.size(); ++r)
      worst = std::max(worst, w1(reps[0].cloud().x, reps[r].cloud().x, model.dim()));
    rep.t.push_back(reps[0].cloud().t);
    rep.max_w1.push_back(worst);
    if (reps[0].cloud().t >= transient) rep.worst = std::max(rep.worst, worst);
  };
  record();
  const std::int64_t total = cfg.lag_intervals();
  for (std::int64_t i = 1; i <= total; ++i) {
    for (auto& s : reps) s.advance_lag_interval();
    if (i % cfg.checkpoint_every == 0 || i == total) record();
  }
  rep.pass = rep.worst <= rep.threshold;
  return rep;
}

StationaryReport stationary_estimate(const ModelSpec& model, const SimConfig& cfg, const std::vector<double>& horizons,
                                     const InitialLaw& init, const LyapunovSpec* lyap, std::size_t checkpoints,
                                     std::size_t max_points) {
  if (horizons.empty()) throw InvalidArgument("need at least one horizon");
  if (checkpoints < 1) throw InvalidArgument("need at least one checkpoint per horizon");
  for (std::size_t i = 1; i < horizons.size(); ++i)
    if (!(horizons[i] > horizons[i - 1])) throw InvalidArgument("horizons must be increasing");
  if (!(horizons.front() > 0.0)) throw InvalidArgument("horizons must be positive");
  SimConfig run = cfg;
  run.horizon = horizons.back();
  run.validate();
  const int dim = model.dim();
  const auto d = static_cast<std::size_t>(dim);
  const std::size_t n = cfg.particles;
  const std::size_t kept = std::max<std::size_t>(1, std::min(n, max_points / checkpoints));
  const std::size_t stride = n / kept;

  // lag index -> horizons that sample there
  std::map<std::int64_t, std::vector<std::size_t>> schedule;
  for (std::size_t hi = 0; hi < horizons.size(); ++hi) {
    for (std::size_t j = 1; j <= checkpoints; ++j) {
      const double steps = horizons[hi] * static_cast<double>(j) / static_cast<double>(checkpoints) * cfg.steps_per_unit;
      const auto idx = std::llround(steps);
      if (std::abs(steps - static_cast<double>(idx)) > 1e-6)
        throw InvalidArgument("occupation checkpoints must fall on the lag grid");
      schedule[idx].push_back(hi);
    }
  }

  StationaryReport rep;
  for (double hz : horizons) {
    OccupationMeasure occ;
    occ.horizon = hz;
    occ.checkpoints = checkpoints;
    occ.particles_kept = kept;
    occ.dim = dim;
    occ.samples.reserve(checkpoints * kept * d);
    rep.occupation.push_back(std::move(occ));
  }
  Simulation sim(model, run, init.sample(n, dim, run.seed));
  const std::int64_t total = run.lag_intervals();
  for (std::int64_t i = 1; i <= total; ++i) {
    sim.advance_lag_interval();
    auto it = schedule.find(i);
    if (it == schedule.end()) continue;
    for (std::size_t hi : it->second) {
      auto& s = rep.occupation[hi].samples;
      for (std::size_t p = 0; p < kept; ++p) {
        const auto pt = sim.cloud().point(p * stride);
        s.insert(s.end(), pt.begin(), pt.end());
      }
    }
  }
  for (std::size_t hi = 1; hi < horizons.size(); ++hi)
    rep.w1_gaps.push_back(w1(rep.occupation[hi - 1].samples, rep.occupation[hi].samples, dim));
  for (const auto& tag : model.functionals()) rep.functional_names.push_back(tag.column_name());
  for (const auto& occ : rep.occupation)
    rep.functionals.push_back(evaluate_functionals(model.functionals(), occ.samples, dim, sim.threads()));
  if (lyap) {
    const double step = horizons.back() / 256.0;
    for (int i = 0; i <= 256; ++i)
      if (lyap->m1(i * step) > 0.0) rep.envelope_warning = true;
  }
  return rep;
}

double moment_ode_oracle(double m0, double t) {
  if (!(m0 >= 0.0)) throw InvalidArgument("initial fourth moment must be >= 0");
  if (m0 == 0.0) return 0.0;
  return 3.0 * m0 / (4.0 * m0 + (3.0 - 4.0 * m0) * std::exp(-3.0 * t));
}

}  // namespace mkv
