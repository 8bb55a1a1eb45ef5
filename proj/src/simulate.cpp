#include "mkvlab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mkvlab/error.hpp"
#include "mkvlab/reduce.hpp"

namespace mkv {

void SimConfig::validate() const {
  if (particles < 1) throw InvalidArgument("particle count must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be finite and >= 0");
  if (steps_per_unit < 1) throw InvalidArgument("steps per unit must be positive");
  if (substeps < 1) throw InvalidArgument("substeps must be positive");
  if (cut_level < 0) throw InvalidArgument("cut level must be >= 0 (0 = no cut)");
  if (checkpoint_every < 1) throw InvalidArgument("checkpoint interval must be positive");
  if (threads < 0) throw InvalidArgument("thread count must be >= 0");
  for (std::size_t l = 0; l < exit_levels.size(); ++l) {
    if (exit_levels[l] < 1) throw InvalidArgument("exit levels must be >= 1");
    if (l > 0 && exit_levels[l] <= exit_levels[l - 1]) throw InvalidArgument("exit levels must be strictly increasing");
    if (cut_level > 0 && exit_levels[l] > cut_level) throw InvalidArgument("exit levels must not exceed the cut level");
  }
  (void)lag_intervals();
}

std::int64_t SimConfig::lag_intervals() const {
  const double steps = horizon * steps_per_unit;
  const auto rounded = std::llround(steps);
  if (std::abs(steps - static_cast<double>(rounded)) > 1e-9 * std::max(1.0, steps))
    throw InvalidArgument("horizon must be a multiple of 1/n");
  return rounded;
}

double kappa(int n, double t) {
  const double nt = static_cast<double>(n) * t;
  double i = std::floor(nt);
  // Grid points computed in floating point should map to themselves.
  if (std::abs(nt - (i + 1.0)) < 1e-9) i += 1.0;
  return i / static_cast<double>(n);
}

void ParticleCloud::record_exits(const DomainLadder& ladder) {
  const std::size_t n = size();
  for (std::size_t l = 0; l < exit_levels.size(); ++l) {
    auto& rec = first_exit[l];
    for (std::size_t i = 0; i < n; ++i)
      if (rec[i] < 0 && !ladder.in_level(exit_levels[l], point(i))) rec[i] = step;
  }
}

double ParticleCloud::exit_fraction(std::size_t level_index) const {
  const auto& rec = first_exit.at(level_index);
  const auto hits = std::count_if(rec.begin(), rec.end(), [](std::int64_t s) { return s >= 0; });
  return static_cast<double>(hits) / static_cast<double>(rec.size());
}

InitialLaw InitialLaw::point_mass(std::vector<double> x) {
  if (x.empty()) throw InvalidArgument("point mass needs a point");
  InitialLaw law;
  law.kind = Kind::PointMass;
  law.point = std::move(x);
  return law;
}

InitialLaw InitialLaw::uniform_box(std::vector<Interval> box) {
  if (box.empty()) throw InvalidArgument("uniform law needs a box");
  for (const auto& b : box)
    if (!(std::isfinite(b.lo) && std::isfinite(b.hi) && b.lo <= b.hi)) throw InvalidArgument("uniform box needs finite lo <= hi");
  InitialLaw law;
  law.kind = Kind::UniformBox;
  law.box = std::move(box);
  return law;
}

InitialLaw InitialLaw::from_samples(std::vector<double> samples, int dim) {
  if (dim < 1 || samples.empty() || samples.size() % static_cast<std::size_t>(dim) != 0)
    throw InvalidArgument("sample array must be a nonempty M x d block");
  for (double v : samples)
    if (!std::isfinite(v)) throw InvalidArgument("initial samples must be finite");
  InitialLaw law;
  law.kind = Kind::Samples;
  law.samples = std::move(samples);
  law.point.assign(static_cast<std::size_t>(dim), 0.0);
  return law;
}

InitialLaw InitialLaw::from_file(const std::string& path, int dim) { return from_samples(read_samples(path, dim), dim); }

int InitialLaw::dim() const {
  switch (kind) {
    case Kind::PointMass: return static_cast<int>(point.size());
    case Kind::UniformBox: return static_cast<int>(box.size());
    case Kind::Samples: return static_cast<int>(point.size());
  }
  return 0;
}

ParticleCloud InitialLaw::sample(std::size_t n, int dim, std::uint64_t seed) const {
  if (this->dim() != dim) throw InvalidArgument("initial law dimension does not match the model");
  ParticleCloud c;
  c.dim = dim;
  const auto d = static_cast<std::size_t>(dim);
  c.x.resize(n * d);
  switch (kind) {
    case Kind::PointMass:
      for (std::size_t i = 0; i < n; ++i) std::copy(point.begin(), point.end(), c.x.begin() + static_cast<long>(i * d));
      break;
    case Kind::UniformBox: {
      const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed),
                                             static_cast<std::uint32_t>(seed >> 32) ^ 0x243F6A88u};
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a) {
          const auto r = philox4x32({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32),
                                     static_cast<std::uint32_t>(a), 0xFFFFFFFFu},
                                    key);
          const double u = (static_cast<double>(r[0]) + 0.5) * 0x1.0p-32;
          c.x[i * d + a] = box[a].lo + u * (box[a].hi - box[a].lo);
        }
      break;
    }
    case Kind::Samples: {
      const std::size_t m = samples.size() / d;
      for (std::size_t i = 0; i < n; ++i)
        std::copy_n(samples.begin() + static_cast<long>((i % m) * d), d, c.x.begin() + static_cast<long>(i * d));
      break;
    }
  }
  return c;
}

std::vector<double> read_samples(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sample file '" + path + "'");
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || !std::isfinite(v))
        throw ConfigError("bad number '" + tok + "' in " + path, lineno);
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (static_cast<int>(row.size()) != dim)
      throw ConfigError("expected " + std::to_string(dim) + " values per line in " + path, lineno);
    out.insert(out.end(), row.begin(), row.end());
  }
  if (out.empty()) throw ConfigError("sample file '" + path + "' has no samples");
  return out;
}

std::vector<double> cloud_functionals(const ParticleCloud& cloud, const ModelSpec& model, int threads) {
  return evaluate_functionals(model.functionals(), cloud.x, cloud.dim, threads);
}

void euler_step(ParticleCloud& cloud, const ModelSpec& model, const SimConfig& cfg, const NoiseStream& noise,
                double t_arg, std::span<const double> x_arg, std::span<const double> fv, int threads,
                StepTrace* trace) {
  const std::size_t n = cloud.size();
  const auto d = static_cast<std::size_t>(cloud.dim);
  const auto q = static_cast<std::size_t>(model.noise_dim());
  if (cloud.dim != model.dim()) throw InvalidArgument("cloud dimension does not match the model");
  if (!x_arg.empty() && x_arg.size() != cloud.x.size()) throw InvalidArgument("lag snapshot has the wrong size");
  const double h = cfg.step_size();
  const double sqh = std::sqrt(h);
  const auto cut = cfg.cut();
  if (trace) {
    trace->drift.assign(n * d, 0.0);
    trace->diffusion.assign(n * d * q, 0.0);
    trace->dw.assign(n * q, 0.0);
  }
  const std::int64_t step = cloud.step;
  std::int64_t bad = -1;
  std::string why;
  const long nl = static_cast<long>(n);
#pragma omp parallel num_threads(threads)
  {
    std::vector<double> b(d), sig(d * q), dw(q), xa(d);
#pragma omp for schedule(static)
    for (long il = 0; il < nl; ++il) {
      const auto i = static_cast<std::size_t>(il);
      auto x = cloud.point(i);
      if (x_arg.empty())
        std::copy(x.begin(), x.end(), xa.begin());
      else
        std::copy_n(x_arg.begin() + static_cast<long>(i * d), d, xa.begin());
      if (!model.active(xa, cut)) continue;
      try {
        model.evaluate(t_arg, xa, fv, cut, b, sig);
      } catch (const std::exception& ex) {
#pragma omp critical(mkv_step_fail)
        if (bad < 0 || il < bad) {
          bad = il;
          why = ex.what();
        }
        continue;
      }
      noise.gaussian(i, static_cast<std::uint64_t>(step), sqh, dw);
      bool finite = true;
      for (std::size_t a = 0; a < d; ++a) {
        double inc = b[a] * h;
        for (std::size_t r = 0; r < q; ++r) inc += sig[a * q + r] * dw[r];
        x[a] += inc;
        finite = finite && std::isfinite(x[a]);
      }
      if (trace) {
        std::copy(b.begin(), b.end(), trace->drift.begin() + static_cast<long>(i * d));
        std::copy(sig.begin(), sig.end(), trace->diffusion.begin() + static_cast<long>(i * d * q));
        std::copy(dw.begin(), dw.end(), trace->dw.begin() + static_cast<long>(i * q));
      }
      if (!finite) {
#pragma omp critical(mkv_step_fail)
        if (bad < 0 || il < bad) {
          bad = il;
          why = "non-finite position for particle " + std::to_string(i);
        }
      }
    }
  }
  if (bad >= 0) throw NumericalError("model '" + model.name() + "': " + why, step);
  ++cloud.step;
  cloud.t = static_cast<double>(cloud.step) / (static_cast<double>(cfg.steps_per_unit) * cfg.substeps);
  cloud.record_exits(model.ladder());
}

Simulation::Simulation(const ModelSpec& model, SimConfig cfg, ParticleCloud init, std::uint32_t stream)
    : model_(model), cfg_(std::move(cfg)), cloud_(std::move(init)), noise_(cfg_.seed, stream) {
  cfg_.validate();
  if (cloud_.dim != model_.dim()) throw InvalidArgument("initial cloud dimension does not match the model");
  if (cloud_.size() != cfg_.particles) throw InvalidArgument("initial cloud size does not match the particle count");
  for (double v : cloud_.x)
    if (!std::isfinite(v)) throw InvalidArgument("initial positions must be finite");
  threads_ = resolve_threads(cfg_.threads);
  cloud_.exit_levels = cfg_.exit_levels;
  cloud_.first_exit.assign(cfg_.exit_levels.size(), std::vector<std::int64_t>(cloud_.size(), -1));
  cloud_.step = 0;
  cloud_.t = 0.0;
  cloud_.record_exits(model_.ladder());
}

namespace {

struct NoHook {
  void before(const ParticleCloud&, double, std::span<const double>) {}
  void after(const ParticleCloud&, const StepTrace&) {}
};

double sample_std(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = (v[i] - mean) * (v[i] - mean);
  return std::sqrt(pairwise_sum(dev) / static_cast<double>(v.size() - 1));
}

class Recorder {
 public:
  Recorder(const ModelSpec& model, const LyapunovSpec* lyap, const SimConfig& cfg) : model_(model), lyap_(lyap) {
    s_.exit_levels = cfg.exit_levels;
    s_.cut_level = cfg.cut_level;
    s_.has_lyapunov = lyap != nullptr;
    if (lyap) s_.mode = lyap->mode;
    for (const auto& tag : model.functionals()) s_.functional_names.push_back(tag.column_name());
  }

  void record(const ParticleCloud& c, int threads) {
    const auto fv = cloud_functionals(c, model_, threads);
    const std::size_t n = c.size();
    const bool first = s_.t.empty();
    s_.t.push_back(c.t);
    s_.functionals.push_back(fv);
    std::vector<double> ef, of;
    for (std::size_t l = 0; l < s_.exit_levels.size(); ++l) {
      ef.push_back(c.exit_fraction(l));
      std::size_t outside = 0;
      for (std::size_t i = 0; i < n; ++i) outside += model_.ladder().in_level(s_.exit_levels[l], c.point(i)) ? 0 : 1;
      of.push_back(static_cast<double>(outside) / static_cast<double>(n));
    }
    if (first) s_.p0_out = ef;
    s_.exit_frac.push_back(ef);
    s_.out_frac.push_back(of);
    if (!lyap_) return;
    std::vector<double> v(n);
    const long nl = static_cast<long>(n);
#pragma omp parallel for num_threads(threads) schedule(static)
    for (long i = 0; i < nl; ++i) v[static_cast<std::size_t>(i)] = lyap_->value(c.t, c.point(static_cast<std::size_t>(i)), fv);
    const double vm = parallel_pairwise_sum(v, threads) / static_cast<double>(n);
    if (first) s_.ev0 = vm;
    s_.v_mean.push_back(vm);
    s_.v_sup.push_back(first ? vm : std::max(s_.v_sup.back(), vm));
    s_.v_std.push_back(sample_std(v, vm));
    s_.M.push_back(envelope_M(*lyap_, s_.ev0, c.t));
    s_.M_plus.push_back(envelope_Mplus(*lyap_, s_.ev0, c.t));
    std::vector<double> eb;
    for (std::size_t l = 0; l < s_.exit_levels.size(); ++l) {
      const int m = s_.exit_levels[l];
      if (m == s_.cut_level)
        eb.push_back(exit_probability_bound(*lyap_, s_.ev0, c.t, m, s_.p0_out[l], ExitBoundKind::CutLevel));
      else if (lyap_->mode == LyapunovMode::Pointwise)
        eb.push_back(exit_probability_bound(*lyap_, s_.ev0, c.t, m, s_.p0_out[l], ExitBoundKind::SubLevel));
      else
        eb.push_back(exit_probability_bound(*lyap_, s_.ev0, c.t, m, 0.0, ExitBoundKind::CutLevel));
    }
    s_.exit_bound.push_back(eb);
  }

  DiagnosticsSeries take() { return std::move(s_); }

 private:
  const ModelSpec& model_;
  const LyapunovSpec* lyap_;
  DiagnosticsSeries s_;
};

bool checkpoint_due(std::int64_t done, std::int64_t total, int every) { return done % every == 0 || done == total; }

}  // namespace

void Simulation::advance_lag_interval() {
  NoHook hook;
  advance_lag_interval(hook);
}

bool DiagnosticsSeries::bound_on_exit(std::size_t level_index) const {
  return exit_levels.at(level_index) == cut_level || mode == LyapunovMode::Pointwise;
}

DiagnosticsSeries simulate(const ModelSpec& model, const LyapunovSpec* lyap, const SimConfig& cfg,
                           const InitialLaw& init) {
  cfg.validate();
  return simulate(model, lyap, cfg, init.sample(cfg.particles, model.dim(), cfg.seed), nullptr);
}

DiagnosticsSeries simulate(const ModelSpec& model, const LyapunovSpec* lyap, const SimConfig& cfg,
                           ParticleCloud init, ParticleCloud* final_cloud) {
  if (lyap) lyap->validate(model);
  Simulation sim(model, cfg, std::move(init));
  Recorder rec(model, lyap, cfg);
  rec.record(sim.cloud(), sim.threads());
  const std::int64_t total = sim.config().lag_intervals();
  for (std::int64_t i = 1; i <= total; ++i) {
    sim.advance_lag_interval();
    if (checkpoint_due(i, total, cfg.checkpoint_every)) rec.record(sim.cloud(), sim.threads());
  }
  if (final_cloud) *final_cloud = sim.cloud();
  return rec.take();
}

CoupledSeries coupled_simulate(const ModelSpec& model, const SimConfig& cfg, const InitialLaw& init1,
                               const InitialLaw& init2, const Vbar& vbar, const LyapunovSpec* lyap) {
  cfg.validate();
  if (lyap) lyap->validate(model);
  Simulation a(model, cfg, init1.sample(cfg.particles, model.dim(), cfg.seed));
  Simulation b(model, cfg, init2.sample(cfg.particles, model.dim(), cfg.seed));
  Recorder ra(model, lyap, cfg), rb(model, lyap, cfg);
  CoupledSeries out;
  const std::size_t n = cfg.particles;
  const auto d = static_cast<std::size_t>(model.dim());
  std::vector<double> dist(n), diff(d);
  auto record = [&] {
    ra.record(a.cloud(), a.threads());
    rb.record(b.cloud(), b.threads());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) diff[k] = a.cloud().x[i * d + k] - b.cloud().x[i * d + k];
      dist[i] = vbar(diff);
    }
    const double m = pairwise_sum(dist) / static_cast<double>(n);
    out.t.push_back(a.cloud().t);
    out.distance.push_back(m);
    out.distance_std.push_back(sample_std(dist, m));
  };
  record();
  const std::int64_t total = cfg.lag_intervals();
  for (std::int64_t i = 1; i <= total; ++i) {
    a.advance_lag_interval();
    b.advance_lag_interval();
    if (checkpoint_due(i, total, cfg.checkpoint_every)) record();
  }
  out.first = ra.take();
  out.second = rb.take();
  return out;
}

}  // namespace mkv
