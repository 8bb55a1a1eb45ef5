#include "mkvlab/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mkvlab/error.hpp"
#include "mkvlab/measure.hpp"
#include "mkvlab/reduce.hpp"

namespace mkv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string trim_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

DomainLadder DomainLadder::full_space(int dim) {
  if (dim < 1) throw InvalidArgument("dimension must be positive");
  return DomainLadder(RegionKind::FullSpace, std::vector<Interval>(static_cast<std::size_t>(dim), {-kInf, kInf}));
}

DomainLadder DomainLadder::positive_orthant(int dim) {
  if (dim < 1) throw InvalidArgument("dimension must be positive");
  return DomainLadder(RegionKind::PositiveOrthant, std::vector<Interval>(static_cast<std::size_t>(dim), {0.0, kInf}));
}

DomainLadder DomainLadder::open_box(std::vector<Interval> bounds) {
  if (bounds.empty()) throw InvalidArgument("dimension must be positive");
  for (const auto& b : bounds)
    if (!(b.lo < b.hi) || std::isnan(b.lo) || std::isnan(b.hi)) throw InvalidArgument("box bounds need lo < hi");
  return DomainLadder(RegionKind::OpenBox, std::move(bounds));
}

Interval DomainLadder::level_axis(int k, int axis) const {
  if (k < 1) throw InvalidArgument("ladder level must be >= 1");
  const Interval& d = domain_.at(static_cast<std::size_t>(axis));
  const double kd = static_cast<double>(k);
  const bool lo_inf = std::isinf(d.lo), hi_inf = std::isinf(d.hi);
  if (lo_inf && hi_inf) return {-kd, kd};
  if (hi_inf) return {d.lo + 1.0 / kd, d.lo + kd};
  if (lo_inf) return {d.hi - kd, d.hi - 1.0 / kd};
  const double margin = (d.hi - d.lo) / (2.0 * (kd + 1.0));
  return {d.lo + margin, d.hi - margin};
}

std::vector<Interval> DomainLadder::level(int k) const {
  std::vector<Interval> out;
  out.reserve(domain_.size());
  for (int a = 0; a < dim(); ++a) out.push_back(level_axis(k, a));
  return out;
}

bool DomainLadder::in_domain(std::span<const double> x) const {
  for (std::size_t a = 0; a < domain_.size(); ++a)
    if (!(x[a] > domain_[a].lo && x[a] < domain_[a].hi)) return false;
  return true;
}

bool DomainLadder::in_level(int k, std::span<const double> x) const {
  for (int a = 0; a < dim(); ++a) {
    const Interval box = level_axis(k, a);
    const double v = x[static_cast<std::size_t>(a)];
    if (!(v >= box.lo && v <= box.hi)) return false;
  }
  return true;
}

bool DomainLadder::nested(int k) const {
  for (int a = 0; a < dim(); ++a) {
    const Interval inner = level_axis(k, a);
    const Interval outer = level_axis(k + 1, a);
    const Interval& d = domain_[static_cast<std::size_t>(a)];
    if (!(outer.lo <= inner.lo && inner.hi <= outer.hi)) return false;
    if (!(d.lo < inner.lo && inner.hi < d.hi)) return false;
  }
  return true;
}

FunctionalTag FunctionalTag::raw_moment(double p, int axis) { return {Kind::RawMoment, p, axis}; }
FunctionalTag FunctionalTag::mean(int axis) { return {Kind::Mean, 0.0, axis}; }
FunctionalTag FunctionalTag::linear_combination(double alpha, int axis) { return {Kind::LinearCombination, alpha, axis}; }
FunctionalTag FunctionalTag::quantile(double level, int axis) { return {Kind::Quantile, level, axis}; }
FunctionalTag FunctionalTag::expected_shortfall(double level, int axis) {
  return {Kind::ExpectedShortfall, level, axis};
}

void FunctionalTag::validate() const {
  if (axis < 0) throw InvalidArgument("functional axis must be nonnegative");
  switch (kind) {
    case Kind::RawMoment:
      if (!(param >= 1.0)) throw InvalidArgument("moment order must be >= 1");
      break;
    case Kind::Quantile:
    case Kind::ExpectedShortfall:
      if (!(param > 0.0 && param <= 1.0)) throw InvalidArgument("quantile/ES level must lie in (0, 1]");
      break;
    case Kind::Mean:
    case Kind::LinearCombination:
      if (!std::isfinite(param)) throw InvalidArgument("functional parameter must be finite");
      break;
  }
}

std::string FunctionalTag::column_name() const {
  std::string base;
  switch (kind) {
    case Kind::RawMoment: base = "m" + trim_number(param); break;
    case Kind::Mean: base = "mean"; break;
    case Kind::LinearCombination: base = "lincomb" + trim_number(param); break;
    case Kind::Quantile: base = "q" + trim_number(param); break;
    case Kind::ExpectedShortfall: base = "es" + trim_number(param); break;
  }
  return axis == 0 ? base : base + "_x" + std::to_string(axis);
}

std::vector<double> evaluate_functionals(std::span<const FunctionalTag> tags, std::span<const double> samples, int dim,
                                         int threads) {
  const std::size_t n = samples.size() / static_cast<std::size_t>(dim);
  std::vector<double> out;
  out.reserve(tags.size());
  std::vector<double> buf(n);
  const long nl = static_cast<long>(n);
  for (const auto& tag : tags) {
    const auto axis = static_cast<std::size_t>(tag.axis);
    const auto d = static_cast<std::size_t>(dim);
    switch (tag.kind) {
      case FunctionalTag::Kind::RawMoment: {
        const double p = tag.param;
#pragma omp parallel for num_threads(threads) schedule(static)
        for (long i = 0; i < nl; ++i) {
          const double r = power_of(samples[static_cast<std::size_t>(i) * d + axis], p);
          buf[static_cast<std::size_t>(i)] = r;
        }
        out.push_back(parallel_pairwise_sum(buf, threads) / static_cast<double>(n));
        break;
      }
      case FunctionalTag::Kind::Mean:
      case FunctionalTag::Kind::LinearCombination: {
        for (std::size_t i = 0; i < n; ++i) buf[i] = samples[i * d + axis];
        const double m = parallel_pairwise_sum(buf, threads) / static_cast<double>(n);
        out.push_back(tag.kind == FunctionalTag::Kind::Mean ? m : tag.param * m);
        break;
      }
      case FunctionalTag::Kind::Quantile:
      case FunctionalTag::Kind::ExpectedShortfall: {
        for (std::size_t i = 0; i < n; ++i) buf[i] = samples[i * d + axis];
        out.push_back(tag.kind == FunctionalTag::Kind::Quantile ? quantile_of(buf, tag.param)
                                                                 : expected_shortfall_of(buf, tag.param));
        break;
      }
    }
  }
  return out;
}

double LocalBound::operator()(int k, std::span<const double> fv) const {
  if (!constant) return kInf;
  double s = 0.0;
  for (double v : fv) s += std::abs(v);
  return constant(k) * std::pow(1.0 + s, exponent);
}

ModelSpec::ModelSpec(std::string name, DomainLadder ladder, int noise_dim, std::vector<FunctionalTag> functionals,
                     std::vector<Expr> drift, std::vector<Expr> diffusion, LocalBound local_bound)
    : name_(std::move(name)),
      ladder_(std::move(ladder)),
      noise_dim_(noise_dim),
      functionals_(std::move(functionals)),
      drift_(std::move(drift)),
      diffusion_(std::move(diffusion)),
      local_bound_(std::move(local_bound)) {
  const int d = ladder_.dim();
  if (noise_dim_ < 1) throw InvalidArgument("noise dimension must be positive");
  if (static_cast<int>(drift_.size()) != d) throw InvalidArgument("drift must have d components");
  if (static_cast<int>(diffusion_.size()) != d * noise_dim_) throw InvalidArgument("diffusion must be d x d'");
  for (const auto& tag : functionals_) {
    tag.validate();
    if (tag.axis >= d) throw InvalidArgument("functional axis exceeds model dimension");
  }
  const int nf = static_cast<int>(functionals_.size());
  auto check = [&](const Expr& e) {
    if (e.max_functional() >= nf) throw InvalidArgument("coefficient references an undeclared functional");
    if (e.max_state_axis() >= d) throw InvalidArgument("coefficient references a state axis beyond d");
    if (e.uses_aux()) throw InvalidArgument("coefficients may not reference the measure-derivative variable");
  };
  for (const auto& e : drift_) check(e);
  for (const auto& e : diffusion_) check(e);
}

bool ModelSpec::active(std::span<const double> x, std::optional<int> cut_level) const {
  if (!ladder_.in_domain(x)) return false;
  if (cut_level && !ladder_.in_level(*cut_level, x)) return false;
  return true;
}

void ModelSpec::evaluate(double t, std::span<const double> x, std::span<const double> fv, std::optional<int> cut_level,
                         std::span<double> drift_out, std::span<double> diffusion_out) const {
  if (fv.size() != functionals_.size()) throw InvalidArgument("functional values do not match declared functionals");
  if (!active(x, cut_level)) {
    std::fill(drift_out.begin(), drift_out.end(), 0.0);
    std::fill(diffusion_out.begin(), diffusion_out.end(), 0.0);
    return;
  }
  const EvalPoint p{t, x, {}, fv};
  for (std::size_t a = 0; a < drift_.size(); ++a) drift_out[a] = drift_[a].eval(p);
  for (std::size_t a = 0; a < diffusion_.size(); ++a) diffusion_out[a] = diffusion_[a].eval(p);
  for (double v : drift_out)
    if (!std::isfinite(v)) throw NumericalError("model '" + name_ + "' produced a non-finite drift in the domain");
  for (double v : diffusion_out)
    if (!std::isfinite(v)) throw NumericalError("model '" + name_ + "' produced a non-finite diffusion in the domain");
}

Coefficients ModelSpec::evaluate(double t, std::span<const double> x, std::span<const double> fv,
                                 std::optional<int> cut_level) const {
  Coefficients c{std::vector<double>(drift_.size()), std::vector<double>(diffusion_.size())};
  evaluate(t, x, fv, cut_level, c.drift, c.diffusion);
  return c;
}

}  // namespace mkv
