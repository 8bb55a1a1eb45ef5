#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mkvlab/expr.hpp"

namespace mkv {

enum class RegionKind { FullSpace, OpenBox, PositiveOrthant };

/// Open interval (lo, hi) when describing D, closed [lo, hi] for a level D_k.
struct Interval {
  double lo;
  double hi;
};

/// Axis-aligned domain D with its nested ladder of bounded boxes D_k.
///
/// Per-axis ladder rule, for D's axis interval (lo, hi):
///   (-inf, inf)  ->  [-k, k]
///   (lo, inf)    ->  [lo + 1/k, lo + k]
///   (-inf, hi)   ->  [hi - k, hi - 1/k]
///   (lo, hi)     ->  [lo + w/(2(k+1)), hi - w/(2(k+1))],  w = hi - lo
class DomainLadder {
 public:
  static DomainLadder full_space(int dim);
  static DomainLadder positive_orthant(int dim);
  static DomainLadder open_box(std::vector<Interval> bounds);

  int dim() const { return static_cast<int>(domain_.size()); }
  RegionKind kind() const { return kind_; }
  const std::vector<Interval>& domain() const { return domain_; }

  Interval level_axis(int k, int axis) const;
  std::vector<Interval> level(int k) const;

  bool in_domain(std::span<const double> x) const;
  bool in_level(int k, std::span<const double> x) const;

  /// D_k within D_{k+1}, and the closed box D_k strictly inside D.
  bool nested(int k) const;

 private:
  DomainLadder(RegionKind kind, std::vector<Interval> domain) : kind_(kind), domain_(std::move(domain)) {}

  RegionKind kind_;
  std::vector<Interval> domain_;
};

struct FunctionalTag {
  enum class Kind { RawMoment, Mean, LinearCombination, Quantile, ExpectedShortfall };

  Kind kind = Kind::Mean;
  double param = 0.0;
  int axis = 0;

  static FunctionalTag raw_moment(double p, int axis = 0);
  static FunctionalTag mean(int axis = 0);
  /// Measure part of integral (x - alpha y) mu(dy), i.e. alpha * mean(mu);
  /// the full quantity is x - value.
  static FunctionalTag linear_combination(double alpha, int axis = 0);
  static FunctionalTag quantile(double level, int axis = 0);
  static FunctionalTag expected_shortfall(double level, int axis = 0);

  void validate() const;
  /// CSV column name, e.g. "m4", "mean", "es0.05".
  std::string column_name() const;
};

/// Values of declared functionals for an N x d row-major particle array.
std::vector<double> evaluate_functionals(std::span<const FunctionalTag> tags, std::span<const double> samples, int dim,
                                         int threads = 1);

/// Growth envelope for local boundedness: on D_k,
/// |b|, |sigma| <= constant(k) * (1 + sum |fv|)^exponent.
struct LocalBound {
  std::function<double(int)> constant;
  double exponent = 1.0;

  double operator()(int k, std::span<const double> fv) const;
};

struct Coefficients {
  std::vector<double> drift;      // d
  std::vector<double> diffusion;  // d x d', row-major
};

/// McKean-Vlasov coefficients b(t, x, fv) and sigma(t, x, fv) over a domain
/// ladder. Immutable; evaluation is pure and thread-safe.
class ModelSpec {
 public:
  ModelSpec(std::string name, DomainLadder ladder, int noise_dim, std::vector<FunctionalTag> functionals,
            std::vector<Expr> drift, std::vector<Expr> diffusion, LocalBound local_bound = {});

  const std::string& name() const { return name_; }
  int dim() const { return ladder_.dim(); }
  int noise_dim() const { return noise_dim_; }
  const DomainLadder& ladder() const { return ladder_; }
  const std::vector<FunctionalTag>& functionals() const { return functionals_; }
  const std::vector<Expr>& drift() const { return drift_; }
  const std::vector<Expr>& diffusion() const { return diffusion_; }
  const LocalBound& local_bound() const { return local_bound_; }

  /// Writes b and sigma at (t, x, fv). Zero outside D, and outside D_k when a
  /// cut level is given. Throws NumericalError on a non-finite value at a
  /// point where the coefficients are not cut.
  void evaluate(double t, std::span<const double> x, std::span<const double> fv, std::optional<int> cut_level,
                std::span<double> drift_out, std::span<double> diffusion_out) const;

  Coefficients evaluate(double t, std::span<const double> x, std::span<const double> fv,
                        std::optional<int> cut_level = std::nullopt) const;

  /// True when the point has active (non-cut) coefficients.
  bool active(std::span<const double> x, std::optional<int> cut_level) const;

 private:
  std::string name_;
  DomainLadder ladder_;
  int noise_dim_;
  std::vector<FunctionalTag> functionals_;
  std::vector<Expr> drift_;
  std::vector<Expr> diffusion_;
  LocalBound local_bound_;
};

}  // namespace mkv
