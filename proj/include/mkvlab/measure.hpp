#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace mkv {

/// Uniform-weight empirical measure over N points in R^d, stored row-major
/// (particle i occupies samples[i*d .. i*d+d)). Either a view over external
/// storage or owning. Sorted per-axis copies are computed on first use and
/// cached; concurrent reads are safe.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::span<const double> samples, int dim);
  static EmpiricalMeasure owning(std::vector<double> samples, int dim);

  EmpiricalMeasure(EmpiricalMeasure&&) noexcept = default;
  EmpiricalMeasure& operator=(EmpiricalMeasure&&) noexcept = default;

  std::size_t size() const { return n_; }
  int dim() const { return dim_; }
  std::span<const double> samples() const { return data_; }
  std::span<const double> point(std::size_t i) const {
    return data_.subspan(i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_));
  }
  double at(std::size_t i, int axis = 0) const { return data_[i * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(axis)]; }

  /// Ascending copy of one coordinate.
  std::span<const double> sorted(int axis = 0) const;

 private:
  struct Cache {
    explicit Cache(int d) : flags(static_cast<std::size_t>(d)), sorted(static_cast<std::size_t>(d)) {}
    std::vector<std::once_flag> flags;
    std::vector<std::vector<double>> sorted;
  };

  std::vector<double> owned_;
  std::span<const double> data_;
  int dim_ = 1;
  std::size_t n_ = 0;
  std::unique_ptr<Cache> cache_;
};

/// Even, nonnegative kernel with vbar(0) = 0, used as the cost of the
/// semi-Wasserstein distance and as the stability functional.
class Vbar {
 public:
  /// |x|^p (Euclidean norm); convex for p >= 1.
  static Vbar power(double p);
  /// min(|x|^2, cap): even, Ker = {0}, not convex.
  static Vbar truncated_square(double cap);
  /// Scalar kernel supplied by the caller; checked for vbar(0) = 0.
  static Vbar custom(std::function<double(double)> f, bool convex);

  double operator()(std::span<const double> diff) const;
  double operator()(double diff) const;
  bool convex() const { return convex_; }
  /// Power exponent for power kernels, 0 otherwise.
  double exponent() const { return kind_ == Kind::Power ? param_ : 0.0; }

 private:
  enum class Kind { Power, Truncated, Custom };
  Vbar(Kind k, double param, bool convex) : kind_(k), param_(param), convex_(convex) {}

  Kind kind_;
  double param_;
  bool convex_;
  std::function<double(double)> custom_;
};

/// x^p; integer exponents use binary powering so every module rounds alike.
double power_of(double x, double p);

double moment(const EmpiricalMeasure& mu, double p, int axis = 0);
double mean(const EmpiricalMeasure& mu, int axis = 0);
/// Generalized inverse: x_(ceil(sN)) of the sorted samples.
double quantile(const EmpiricalMeasure& mu, double level, int axis = 0);
/// Exact integral of the empirical inverse CDF over (0, alpha], divided by alpha.
double expected_shortfall(const EmpiricalMeasure& mu, double alpha, int axis = 0);

/// Order-statistics helpers on raw values (input is copied).
double quantile_of(std::span<const double> values, double level);
double expected_shortfall_of(std::span<const double> values, double alpha);

/// W_p with the sorted (monotone) coupling; d = 1, equal N.
double wasserstein_p_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p);

inline constexpr std::size_t kExactAssignmentLimit = 256;

/// min over permutations of (1/N) sum cost(x_i - y_pi(i)); no root taken.
/// Exact assignment, N <= kExactAssignmentLimit, any d.
double wasserstein_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const Vbar& cost);

struct SemiWassersteinResult {
  double value = 0.0;
  /// Set when the value comes from a coupling not proven optimal.
  bool upper_bound = false;
};

SemiWassersteinResult semi_wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const Vbar& vbar);

/// Minimum-cost perfect matching on a dense n x n cost matrix (row-major).
/// Returns the column assigned to each row.
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

}  // namespace mkv
