#include "mkvlab/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mkvlab/error.hpp"
#include "mkvlab/reduce.hpp"

namespace mkv {

namespace {

void check_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericalError("empirical measure contains a non-finite sample");
}

void check_same_shape(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.size() != nu.size())
    throw InvalidArgument("distance needs equal sample counts (" + std::to_string(mu.size()) + " vs " +
                          std::to_string(nu.size()) + ")");
  if (mu.dim() != nu.dim()) throw InvalidArgument("distance needs equal dimensions");
}

// Smallest 1-based rank i with i/N >= level.
std::size_t quantile_rank(double level, std::size_t n) {
  if (!(level > 0.0 && level <= 1.0)) throw InvalidArgument("quantile level must lie in (0, 1]");
  const double nd = static_cast<double>(n);
  auto i = static_cast<std::size_t>(std::ceil(level * nd));
  i = std::clamp<std::size_t>(i, 1, n);
  while (i > 1 && static_cast<double>(i - 1) / nd >= level) --i;
  while (i < n && static_cast<double>(i) / nd < level) ++i;
  return i;
}

// ES from the m+1 smallest values, where the first m are sorted ascending.
double es_from_sorted_prefix(std::span<const double> head, double alpha, std::size_t n, std::size_t m) {
  const double nd = static_cast<double>(n);
  double integral = pairwise_sum(head.first(m)) / nd;
  if (m < n) integral += (alpha - static_cast<double>(m) / nd) * head[m];
  return integral / alpha;
}

std::size_t es_count(double alpha, std::size_t n) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("expected-shortfall level must lie in (0, 1]");
  const auto m = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n)));
  return std::min(m, n);
}

}  // namespace

double power_of(double x, double p) {
  const double r = std::nearbyint(p);
  if (r == p && std::abs(p) < 64) {
    int n = static_cast<int>(r);
    double acc = 1.0, b = x;
    bool neg = n < 0;
    n = std::abs(n);
    while (n > 0) {
      if (n & 1) acc *= b;
      b *= b;
      n >>= 1;
    }
    return neg ? 1.0 / acc : acc;
  }
  return std::pow(x, p);
}

EmpiricalMeasure::EmpiricalMeasure(std::span<const double> samples, int dim) : data_(samples), dim_(dim) {
  if (dim < 1) throw InvalidArgument("dimension must be positive");
  if (samples.empty() || samples.size() % static_cast<std::size_t>(dim) != 0)
    throw InvalidArgument("sample buffer must hold N >= 1 points of dimension d");
  check_finite(samples);
  n_ = samples.size() / static_cast<std::size_t>(dim);
  cache_ = std::make_unique<Cache>(dim);
}

EmpiricalMeasure EmpiricalMeasure::owning(std::vector<double> samples, int dim) {
  EmpiricalMeasure m(std::span<const double>(samples), dim);
  m.owned_ = std::move(samples);
  m.data_ = std::span<const double>(m.owned_);
  return m;
}

std::span<const double> EmpiricalMeasure::sorted(int axis) const {
  if (axis < 0 || axis >= dim_) throw InvalidArgument("axis out of range");
  const auto a = static_cast<std::size_t>(axis);
  std::call_once(cache_->flags[a], [&] {
    auto& s = cache_->sorted[a];
    s.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) s[i] = at(i, axis);
    std::sort(s.begin(), s.end());
  });
  return cache_->sorted[a];
}

Vbar Vbar::power(double p) {
  if (!(p > 0.0)) throw InvalidArgument("vbar power must be positive");
  return Vbar(Kind::Power, p, p >= 1.0);
}

Vbar Vbar::truncated_square(double cap) {
  if (!(cap > 0.0)) throw InvalidArgument("truncation level must be positive");
  return Vbar(Kind::Truncated, cap, false);
}

Vbar Vbar::custom(std::function<double(double)> f, bool convex) {
  if (!f) throw InvalidArgument("vbar callable is empty");
  if (f(0.0) != 0.0) throw InvalidArgument("vbar(0) must be 0");
  Vbar v(Kind::Custom, 0.0, convex);
  v.custom_ = std::move(f);
  return v;
}

double Vbar::operator()(double diff) const {
  switch (kind_) {
    case Kind::Power: return power_of(std::abs(diff), param_);
    case Kind::Truncated: return std::min(diff * diff, param_);
    case Kind::Custom: {
      const double v = custom_(diff);
      if (!(v >= 0.0)) throw InvalidArgument("vbar must be nonnegative");
      return v;
    }
  }
  return 0.0;
}

double Vbar::operator()(std::span<const double> diff) const {
  if (diff.size() == 1) return (*this)(diff[0]);
  if (kind_ == Kind::Custom) throw InvalidArgument("custom vbar is scalar only");
  double sq = 0.0;
  for (double d : diff) sq += d * d;
  if (kind_ == Kind::Truncated) return std::min(sq, param_);
  return param_ == 2.0 ? sq : power_of(std::sqrt(sq), param_);
}

double moment(const EmpiricalMeasure& mu, double p, int axis) {
  if (!(p >= 1.0)) throw InvalidArgument("moment order must be >= 1");
  if (axis < 0 || axis >= mu.dim()) throw InvalidArgument("axis out of range");
  std::vector<double> terms(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) terms[i] = power_of(mu.at(i, axis), p);
  const double m = pairwise_sum(terms) / static_cast<double>(mu.size());
  if (!std::isfinite(m)) throw NumericalError("moment is not finite");
  return m;
}

double mean(const EmpiricalMeasure& mu, int axis) {
  if (axis < 0 || axis >= mu.dim()) throw InvalidArgument("axis out of range");
  std::vector<double> terms(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) terms[i] = mu.at(i, axis);
  return pairwise_sum(terms) / static_cast<double>(mu.size());
}

double quantile(const EmpiricalMeasure& mu, double level, int axis) {
  const auto s = mu.sorted(axis);
  return s[quantile_rank(level, s.size()) - 1];
}

double expected_shortfall(const EmpiricalMeasure& mu, double alpha, int axis) {
  const auto s = mu.sorted(axis);
  return es_from_sorted_prefix(s, alpha, s.size(), es_count(alpha, s.size()));
}

double quantile_of(std::span<const double> values, double level) {
  if (values.empty()) throw InvalidArgument("empty sample");
  const std::size_t k = quantile_rank(level, values.size()) - 1;
  std::vector<double> v(values.begin(), values.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

double expected_shortfall_of(std::span<const double> values, double alpha) {
  if (values.empty()) throw InvalidArgument("empty sample");
  const std::size_t n = values.size();
  const std::size_t m = es_count(alpha, n);
  std::vector<double> v(values.begin(), values.end());
  const std::size_t keep = std::min(m + 1, n);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(keep - 1), v.end());
  std::sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(keep));
  return es_from_sorted_prefix(std::span<const double>(v).first(keep), alpha, n, m);
}

double wasserstein_p_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p) {
  check_same_shape(mu, nu);
  if (mu.dim() != 1) throw InvalidArgument("sorted coupling needs d = 1");
  if (!(p >= 1.0)) throw InvalidArgument("Wasserstein order must be >= 1");
  const auto a = mu.sorted(0);
  const auto b = nu.sorted(0);
  std::vector<double> terms(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) terms[i] = power_of(std::abs(a[i] - b[i]), p);
  const double mean_cost = pairwise_sum(terms) / static_cast<double>(a.size());
  return p == 1.0 ? mean_cost : std::pow(mean_cost, 1.0 / p);
}

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw InvalidArgument("cost matrix must be n x n");
  // Shortest augmenting path with potentials (Hungarian method), 1-based.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const std::size_t r0 = match[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(r0 - 1) * n + (j - 1)] - u[r0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = col0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          col1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

double wasserstein_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const Vbar& cost) {
  check_same_shape(mu, nu);
  const std::size_t n = mu.size();
  if (n > kExactAssignmentLimit)
    throw InvalidArgument("exact assignment limited to N <= " + std::to_string(kExactAssignmentLimit));
  const auto d = static_cast<std::size_t>(mu.dim());
  std::vector<double> matrix(n * n);
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t a = 0; a < d; ++a) diff[a] = mu.point(i)[a] - nu.point(j)[a];
      matrix[i * n + j] = cost(diff);
    }
  }
  const auto assignment = solve_assignment(matrix, n);
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) terms[i] = matrix[i * n + assignment[i]];
  return pairwise_sum(terms) / static_cast<double>(n);
}

SemiWassersteinResult semi_wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const Vbar& vbar) {
  check_same_shape(mu, nu);
  const std::size_t n = mu.size();
  if (mu.dim() == 1 && vbar.convex()) {
    const auto a = mu.sorted(0);
    const auto b = nu.sorted(0);
    std::vector<double> terms(n);
    for (std::size_t i = 0; i < n; ++i) terms[i] = vbar(a[i] - b[i]);
    return {pairwise_sum(terms) / static_cast<double>(n), false};
  }
  if (n <= kExactAssignmentLimit) return {wasserstein_exact(mu, nu, vbar), false};
  // Too large for the exact solve: report a feasible coupling's cost.
  std::vector<double> terms(n);
  if (mu.dim() == 1) {
    const auto a = mu.sorted(0);
    const auto b = nu.sorted(0);
    for (std::size_t i = 0; i < n; ++i) terms[i] = vbar(a[i] - b[i]);
  } else {
    const auto d = static_cast<std::size_t>(mu.dim());
    std::vector<double> diff(d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < d; ++a) diff[a] = mu.point(i)[a] - nu.point(i)[a];
      terms[i] = vbar(diff);
    }
  }
  return {pairwise_sum(terms) / static_cast<double>(n), true};
}

}  // namespace mkv
