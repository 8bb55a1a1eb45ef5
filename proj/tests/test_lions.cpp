#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mkvlab/error.hpp"
#include "mkvlab/lions.hpp"
#include "mkvlab/scenarios.hpp"

using namespace mkv;

namespace {

std::vector<double> cloud(std::size_t n, double lo, double hi, std::uint64_t seed) {
  return InitialLaw::uniform_box({{lo, hi}}).sample(n, 1, seed).x;
}

SimConfig cfg(std::size_t n, double horizon, int steps) {
  SimConfig c;
  c.particles = n;
  c.horizon = horizon;
  c.steps_per_unit = steps;
  c.checkpoint_every = 10;
  c.seed = 11;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("lift gradient of the fourth moment is 4 x^3") {
  const auto u = registry_function("moment4");
  const auto xs = cloud(8, -1.5, 1.5, 3);
  const EmpiricalMeasure mu(xs, 1);
  const double h = 1e-3;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double g = lift_gradient(u, mu, i, h)[0];
    // central difference error is (1/N) N * 4 x h^2 for x^4
    CHECK(std::abs(g - 4.0 * std::pow(xs[i], 3)) <= 4.0 * std::abs(xs[i]) * h * h * 1.01 + 1e-9);
  }
}

TEST_CASE("lift gradient basics") {
  MeasureFunction c;
  c.id = "const";
  c.value = Expr(2.5);
  const auto xs = cloud(5, 0, 1, 1);
  const EmpiricalMeasure mu(xs, 1);
  for (std::size_t i = 0; i < 5; ++i) CHECK(lift_gradient(c, mu, i)[0] == 0.0);

  const auto sq = registry_function("mean-squared");
  const double m = mean(mu);
  for (std::size_t i = 0; i < 5; ++i) CHECK(lift_gradient(sq, mu, i)[0] == doctest::Approx(2.0 * m).epsilon(1e-8));
  CHECK_THROWS_AS(lift_gradient(sq, mu, 5), InvalidArgument);
  CHECK(default_fd_step(std::vector<double>{-3.0}) == doctest::Approx(4.0 * std::cbrt(2.220446049250313e-16)));
}

TEST_CASE("duplicated atoms get the same lift gradient") {
  std::vector<double> xs = {0.3, -0.7, 0.3, 1.1, -0.7, 0.3, 2.0, 0.0};
  const EmpiricalMeasure mu(xs, 1);
  for (const auto& u : measure_function_registry()) {
    const auto rep = check_structure(u, mu);
    CHECK(rep.duplicate_pairs == 4);
    CHECK(rep.ok);
    CHECK(rep.max_duplicate_deviation <= rep.tolerance);
    CHECK(rep.max_analytic_deviation <= rep.tolerance);
  }
}

TEST_CASE("lift gradient is permutation equivariant") {
  const auto u = registry_function("example2-v");
  std::vector<double> xs = cloud(8, -1, 1, 9);
  std::vector<double> perm(xs.rbegin(), xs.rend());
  const EmpiricalMeasure a(xs, 1), b(perm, 1);
  for (std::size_t i = 0; i < 8; ++i)
    CHECK(lift_gradient(u, a, i)[0] == doctest::Approx(lift_gradient(u, b, 7 - i)[0]).epsilon(1e-9));
}

TEST_CASE("structure check on random clouds for every registered function") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto xs = cloud(8, -2, 2, seed);
    const EmpiricalMeasure mu(xs, 1);
    for (const auto& u : measure_function_registry()) {
      const auto rep = check_structure(u, mu);
      CHECK_MESSAGE(rep.ok, u.id << " seed " << seed << " dev " << rep.max_analytic_deviation << " tol "
                                 << rep.tolerance);
    }
  }
}

TEST_CASE("residual vanishes for the zero model") {
  const ModelSpec zero("zero", DomainLadder::full_space(1), 1, {}, {Expr(0.0)}, {Expr(0.0)});
  const auto out = ito_residual_measure(registry_function("moment4"), zero, cfg(50, 0.5, 100),
                                        InitialLaw::uniform_box({{-1, 1}}));
  for (std::size_t r = 0; r < out.t.size(); ++r) {
    CHECK(out.R[r] == 0.0);
    CHECK(out.compensated[r] == 0.0);
  }
}

TEST_CASE("deterministic example1 follows the Euler moment recursion") {
  const Expr x = Expr::state(0);
  const ModelSpec det("det", DomainLadder::full_space(1), 1, {FunctionalTag::raw_moment(4)},
                      {-(x * Expr::functional(0))}, {Expr(0.0)});
  const auto c = cfg(64, 1.0, 200);
  const auto init = InitialLaw::uniform_box({{-1.2, 1.2}});
  const auto out = ito_residual_measure(registry_function("moment4"), det, c, init);
  const auto xs = init.sample(c.particles, 1, c.seed).x;
  double m = moment(EmpiricalMeasure(xs, 1), 4);
  const double h = c.step_size();
  double drift = 0.0;
  std::size_t r = 1;
  for (int i = 1; i <= 200; ++i) {
    drift += -4.0 * m * m * h;
    m = m * std::pow(1.0 - m * h, 4);
    if (i % 10 == 0) {
      REQUIRE(r < out.t.size());
      CHECK(out.value[r] == doctest::Approx(m).epsilon(1e-12));
      CHECK(out.R[r] == doctest::Approx(m - out.value[0] - drift).epsilon(1e-9).scale(1e-12));
      ++r;
    }
  }
  // residual is O(h) for the smooth path
  CHECK(std::abs(out.R.back()) < 10.0 * h);
}

TEST_CASE("mean of dx = -x dt") {
  const ModelSpec ou("ou", DomainLadder::full_space(1), 1, {}, {-Expr::state(0)}, {Expr(0.0)});
  const auto c = cfg(32, 1.0, 100);
  const auto out = ito_residual_measure(registry_function("mean-squared"), ou, c, InitialLaw::uniform_box({{0, 2}}));
  const double m0 = std::sqrt(out.value[0]);
  CHECK(out.value.back() == doctest::Approx(std::pow(m0 * std::pow(0.99, 100), 2)).epsilon(1e-12));
  CHECK(std::abs(out.R.back()) < 1e-2);
}

TEST_CASE("compensated measure residual for a noisy linear model stays inside the band") {
  const auto s = builtin_scenario("linear-meanfield");
  const auto out = ito_residual_measure(registry_function("moment4"), s.model, cfg(2000, 1.0, 200),
                                        InitialLaw::uniform_box({{-1, 1}}));
  for (std::size_t r = 1; r < out.t.size(); ++r) {
    CHECK(out.band[r] > 0.0);
    CHECK(std::abs(out.compensated[r]) <= out.band[r]);
  }
}

TEST_CASE("full residual: constant Lyapunov function") {
  auto s = builtin_scenario("example1-quartic");
  LyapunovSpec v;
  v.v = Expr(3.0);
  v.dt = Expr(0.0);
  v.dx = {Expr(0.0)};
  v.dxx = {Expr(0.0)};
  v.floor = Expr(3.0);
  v.m1 = 0.0;
  v.m2 = 3.0;
  v.boundary_infimum = [](int) { return 3.0; };
  const auto out = ito_residual_full(v, s.model, cfg(100, 0.5, 100), InitialLaw::uniform_box({{-1, 1}}));
  for (std::size_t r = 0; r < out.t.size(); ++r) {
    CHECK(out.R[r] == 0.0);
    CHECK(out.compensated[r] == 0.0);
  }
}

TEST_CASE("full residual: example2 package within three standard errors") {
  const auto s = builtin_scenario("example2-nonlinear");
  const auto out = ito_residual_full(s.lyapunov, s.model, cfg(2000, 1.0, 200), InitialLaw::uniform_box({{-1, 1}}));
  for (std::size_t r = 1; r < out.t.size(); ++r) {
    CHECK(out.band[r] > 0.0);
    CHECK_MESSAGE(std::abs(out.compensated[r]) <= out.band[r], "t=" << out.t[r] << " res=" << out.compensated[r]
                                                                     << " band=" << out.band[r]);
  }
}
