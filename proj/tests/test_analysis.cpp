#include <cmath>
#include <vector>

#include "doctest.h"
#include "mkvlab/analysis.hpp"
#include "mkvlab/error.hpp"

using namespace mkv;

namespace {

SimConfig cfg(std::size_t n, double horizon, int steps, int every) {
  SimConfig c;
  c.particles = n;
  c.horizon = horizon;
  c.steps_per_unit = steps;
  c.checkpoint_every = every;
  c.seed = 5;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("fourth moment ODE oracle") {
  CHECK(moment_ode_oracle(0.75, 3.0) == doctest::Approx(0.75));
  CHECK(moment_ode_oracle(0.0, 2.0) == 0.0);
  CHECK(moment_ode_oracle(0.2, 0.0) == doctest::Approx(0.2));
  CHECK(moment_ode_oracle(3.0, 40.0) == doctest::Approx(0.75));
  const double t = 0.4, e = 1e-6;
  const double m = moment_ode_oracle(0.3, t);
  const double slope = (moment_ode_oracle(0.3, t + e) - moment_ode_oracle(0.3, t - e)) / (2 * e);
  CHECK(slope == doctest::Approx(3 * m - 4 * m * m).epsilon(1e-6));
  CHECK_THROWS_AS(moment_ode_oracle(-1.0, 1.0), InvalidArgument);
}

TEST_CASE("deterministic linear contraction sits on the bound") {
  const auto s = builtin_scenario("linear-meanfield", {{"sigma", 0.0}});
  const auto c = cfg(64, 1.0, 100, 10);
  const auto rep = stability_experiment(s.model, Vbar::power(2.0), s.certificates[1], c,
                                        InitialLaw::uniform_box({{-1, 1}}), InitialLaw::uniform_box({{1, 3}}));
  CHECK(rep.exponent == doctest::Approx(-2.0));
  CHECK(rep.pass);
  for (std::size_t r = 0; r < rep.t.size(); ++r) {
    const double steps = std::round(rep.t[r] * 100);
    CHECK(rep.measured[r] == doctest::Approx(rep.measured[0] * std::pow(0.99, 2 * steps)).epsilon(1e-12));
    CHECK(rep.measured[r] <= rep.bound[r] * (1 + 1e-12));
  }
  // discrete rate (1 - h)^2 vs exp(-2h)
  CHECK(rep.max_relative_gap > 1e-4);
  CHECK(rep.max_relative_gap < 0.02);
}

TEST_CASE("noisy linear model passes both certificates") {
  const auto s = builtin_scenario("linear-meanfield", {{"a", -1.0}, {"b", 0.5}});
  const auto c = cfg(500, 1.0, 100, 10);
  for (const auto& cert : s.certificates) {
    const auto rep = stability_experiment(s.model, Vbar::power(2.0), cert, c, InitialLaw::uniform_box({{-1, 1}}),
                                          InitialLaw::point_mass({2.0}));
    CHECK(rep.pass);
    CHECK(rep.margin >= 0.0);
    CHECK(rep.bound.size() == rep.t.size());
  }
}

TEST_CASE("a wrong certificate is flagged") {
  const auto s = builtin_scenario("linear-meanfield", {{"sigma", 0.0}});
  ContractionCertificate bogus{LyapunovMode::Integrated, 0.0, -6.0};
  const auto rep = stability_experiment(s.model, Vbar::power(2.0), bogus, cfg(64, 1.0, 100, 10),
                                        InitialLaw::uniform_box({{-1, 1}}), InitialLaw::uniform_box({{1, 3}}));
  CHECK_FALSE(rep.pass);
  CHECK(rep.margin < 0.0);
}

TEST_CASE("replicas of the clamp model agree up to sampling noise") {
  const auto s = builtin_scenario("scheutzow-clamp");
  const auto rep = scheutzow_probe(s.model, cfg(1000, 2.0, 100, 20), {1, 2, 3}, InitialLaw::uniform_box({{-1, 1}}));
  CHECK(rep.threshold == doctest::Approx(5.0 / std::sqrt(1000.0)));
  CHECK(rep.t.size() == 11);
  CHECK(rep.pass);
  CHECK(rep.worst > 0.0);
  CHECK_THROWS_AS(scheutzow_probe(s.model, cfg(10, 1.0, 10, 1), {1}, InitialLaw::point_mass({0.0})),
                  InvalidArgument);
}

TEST_CASE("replica distance is zero without noise from a point mass") {
  const auto s = builtin_scenario("scheutzow-clamp", {{"sigma", 0.0}});
  const auto rep = scheutzow_probe(s.model, cfg(50, 1.0, 50, 10), {1, 9}, InitialLaw::point_mass({0.4}));
  for (double w : rep.max_w1) CHECK(w == 0.0);
}

TEST_CASE("occupation measures of an OU process") {
  const auto s = builtin_scenario("linear-meanfield");
  const auto c = cfg(400, 1.0, 50, 10);
  const auto rep = stationary_estimate(s.model, c, {5.0, 10.0, 20.0}, InitialLaw::point_mass({3.0}), &s.lyapunov, 50);
  REQUIRE(rep.occupation.size() == 3);
  REQUIRE(rep.w1_gaps.size() == 2);
  CHECK(rep.occupation[0].samples.size() == 50 * 400);
  CHECK(rep.w1_gaps[1] < rep.w1_gaps[0]);
  CHECK_FALSE(rep.envelope_warning);
  // stationary law N(0, 1/2) with a shrinking transient from x = 3
  const auto& occ = rep.occupation[2];
  const EmpiricalMeasure mu = occ.measure();
  CHECK(moment(mu, 2) == doctest::Approx(0.5 + 9.0 / (2 * 20.0)).epsilon(0.15));
  REQUIRE(rep.functional_names.size() == 1);
  CHECK(std::abs(rep.functionals[2][0]) < 0.3);

  // subsampling caps the pooled size
  const auto small = stationary_estimate(s.model, c, {2.0}, InitialLaw::point_mass({0.0}), nullptr, 10, 1000);
  CHECK(small.occupation[0].particles_kept == 100);
  CHECK(small.occupation[0].samples.size() == 1000);
  CHECK_THROWS_AS(stationary_estimate(s.model, c, {1.01}, InitialLaw::point_mass({0.0}), nullptr, 100),
                  InvalidArgument);
  CHECK_THROWS_AS(stationary_estimate(s.model, c, {2.0, 1.0}, InitialLaw::point_mass({0.0})), InvalidArgument);
}
