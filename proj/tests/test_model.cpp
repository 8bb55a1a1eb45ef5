#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mkvlab/error.hpp"
#include "mkvlab/scenarios.hpp"

using namespace mkv;

TEST_CASE("ladder rules") {
  const auto full = DomainLadder::full_space(1);
  CHECK(full.level_axis(3, 0).lo == -3.0);
  CHECK(full.level_axis(3, 0).hi == 3.0);
  const auto pos = DomainLadder::positive_orthant(1);
  CHECK(pos.level_axis(4, 0).lo == 0.25);
  CHECK(pos.level_axis(4, 0).hi == 4.0);
  const auto box = DomainLadder::open_box({{0.0, 2.0}, {-INFINITY, 1.0}});
  CHECK(box.level_axis(1, 0).lo == 0.5);
  CHECK(box.level_axis(1, 0).hi == 1.5);
  CHECK(box.level_axis(2, 1).lo == -1.0);
  CHECK(box.level_axis(2, 1).hi == 0.5);
  CHECK_THROWS_AS(full.level_axis(0, 0), InvalidArgument);
  CHECK_THROWS_AS(DomainLadder::open_box({{1.0, 1.0}}), InvalidArgument);
}

TEST_CASE("ladders nest for k in 1..64") {
  const std::vector<DomainLadder> ladders{DomainLadder::full_space(2), DomainLadder::positive_orthant(1),
                                          DomainLadder::open_box({{-1.0, 3.0}}),
                                          DomainLadder::open_box({{2.0, INFINITY}, {-INFINITY, -2.0}})};
  for (const auto& l : ladders)
    for (int k = 1; k <= 64; ++k) CHECK(l.nested(k));
  for (const auto& name : builtin_scenario_names()) {
    const auto s = builtin_scenario(name);
    for (int k = 1; k <= 64; ++k) CHECK(s.model.ladder().nested(k));
  }
}

TEST_CASE("membership") {
  const auto pos = DomainLadder::positive_orthant(1);
  const std::vector<double> zero{0.0}, half{0.5}, big{11.0};
  CHECK_FALSE(pos.in_domain(zero));
  CHECK(pos.in_domain(half));
  CHECK(pos.in_level(2, half));
  CHECK_FALSE(pos.in_level(10, big));
}

TEST_CASE("functional tags") {
  CHECK_THROWS_AS(FunctionalTag::raw_moment(0.5).validate(), InvalidArgument);
  CHECK_THROWS_AS(FunctionalTag::quantile(0.0).validate(), InvalidArgument);
  CHECK_THROWS_AS(FunctionalTag::expected_shortfall(1.2).validate(), InvalidArgument);
  CHECK(FunctionalTag::raw_moment(4).column_name() == "m4");
  CHECK(FunctionalTag::expected_shortfall(0.05).column_name() == "es0.05");
  const std::vector<double> xs{4, 1, 3, 2};
  const std::vector<FunctionalTag> tags{FunctionalTag::raw_moment(2), FunctionalTag::mean(),
                                        FunctionalTag::linear_combination(-0.5), FunctionalTag::quantile(0.5),
                                        FunctionalTag::expected_shortfall(0.5)};
  const auto fv = evaluate_functionals(tags, xs, 1);
  CHECK(fv == std::vector<double>{7.5, 2.5, -1.25, 2.0, 1.5});
}

TEST_CASE("builtin scenario parameter checks") {
  const auto e2 = builtin_scenario("example2-nonlinear", {{"alpha", -0.5}, {"sigma", 0.5}});
  CHECK(e2.lyapunov.m2(0.0) == 4.5);
  CHECK(e2.lyapunov.m1(0.0) == -4.5);
  CHECK_THROWS_AS(builtin_scenario("example2-nonlinear", {{"alpha", 1.0}, {"sigma", 1.0}}), InvalidArgument);
  CHECK_THROWS_AS(builtin_scenario("example3-cir", {{"kappa", 1.0}, {"theta", 0.5}, {"sigma", 1.0}}),
                  InvalidArgument);
  CHECK_THROWS_AS(builtin_scenario("nope"), InvalidArgument);
  CHECK_THROWS_AS(builtin_scenario("example1-quartic", {{"alpha", 1.0}}), InvalidArgument);
  const auto e1 = builtin_scenario("example1-quartic");
  CHECK(e1.lyapunov.m1(3.0) == -1.0);
  CHECK(e1.lyapunov.m2(3.0) == 4.0);
  CHECK(e1.lyapunov.mode == LyapunovMode::Integrated);
}

TEST_CASE("example1 coefficients") {
  const auto s = builtin_scenario("example1-quartic");
  const std::vector<double> x{1.0}, fv{1.0};
  const auto c = s.model.evaluate(0.0, x, fv);
  CHECK(c.drift[0] == -1.0);
  CHECK(c.diffusion[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(s.model.evaluate(0.0, x, std::vector<double>{}), InvalidArgument);
}

TEST_CASE("cut and domain extension") {
  const auto cir = builtin_scenario("example3-cir");
  const std::vector<double> fv{1.2};
  const std::vector<double> outside{11.0}, negative{-1.0}, inside{2.0};
  auto c = cir.model.evaluate(0.0, outside, fv, 10);
  CHECK(c.drift[0] == 0.0);
  CHECK(c.diffusion[0] == 0.0);
  c = cir.model.evaluate(0.0, negative, fv);
  CHECK(c.drift[0] == 0.0);
  CHECK(c.diffusion[0] == 0.0);
  c = cir.model.evaluate(0.0, inside, fv, 10);
  const auto uncut = cir.model.evaluate(0.0, inside, fv);
  CHECK(c.drift == uncut.drift);
  CHECK(c.diffusion == uncut.diffusion);
}

TEST_CASE("cut agrees with uncut on D_k and vanishes off it") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (const auto& name : builtin_scenario_names()) {
    const auto s = builtin_scenario(name);
    const std::vector<double> fv(s.model.functionals().size(), 0.7);
    for (int trial = 0; trial < 200; ++trial) {
      const std::vector<double> x{u(rng)};
      const int k = 1 + trial % 20;
      const auto cut = s.model.evaluate(0.0, x, fv, k);
      if (s.model.ladder().in_level(k, x)) {
        const auto full = s.model.evaluate(0.0, x, fv);
        CHECK(cut.drift == full.drift);
        CHECK(cut.diffusion == full.diffusion);
      } else {
        CHECK(cut.drift[0] == 0.0);
        CHECK(cut.diffusion[0] == 0.0);
      }
    }
  }
}

TEST_CASE("local boundedness envelope on D_k") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> g;
  for (const auto& name : builtin_scenario_names()) {
    const auto s = builtin_scenario(name);
    for (int k = 1; k <= 30; ++k) {
      const auto box = s.model.ladder().level_axis(k, 0);
      for (int trial = 0; trial < 50; ++trial) {
        const std::vector<double> x{box.lo + u01(rng) * (box.hi - box.lo)};
        std::vector<double> fv(s.model.functionals().size());
        for (auto& f : fv) f = 5.0 * g(rng);
        const auto c = s.model.evaluate(0.0, x, fv, k);
        const double bound = s.model.local_bound()(k, fv);
        CHECK(std::abs(c.drift[0]) <= bound * (1 + 1e-12));
        CHECK(std::abs(c.diffusion[0]) <= bound * (1 + 1e-12));
      }
    }
  }
}

TEST_CASE("model construction rejects undeclared functionals") {
  CHECK_THROWS_AS(ModelSpec("bad", DomainLadder::full_space(1), 1, {}, {Expr::functional(0)}, {Expr(1.0)}),
                  InvalidArgument);
  CHECK_THROWS_AS(ModelSpec("bad", DomainLadder::full_space(1), 1, {}, {Expr::state(1)}, {Expr(1.0)}),
                  InvalidArgument);
  CHECK_THROWS_AS(ModelSpec("bad", DomainLadder::full_space(1), 2, {}, {Expr(0.0)}, {Expr(1.0)}), InvalidArgument);
}

TEST_CASE("non-finite coefficient in the domain is a model bug") {
  const ModelSpec m("inv", DomainLadder::full_space(1), 1, {}, {recip(Expr::state(0))}, {Expr(0.0)});
  const std::vector<double> x{-1.0};
  CHECK_THROWS_AS(m.evaluate(0.0, x, std::vector<double>{}), NumericalError);
}
