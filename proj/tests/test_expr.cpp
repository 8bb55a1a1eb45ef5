#include <cmath>
#include <vector>

#include "doctest.h"
#include "mkvlab/expr.hpp"

using mkv::EvalPoint;
using mkv::Expr;

namespace {

double at(const Expr& e, double x, std::vector<double> fv = {}, double t = 0.0, double y = 0.0) {
  const std::vector<double> xs{x}, ys{y};
  return e.eval(EvalPoint{t, xs, ys, fv});
}

}  // namespace

TEST_CASE("arithmetic primitives") {
  const Expr x = Expr::state(0);
  CHECK(at(x + 2.0, 3.0) == 5.0);
  CHECK(at(x - 2.0, 3.0) == 1.0);
  CHECK(at(2.0 * x, 3.0) == 6.0);
  CHECK(at(-x, 3.0) == -3.0);
  CHECK(at(pow(x, 3), 2.0) == 8.0);
  CHECK(at(pow(x, 0), 2.0) == 1.0);
  CHECK(at(max(x, 1.0), 0.5) == 1.0);
  CHECK(at(min(x, 1.0), 0.5) == 0.5);
  CHECK(at(clamp(x, -1.0, 1.0), 7.0) == 1.0);
  CHECK(at(clamp(x, -1.0, 1.0), -7.0) == -1.0);
  CHECK(at(recip(x), 4.0) == 0.25);
}

TEST_CASE("reciprocal of a non-positive value is NaN") {
  const Expr x = Expr::state(0);
  CHECK(std::isnan(at(recip(x), 0.0)));
  CHECK(std::isnan(at(recip(x), -1.0)));
}

TEST_CASE("variables") {
  CHECK(at(Expr::time(), 0.0, {}, 2.5) == 2.5);
  CHECK(at(Expr::functional(1), 0.0, {3.0, 4.0}) == 4.0);
  CHECK(at(Expr::aux(0), 1.0, {}, 0.0, 9.0) == 9.0);
}

TEST_CASE("constant folding and introspection") {
  const Expr c = Expr(2.0) * Expr(3.0) + 1.0;
  CHECK(c.is_constant());
  CHECK(c.constant_value() == 7.0);
  const Expr e = Expr::state(0) * Expr::functional(2) + Expr::aux(0);
  CHECK_FALSE(e.is_constant());
  CHECK(e.max_functional() == 2);
  CHECK(e.max_state_axis() == 0);
  CHECK(e.uses_aux());
  CHECK(e.uses_functional(2));
  CHECK_FALSE(e.uses_functional(1));
  CHECK(Expr().max_functional() == -1);
}

TEST_CASE("separable kernel sums products") {
  mkv::SeparableKernel k{{{Expr::state(0), Expr::aux(0)}, {Expr(2.0), Expr(1.0)}}};
  CHECK(at(Expr(), 0.0) == 0.0);
  const std::vector<double> xs{3.0}, ys{5.0};
  CHECK(k.eval(EvalPoint{0.0, xs, ys, {}}) == 17.0);
  CHECK(mkv::SeparableKernel{}.empty());
}
