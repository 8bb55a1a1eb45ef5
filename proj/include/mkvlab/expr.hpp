#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mkv {

/// Arguments an expression may reference: time, the state point x, the
/// free variable y of a measure derivative, and declared functional values.
struct EvalPoint {
  double t = 0.0;
  std::span<const double> x;
  std::span<const double> y;
  std::span<const double> fv;
};

/// Immutable coefficient expression built from a closed set of primitives:
/// constants, variables, sums, products, integer powers, clamps against
/// constants and the reciprocal of a positive argument.
///
/// A reciprocal of a non-positive value evaluates to NaN so that the caller
/// can report it as a model bug at an in-domain point.
class Expr {
 public:
  Expr();  // constant zero
  Expr(double c);  // NOLINT(google-explicit-constructor)

  static Expr constant(double c);
  static Expr time();
  static Expr state(int axis = 0);
  static Expr aux(int axis = 0);
  static Expr functional(int index);

  double eval(const EvalPoint& p) const;

  bool is_constant() const;
  /// Value when is_constant(); 0 otherwise.
  double constant_value() const;
  /// True when the expression never references the given functional index.
  bool uses_functional(int index) const;
  /// Highest functional index referenced, or -1.
  int max_functional() const;
  int max_state_axis() const;
  bool uses_aux() const;

  std::string to_string() const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr pow(const Expr& a, int n);
  friend Expr max(const Expr& a, double c);
  friend Expr min(const Expr& a, double c);
  friend Expr recip(const Expr& a);

  struct Node;

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

Expr clamp(const Expr& a, double lo, double hi);

/// Sum of products A_r(t, x, fv) * B_r(t, y, fv). Measure derivatives of the
/// built-in Lyapunov functions all take this form, which lets an integral
/// against mu over y collapse to per-term averages.
struct SeparableKernel {
  std::vector<std::pair<Expr, Expr>> terms;

  bool empty() const { return terms.empty(); }
  double eval(const EvalPoint& p) const;
};

}  // namespace mkv
