#include "mkvlab/expr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mkv {

enum class Op { Const, Time, State, Aux, Functional, Add, Mul, Neg, Pow, Max, Min, Recip };

struct Expr::Node {
  Op op = Op::Const;
  double value = 0.0;  // constant, clamp bound
  int index = 0;       // variable index or power
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make(Op op, double value, int index, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  n->value = value;
  n->index = index;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

double ipow(double x, int n) {
  if (n < 0) return 1.0 / ipow(x, -n);
  double r = 1.0;
  while (n > 0) {
    if (n & 1) r *= x;
    x *= x;
    n >>= 1;
  }
  return r;
}

double eval_node(const Expr::Node& n, const EvalPoint& p) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Time: return p.t;
    case Op::State: return p.x[static_cast<std::size_t>(n.index)];
    case Op::Aux: return p.y[static_cast<std::size_t>(n.index)];
    case Op::Functional: return p.fv[static_cast<std::size_t>(n.index)];
    case Op::Add: return eval_node(*n.a, p) + eval_node(*n.b, p);
    case Op::Mul: return eval_node(*n.a, p) * eval_node(*n.b, p);
    case Op::Neg: return -eval_node(*n.a, p);
    case Op::Pow: return ipow(eval_node(*n.a, p), n.index);
    case Op::Max: return std::max(eval_node(*n.a, p), n.value);
    case Op::Min: return std::min(eval_node(*n.a, p), n.value);
    case Op::Recip: {
      const double v = eval_node(*n.a, p);
      return v > 0.0 ? 1.0 / v : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

template <class F>
void visit(const Expr::Node& n, F&& f) {
  f(n);
  if (n.a) visit(*n.a, f);
  if (n.b) visit(*n.b, f);
}

void print(const Expr::Node& n, std::ostream& os) {
  switch (n.op) {
    case Op::Const: os << n.value; return;
    case Op::Time: os << 't'; return;
    case Op::State: os << "x" << n.index; return;
    case Op::Aux: os << "y" << n.index; return;
    case Op::Functional: os << "f" << n.index; return;
    case Op::Add: os << '('; print(*n.a, os); os << " + "; print(*n.b, os); os << ')'; return;
    case Op::Mul: print(*n.a, os); os << '*'; print(*n.b, os); return;
    case Op::Neg: os << "-("; print(*n.a, os); os << ')'; return;
    case Op::Pow: os << '('; print(*n.a, os); os << ")^" << n.index; return;
    case Op::Max: os << "max("; print(*n.a, os); os << ", " << n.value << ')'; return;
    case Op::Min: os << "min("; print(*n.a, os); os << ", " << n.value << ')'; return;
    case Op::Recip: os << "1/("; print(*n.a, os); os << ')'; return;
  }
}

}  // namespace

Expr::Expr() : node_(make(Op::Const, 0.0, 0)) {}
Expr::Expr(double c) : node_(make(Op::Const, c, 0)) {}

Expr Expr::constant(double c) { return Expr(c); }
Expr Expr::time() { return Expr(make(Op::Time, 0.0, 0)); }
Expr Expr::state(int axis) { return Expr(make(Op::State, 0.0, axis)); }
Expr Expr::aux(int axis) { return Expr(make(Op::Aux, 0.0, axis)); }
Expr Expr::functional(int index) { return Expr(make(Op::Functional, 0.0, index)); }

double Expr::eval(const EvalPoint& p) const { return eval_node(*node_, p); }

bool Expr::is_constant() const { return node_->op == Op::Const; }
double Expr::constant_value() const { return is_constant() ? node_->value : 0.0; }

bool Expr::uses_functional(int index) const {
  bool used = false;
  visit(*node_, [&](const Node& n) { used |= (n.op == Op::Functional && n.index == index); });
  return used;
}

int Expr::max_functional() const {
  int m = -1;
  visit(*node_, [&](const Node& n) { if (n.op == Op::Functional) m = std::max(m, n.index); });
  return m;
}

int Expr::max_state_axis() const {
  int m = -1;
  visit(*node_, [&](const Node& n) { if (n.op == Op::State) m = std::max(m, n.index); });
  return m;
}

bool Expr::uses_aux() const {
  bool used = false;
  visit(*node_, [&](const Node& n) { used |= n.op == Op::Aux; });
  return used;
}

std::string Expr::to_string() const {
  std::ostringstream os;
  print(*node_, os);
  return os.str();
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.constant_value() + b.constant_value());
  if (a.is_constant() && a.constant_value() == 0.0) return b;
  if (b.is_constant() && b.constant_value() == 0.0) return a;
  return Expr(make(Op::Add, 0.0, 0, a.node_, b.node_));
}

Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.constant_value() * b.constant_value());
  if ((a.is_constant() && a.constant_value() == 0.0) || (b.is_constant() && b.constant_value() == 0.0))
    return Expr(0.0);
  if (a.is_constant() && a.constant_value() == 1.0) return b;
  if (b.is_constant() && b.constant_value() == 1.0) return a;
  return Expr(make(Op::Mul, 0.0, 0, a.node_, b.node_));
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr(-a.constant_value());
  return Expr(make(Op::Neg, 0.0, 0, a.node_));
}

Expr pow(const Expr& a, int n) {
  if (n == 0) return Expr(1.0);
  if (n == 1) return a;
  if (a.is_constant()) return Expr(ipow(a.constant_value(), n));
  return Expr(make(Op::Pow, 0.0, n, a.node_));
}

Expr max(const Expr& a, double c) { return Expr(make(Op::Max, c, 0, a.node_)); }
Expr min(const Expr& a, double c) { return Expr(make(Op::Min, c, 0, a.node_)); }
Expr recip(const Expr& a) { return Expr(make(Op::Recip, 0.0, 0, a.node_)); }

Expr clamp(const Expr& a, double lo, double hi) { return min(max(a, lo), hi); }

double SeparableKernel::eval(const EvalPoint& p) const {
  double s = 0.0;
  for (const auto& [left, right] : terms) s += left.eval(p) * right.eval(p);
  return s;
}

}  // namespace mkv
