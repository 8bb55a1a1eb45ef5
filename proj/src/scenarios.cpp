#include "mkvlab/scenarios.hpp"

#include <cmath>

#include "mkvlab/error.hpp"

namespace mkv {

double ContractionCertificate::exponent() const {
  return mode == LyapunovMode::Pointwise ? g + h + 2.0 * std::abs(h) : h;
}

namespace {

const std::map<std::string, std::map<std::string, double>>& defaults_table() {
  static const std::map<std::string, std::map<std::string, double>> table{
      {"example1-quartic", {}},
      {"example2-nonlinear", {{"alpha", -0.5}, {"sigma", 0.5}}},
      {"example3-cir", {{"kappa", 1.0}, {"theta", 1.5}, {"sigma", 1.0}, {"alpha", 0.05}}},
      {"linear-meanfield", {{"a", -1.0}, {"b", 0.0}, {"sigma", 1.0}}},
      {"scheutzow-clamp", {{"sigma", 0.5}}},
  };
  return table;
}

std::map<std::string, double> merge(const std::string& name, const std::map<std::string, double>& given) {
  auto out = scenario_defaults(name);
  for (const auto& [k, v] : given) {
    auto it = out.find(k);
    if (it == out.end()) throw InvalidArgument("scenario '" + name + "' has no parameter '" + k + "'");
    if (!std::isfinite(v)) throw InvalidArgument("parameter '" + k + "' must be finite");
    it->second = v;
  }
  return out;
}

Expr x() { return Expr::state(0); }
Expr fv(int i) { return Expr::functional(i); }

// Lyapunov skeleton for d = 1 with no time or measure dependence.
LyapunovSpec scalar_lyapunov(Expr v, Expr dx, Expr dxx, Expr floor, double m1, double m2,
                             std::function<double(int)> vk, LyapunovMode mode) {
  LyapunovSpec l;
  l.v = std::move(v);
  l.dt = Expr(0.0);
  l.dx = {std::move(dx)};
  l.dxx = {std::move(dxx)};
  l.floor = std::move(floor);
  l.m1 = m1;
  l.m2 = m2;
  l.boundary_infimum = std::move(vk);
  l.mode = mode;
  return l;
}

Scenario example1() {
  // dx = -x m4 dt + x / sqrt(2) dw
  ModelSpec model("example1-quartic", DomainLadder::full_space(1), 1, {FunctionalTag::raw_moment(4)},
                  {-(x() * fv(0))}, {x() * (1.0 / std::sqrt(2.0))},
                  LocalBound{[](int k) { return static_cast<double>(k); }, 1.0});
  auto lyap = scalar_lyapunov(pow(x(), 4), 4.0 * pow(x(), 3), 12.0 * pow(x(), 2), pow(x(), 4), -1.0, 4.0,
                              [](int k) { return std::pow(static_cast<double>(k), 4); }, LyapunovMode::Integrated);
  return Scenario{"example1-quartic", {}, std::move(model), std::move(lyap), {}};
}

Scenario example2(const std::map<std::string, double>& p) {
  const double alpha = p.at("alpha"), sigma = p.at("sigma");
  const double m = -(6.0 * sigma * sigma - 4.0 + 4.0 * alpha);
  if (!(m > 0.0))
    throw InvalidArgument("example2-nonlinear needs m = -(6 sigma^2 - 4 + 4 alpha) > 0, got " + std::to_string(m));
  if (!(sigma >= 0.0)) throw InvalidArgument("example2-nonlinear needs sigma >= 0");
  // u = x - alpha * mean
  const Expr u = x() - fv(0);
  ModelSpec model("example2-nonlinear", DomainLadder::full_space(1), 1, {FunctionalTag::linear_combination(alpha)},
                  {-pow(u, 3)}, {sigma * pow(u, 2)},
                  LocalBound{[alpha, sigma](int k) { return std::pow(k + std::abs(alpha), 3) * std::max(1.0, sigma); },
                             3.0});
  const double spread = std::pow(1.0 + std::abs(alpha) / (1.0 - alpha), 4);
  auto lyap = scalar_lyapunov(pow(u, 4), 4.0 * pow(u, 3), 12.0 * pow(u, 2), pow(x(), 4) * (1.0 / spread), -m, m,
                              [spread](int k) { return std::pow(static_cast<double>(k), 4) / spread; },
                              LyapunovMode::Integrated);
  lyap.dmu = {SeparableKernel{{{-4.0 * alpha * pow(u, 3), Expr(1.0)}}}};
  lyap.dydmu = {SeparableKernel{}};
  return Scenario{"example2-nonlinear", p, std::move(model), std::move(lyap), {}};
}

Scenario example3(const std::map<std::string, double>& p) {
  const double kap = p.at("kappa"), theta = p.at("theta"), sigma = p.at("sigma"), alpha = p.at("alpha");
  if (!(kap > 0.0 && theta > 0.0 && sigma > 0.0)) throw InvalidArgument("example3-cir needs kappa, theta, sigma > 0");
  if (kap * theta < sigma * sigma) throw InvalidArgument("example3-cir needs kappa * theta >= sigma^2");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("example3-cir needs alpha in (0, 1]");
  const double shift = sigma * sigma / (4.0 * kap);
  // b = (kappa/2) [ (max(ES, theta) - sigma^2/(4 kappa)) / x - x ],  sigma(x) = sigma / 2
  const Expr drift = (0.5 * kap) * ((max(fv(0), theta) - shift) * recip(x()) - x());
  ModelSpec model("example3-cir", DomainLadder::positive_orthant(1), 1, {FunctionalTag::expected_shortfall(alpha)},
                  {drift}, {Expr(0.5 * sigma)},
                  LocalBound{[=](int k) { return std::max(kap * k * (theta + shift + 1.0) / 2.0, sigma / 2.0); }, 1.0});
  const Expr v = pow(x(), 2) + pow(recip(x()), 2);
  auto lyap = scalar_lyapunov(v, 2.0 * x() - 2.0 * pow(recip(x()), 3), 2.0 + 6.0 * pow(recip(x()), 4), v,
                              std::max(kap, 0.5), kap * kap / 2.0 + kap * theta,
                              [](int k) {
                                const double kd = static_cast<double>(k);
                                return kd * kd + 1.0 / (kd * kd);
                              },
                              LyapunovMode::Integrated);
  return Scenario{"example3-cir", p, std::move(model), std::move(lyap), {}};
}

Scenario linear_meanfield(const std::map<std::string, double>& p) {
  const double a = p.at("a"), b = p.at("b"), sigma = p.at("sigma");
  ModelSpec model("linear-meanfield", DomainLadder::full_space(1), 1, {FunctionalTag::mean()}, {a * x() + b * fv(0)},
                  {Expr(sigma)},
                  LocalBound{[=](int k) { return std::max({std::abs(a) * k, std::abs(b), std::abs(sigma)}); }, 1.0});
  auto lyap = scalar_lyapunov(pow(x(), 2), 2.0 * x(), Expr(2.0), pow(x(), 2), 2.0 * a + 2.0 * std::abs(b),
                              sigma * sigma, [](int k) { return static_cast<double>(k) * k; },
                              LyapunovMode::Integrated);
  std::vector<ContractionCertificate> certs{
      {LyapunovMode::Pointwise, 2.0 * a + std::abs(b), std::abs(b)},
      {LyapunovMode::Integrated, 0.0, 2.0 * a + 2.0 * std::max(b, 0.0)},
  };
  return Scenario{"linear-meanfield", p, std::move(model), std::move(lyap), std::move(certs)};
}

Scenario scheutzow_clamp(const std::map<std::string, double>& p) {
  const double sigma = p.at("sigma");
  // B(x, x') = -x + clamp(x', -1, 1) with x' = E x^3
  ModelSpec model("scheutzow-clamp", DomainLadder::full_space(1), 1, {FunctionalTag::raw_moment(3)},
                  {-x() + clamp(fv(0), -1.0, 1.0)}, {Expr(sigma)},
                  LocalBound{[sigma](int k) { return std::max(k + 1.0, std::abs(sigma)); }, 0.0});
  auto lyap = scalar_lyapunov(pow(x(), 2), 2.0 * x(), Expr(2.0), pow(x(), 2), -1.0, 1.0 + sigma * sigma,
                              [](int k) { return static_cast<double>(k) * k; }, LyapunovMode::Pointwise);
  return Scenario{"scheutzow-clamp", p, std::move(model), std::move(lyap), {}};
}

}  // namespace

std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : defaults_table()) out.push_back(k);
  return out;
}

std::map<std::string, double> scenario_defaults(const std::string& name) {
  const auto& t = defaults_table();
  auto it = t.find(name);
  if (it == t.end()) throw InvalidArgument("unknown scenario '" + name + "'");
  return it->second;
}

Scenario builtin_scenario(const std::string& name, const std::map<std::string, double>& params) {
  const auto p = merge(name, params);
  Scenario s = [&] {
    if (name == "example1-quartic") return example1();
    if (name == "example2-nonlinear") return example2(p);
    if (name == "example3-cir") return example3(p);
    if (name == "linear-meanfield") return linear_meanfield(p);
    return scheutzow_clamp(p);
  }();
  s.params = p;
  s.lyapunov.validate(s.model);
  return s;
}

}  // namespace mkv
