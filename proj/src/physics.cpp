#include "blpinn/physics.hpp"

#include <cmath>

#include "blpinn/errors.hpp"

namespace blpinn {

void PdeParams::validate() const {
  if (swc < 0.0 || swc >= 1.0 || sor < 0.0 || sor >= 1.0)
    throw ConfigError("swc and sor must lie in [0, 1)");
  if (swc + sor >= 1.0) throw ConfigError("swc + sor must be < 1");
  if (m <= 0.0) throw ConfigError("mobility ratio m must be positive");
  if (m0 <= 0.0) throw ConfigError("m0 must be positive");
  if (kro0 <= 0.0 || kro0 > 1.0) throw ConfigError("kro0 must lie in (0, 1]");
  if (n_o < 1.0 || n_w < 1.0) throw ConfigError("Corey exponents must be >= 1");
  if (epsilon < 0.0) throw ConfigError("epsilon must be >= 0");
}

FluxKind flux_kind_from_name(const std::string& name) {
  if (name == "corey") return FluxKind::Corey;
  if (name == "gravity") return FluxKind::Gravity;
  if (name == "linear") return FluxKind::Linear;
  throw ConfigError("unknown flux kind: " + name);
}

std::string flux_kind_name(FluxKind k) {
  switch (k) {
  case FluxKind::Corey: return "corey";
  case FluxKind::Gravity: return "gravity";
  case FluxKind::Linear: return "linear";
  }
  return "corey";
}

Var map_saturation(Tape& tape, Var u) {
  return tape.mul(tape.sigmoid(u), 0.45);
}

Var map_mobility(Tape& tape, Var u) { return tape.exp(u); }

double inverse_map_saturation(double s) {
  double p = s / 0.45;
  p = std::min(std::max(p, 1e-9), 1.0 - 1e-9);
  return std::log(p / (1.0 - p));
}

double inverse_map_mobility(double m) { return std::log(m); }

namespace {

int integer_exponent(double n, const char* name) {
  const double r = std::round(n);
  if (std::abs(n - r) > 1e-12 || r < 1.0)
    throw ConfigError(std::string(name) +
                      " must be a positive integer for tape evaluation");
  return static_cast<int>(r);
}

// x^n for small positive integer n, recorded with square/mul only so the
// expression stays defined for any real x.
Var ipow(Tape& tape, Var x, int n) {
  if (n == 1) return x;
  if (n == 2) return tape.square(x);
  if (n % 2 == 0) return tape.square(ipow(tape, x, n / 2));
  return tape.mul(x, ipow(tape, x, n - 1));
}

} // namespace

FluxVars bind_flux_vars(Tape& tape, const PdeParams& p,
                        std::span<const Var> u) {
  FluxVars v;
  std::size_t k = 0;
  v.swc = p.swc_learnable ? map_saturation(tape, u[k++])
                          : tape.constant(p.swc);
  v.sor = p.sor_learnable ? map_saturation(tape, u[k++])
                          : tape.constant(p.sor);
  v.m = p.m_learnable ? map_mobility(tape, u[k++]) : tape.constant(p.m);
  if (k != u.size())
    throw ConfigError("bind_flux_vars: learnable count mismatch");
  v.ng_sin_theta = tape.constant(p.ng_sin_theta);
  v.kro0 = tape.constant(p.kro0);
  v.m0 = tape.constant(p.m0);
  v.n_o = integer_exponent(p.n_o, "n_o");
  v.n_w = integer_exponent(p.n_w, "n_w");
  return v;
}

Var frac_flow_corey(Tape& tape, Var s, const FluxVars& p) {
  const Var dw = tape.sub(s, p.swc);
  const Var doil = tape.sub(tape.sub(tape.constant(1.0), s), p.sor);
  const Var num = tape.square(dw);
  const Var den =
      tape.add(tape.add(num, tape.div(tape.square(doil), p.m)), 1e-30);
  return tape.div(num, den);
}

Var frac_flow_gravity(Tape& tape, Var s, const FluxVars& p) {
  // S* = (s - swc)/(1 - sor - swc); written as a single rational function
  // B(1 - g kro0 A) / (B + A) with A = (1-S*)^n_o, B = m0 S*^n_w, whose
  // denominator stays positive for even exponents at any real S*.
  const Var one = tape.constant(1.0);
  const Var width = tape.sub(tape.sub(one, p.sor), p.swc);
  const Var sstar = tape.div(tape.sub(s, p.swc), width);
  const Var a = ipow(tape, tape.sub(one, sstar), p.n_o);
  const Var b = tape.mul(p.m0, ipow(tape, sstar, p.n_w));
  const Var num = tape.sub(one, tape.mul(tape.mul(p.ng_sin_theta, p.kro0), a));
  return tape.div(tape.mul(num, b), tape.add(b, a));
}

Var frac_flow(Tape& tape, Var s, FluxKind kind, const FluxVars& p) {
  switch (kind) {
  case FluxKind::Corey: return frac_flow_corey(tape, s, p);
  case FluxKind::Gravity: return frac_flow_gravity(tape, s, p);
  case FluxKind::Linear: return s;
  }
  return s;
}

double corey_flux(double s, const PdeParams& p) {
  const double dw = s - p.swc;
  const double doil = 1.0 - s - p.sor;
  const double num = dw * dw;
  return num / (num + doil * doil / p.m + 1e-30);
}

double gravity_flux(double s, const PdeParams& p) {
  const double sstar = (s - p.swc) / (1.0 - p.sor - p.swc);
  if (sstar <= 0.0) return 0.0;
  if (sstar >= 1.0) return 1.0;
  const double a = std::pow(1.0 - sstar, p.n_o);
  const double b = p.m0 * std::pow(sstar, p.n_w);
  return (1.0 - p.ng_sin_theta * p.kro0 * a) * b / (b + a);
}

std::function<double(double)> flux_fn(FluxKind kind, const PdeParams& p) {
  switch (kind) {
  case FluxKind::Corey:
    return [p](double s) { return corey_flux(s, p); };
  case FluxKind::Gravity:
    return [p](double s) { return gravity_flux(s, p); };
  case FluxKind::Linear:
    return [](double s) { return s; };
  }
  return [](double s) { return s; };
}

ResidualParts residual_of(Tape& tape, Var s_hat, Var x, Var t, FluxKind kind,
                          const FluxVars& p, double epsilon) {
  // Flux derivative first: its adjoint sweep spans only the flux subgraph.
  const Var f = frac_flow(tape, s_hat, kind, p);
  const std::int32_t s_id[] = {s_hat.id};
  const Var fprime = tape.gradient_as_vars(f, s_id)[0];

  const std::int32_t xt[] = {x.id, t.id};
  const auto grads = tape.gradient_as_vars(s_hat, xt);
  const Var s_x = grads[0], s_t = grads[1];

  Var r = tape.add(s_t, tape.mul(fprime, s_x));
  if (epsilon != 0.0) {
    const std::int32_t x_id[] = {x.id};
    const Var s_xx = tape.gradient_as_vars(s_x, x_id)[0];
    r = tape.sub(r, tape.mul(tape.constant(epsilon), s_xx));
  }
  return ResidualParts{r, s_hat, s_x, s_t};
}

ResidualParts residual(Tape& tape, const DenseNet& net, Var x, Var t,
                       FluxKind kind, const FluxVars& p, double epsilon) {
  const Var in[] = {x, t};
  const Var s_hat = net.forward(tape, in);
  return residual_of(tape, s_hat, x, t, kind, p, epsilon);
}

} // namespace blpinn
