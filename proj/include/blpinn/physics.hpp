#pragma once

#include <functional>
#include <span>

#include "blpinn/network.hpp"
#include "blpinn/tape.hpp"

namespace blpinn {

// Transport-problem parameters. swc/sor/m may be promoted to trainable tape
// variables (see bind_flux_vars); the rest are fixed per run.
struct PdeParams {
  double swc = 0.0;          // connate water saturation
  double sor = 0.0;          // residual oil saturation
  double m = 2.0;            // end-point mobility ratio
  double ng_sin_theta = 0.0; // gravity group
  double kro0 = 1.0;         // end-point oil relative permeability
  double n_o = 2.0;          // Corey exponent, oil
  double n_w = 2.0;          // Corey exponent, water
  double m0 = 5.0;           // end-point mobility ratio, gravity form
  double epsilon = 0.0;      // diffusion coefficient
  bool swc_learnable = false;
  bool sor_learnable = false;
  bool m_learnable = false;

  void validate() const; // throws ConfigError on violated invariants
};

enum class FluxKind { Corey, Gravity, Linear };

FluxKind flux_kind_from_name(const std::string& name);
std::string flux_kind_name(FluxKind k);

// Tape-bound parameter set. Exponents stay plain integers: the gravity flux
// is recorded as a rational function whose denominator never vanishes for
// integer powers, which keeps training away from pow() domain errors.
struct FluxVars {
  Var swc, sor, m;
  Var ng_sin_theta, kro0, m0;
  int n_o = 2, n_w = 2;
};

// Unconstrained-to-constrained maps for learnable parameters.
Var map_saturation(Tape& tape, Var u); // 0.45 * sigmoid(u), keeps swc+sor<1
Var map_mobility(Tape& tape, Var u);   // exp(u), keeps m>0
double inverse_map_saturation(double s);
double inverse_map_mobility(double m);

// Records fixed fields as constants; learnable fields consume entries of
// `u` (order: swc, sor, m, flagged ones only) through their maps.
FluxVars bind_flux_vars(Tape& tape, const PdeParams& p, std::span<const Var> u);

Var frac_flow_corey(Tape& tape, Var s, const FluxVars& p);
Var frac_flow_gravity(Tape& tape, Var s, const FluxVars& p);
Var frac_flow(Tape& tape, Var s, FluxKind kind, const FluxVars& p);

// Plain-double fractional flow for the oracle side. The gravity form takes
// its limits (0 below the mobile range, 1 above) outside S* in [0,1].
double corey_flux(double s, const PdeParams& p);
double gravity_flux(double s, const PdeParams& p);
std::function<double(double)> flux_fn(FluxKind kind, const PdeParams& p);

struct ResidualParts {
  Var r;    // S_t + f'(S) S_x - eps S_xx
  Var s;    // network saturation
  Var s_x;
  Var s_t;
};

// PDE residual for an already-recorded saturation node s_hat(x, t, ...).
// x and t must be Input leaves recorded immediately before the saturation
// subgraph so the derivative sweeps stay local.
ResidualParts residual_of(Tape& tape, Var s_hat, Var x, Var t, FluxKind kind,
                          const FluxVars& p, double epsilon);

// Convenience: forwards net([x, t]) and builds the residual.
ResidualParts residual(Tape& tape, const DenseNet& net, Var x, Var t,
                       FluxKind kind, const FluxVars& p, double epsilon);

} // namespace blpinn
