#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "blpinn/samples.hpp"

namespace blpinn {

enum class SegmentKind { Constant, Shock, Rarefaction };

// One wave of the self-similar profile. Saturations are ordered by
// increasing xi = x/t: s_before is the state just below xi_lo, s_after the
// state just above xi_hi. For shocks xi_lo == xi_hi == speed.
struct WaveSegment {
  SegmentKind kind;
  double s_before, s_after;
  double xi_lo, xi_hi;
};

// Self-similar entropy solution of the Riemann problem, evaluable at any
// (x, t). Segments are ordered by strictly increasing speed.
struct SolutionProfile {
  double s_left = 0.0, s_right = 0.0;
  std::vector<WaveSegment> segments;
  std::function<double(double)> flux;

  double evaluate(double x, double t, double x0 = 0.0) const;
  std::vector<double> shock_speeds() const;
  // x-position of the strongest shock at time t (largest saturation jump);
  // returns false if the profile has no shock.
  bool shock_position(double t, double x0, double& x_out) const;
};

// 5-point central difference of a flux function; accuracy ~1e-12 for
// smooth f, good enough for 1e-9 front-saturation targets.
double flux_derivative(const std::function<double(double)>& f, double s);

// Entropy solution via the convex-hull (Welge/Oleinik) construction:
// upper concave envelope of the flux on [s_right, s_left] when
// s_left > s_right, lower convex envelope in the reverse case. Envelope
// built on a 4096-point grid, tangency points refined by bisection to
// 1e-12 in saturation.
SolutionProfile riemann_solve(std::function<double(double)> flux,
                              double s_left, double s_right);

struct FvConfig {
  int nx = 400;
  double cfl = 0.9;
  double t_end = 1.0;
  std::vector<double> snapshot_times;
  double x_min = 0.0, x_max = 1.0;
};

struct GridSolution {
  int nx = 0;
  double dx = 0.0;
  double x_min = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> snapshots; // cell averages per time
  // Cumulative boundary flux integrals at each snapshot; mass balance
  // holds exactly: sum(s)*dx - initial mass == influx - outflux.
  std::vector<double> influx, outflux;

  std::vector<double> cell_centers() const;
};

// First-order Godunov finite-volume solver. Inlet ghost cell fixed at
// `inlet`, outflow ghost cell copies the last cell. Interface flux uses
// the min/max-over-interval rule, so non-monotone (gravity) fluxes work.
GridSolution fv_solve(const std::function<double(double)>& flux,
                      std::vector<double> s_init, double inlet,
                      const FvConfig& cfg);

// t,x,s CSV, one row per cell per snapshot.
void save_grid_solution(const GridSolution& g, const std::string& path);

enum class SamplingScheme { Random, FixedWells, EarlyTime, BoundaryOnly };

SamplingScheme scheme_from_name(const std::string& name);
std::string scheme_name(SamplingScheme s);

struct SamplingConfig {
  SamplingScheme scheme = SamplingScheme::Random;
  int n = 1000;     // interior data points, placed per the scheme
  int n0 = 50;      // initial-line points
  int nb = 50;      // boundary-line points, split between x=0 and x=1
  int nr = 10000;   // collocation points
  double noise_sigma = 0.0;
  bool noise_initial_only = false; // noise only on initial-line labels
  // Observation wells cluster around the injector at x=0; the far field
  // stays unobserved, which is what degrades this scheme versus random.
  std::vector<double> wells = {0.05, 0.1, 0.15, 0.2, 0.25};
  double early_t_max = 1.0 / 3.0;
  double x_min = 0.0, x_max = 1.0;
  double t_max = 1.0;
  double x0 = 0.0; // step location passed to evaluate()
  std::uint64_t seed = 0;
};

// Draws a SampleSet from the analytic profile per the configured scheme.
SampleSet sample_training_data(const SolutionProfile& profile,
                               const SamplingConfig& cfg);

} // namespace blpinn
