#include "blpinn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "blpinn/errors.hpp"
#include "blpinn/io.hpp"
#include "blpinn/rng.hpp"

namespace blpinn {

double flux_derivative(const std::function<double(double)>& f, double s) {
  const double h = 1e-4;
  return (-f(s + 2 * h) + 8 * f(s + h) - 8 * f(s - h) + f(s - 2 * h)) /
         (12 * h);
}

namespace {

double cross(double ox, double oy, double ax, double ay, double bx,
             double by) {
  return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox);
}

// Root of g(S) = f'(S)(S - sp) - (f(S) - fp) near s_guess: the point where
// the chord from (sp, fp) is tangent to the flux curve.
double refine_tangent(const std::function<double(double)>& f, double sp,
                      double fp, double s_guess, double step, double lo,
                      double hi) {
  const auto g = [&](double s) {
    return flux_derivative(f, s) * (s - sp) - (f(s) - fp);
  };
  double a = std::max(lo, s_guess - step);
  double b = std::min(hi, s_guess + step);
  double ga = g(a), gb = g(b);
  for (int widen = 0; widen < 8 && ga * gb > 0.0; ++widen) {
    a = std::max(lo, a - step);
    b = std::min(hi, b + step);
    ga = g(a);
    gb = g(b);
  }
  if (ga * gb > 0.0) return s_guess; // no bracket; keep the grid vertex
  for (int it = 0; it < 100 && (b - a) > 1e-13; ++it) {
    const double mid = 0.5 * (a + b);
    const double gm = g(mid);
    if (ga * gm <= 0.0) {
      b = mid;
      gb = gm;
    } else {
      a = mid;
      ga = gm;
    }
  }
  return 0.5 * (a + b);
}

struct Run {
  bool chord;
  double s_lo, s_hi;
};

} // namespace

SolutionProfile riemann_solve(std::function<double(double)> flux,
                              double s_left, double s_right) {
  SolutionProfile profile;
  profile.s_left = s_left;
  profile.s_right = s_right;
  profile.flux = std::move(flux);
  const auto& f = profile.flux;

  if (s_left == s_right) {
    profile.segments.push_back(
        WaveSegment{SegmentKind::Constant, s_left, s_left, 0.0, 0.0});
    return profile;
  }

  const double lo = std::min(s_left, s_right);
  const double hi = std::max(s_left, s_right);
  const bool upper = s_left > s_right; // concave envelope orientation
  constexpr int kGrid = 4096;
  const double ds = (hi - lo) / kGrid;

  std::vector<double> S(kGrid + 1), F(kGrid + 1);
  for (int i = 0; i <= kGrid; ++i) {
    S[i] = lo + ds * i;
    F[i] = f(S[i]);
    if (!std::isfinite(F[i]))
      throw std::runtime_error("flux not finite at S=" + fmt17(S[i]));
  }

  // Monotone-chain envelope over the sampled curve. Upper (concave)
  // envelopes pop non-right turns, lower (convex) pop non-left turns.
  std::vector<int> hull;
  for (int i = 0; i <= kGrid; ++i) {
    while (hull.size() >= 2) {
      const int o = hull[hull.size() - 2];
      const int a = hull[hull.size() - 1];
      const double c = cross(S[o], F[o], S[a], F[a], S[i], F[i]);
      if (upper ? (c >= 0.0) : (c <= 0.0))
        hull.pop_back();
      else
        break;
    }
    hull.push_back(i);
  }

  // Collapse hull edges into curve runs (rarefactions) and chords (shocks).
  std::vector<Run> runs;
  for (std::size_t e = 0; e + 1 < hull.size(); ++e) {
    const int i0 = hull[e], i1 = hull[e + 1];
    const bool curve = (i1 - i0) == 1;
    if (curve && !runs.empty() && !runs.back().chord)
      runs.back().s_hi = S[i1];
    else
      runs.push_back(Run{!curve, S[i0], S[i1]});
  }

  // Refine chord endpoints that touch the curve tangentially. An endpoint
  // adjacent to a rarefaction run is a tangency; an endpoint at the data
  // states is fixed.
  for (std::size_t k = 0; k < runs.size(); ++k) {
    if (!runs[k].chord) continue;
    const bool lo_tangent = k > 0 && !runs[k - 1].chord;
    const bool hi_tangent = k + 1 < runs.size() && !runs[k + 1].chord;
    for (int sweep = 0; sweep < (lo_tangent && hi_tangent ? 40 : 1);
         ++sweep) {
      double moved = 0.0;
      if (lo_tangent) {
        const double anchor = runs[k].s_hi;
        const double s =
            refine_tangent(f, anchor, f(anchor), runs[k].s_lo, ds, lo, hi);
        moved = std::max(moved, std::abs(s - runs[k].s_lo));
        runs[k].s_lo = s;
        runs[k - 1].s_hi = s;
      }
      if (hi_tangent) {
        const double anchor = runs[k].s_lo;
        const double s =
            refine_tangent(f, anchor, f(anchor), runs[k].s_hi, ds, lo, hi);
        moved = std::max(moved, std::abs(s - runs[k].s_hi));
        runs[k].s_hi = s;
        runs[k + 1].s_lo = s;
      }
      if (moved < 1e-13) break;
    }
  }

  // Emit segments walking from the left state to the right state, which
  // makes wave speeds strictly increasing.
  const auto emit = [&](const Run& r, double s_before, double s_after) {
    if (std::abs(s_before - s_after) < 1e-12) return;
    if (r.chord) {
      const double speed =
          (f(s_before) - f(s_after)) / (s_before - s_after);
      profile.segments.push_back(
          WaveSegment{SegmentKind::Shock, s_before, s_after, speed, speed});
    } else {
      profile.segments.push_back(WaveSegment{
          SegmentKind::Rarefaction, s_before, s_after,
          flux_derivative(f, s_before), flux_derivative(f, s_after)});
    }
  };
  if (upper) {
    for (auto it = runs.rbegin(); it != runs.rend(); ++it)
      emit(*it, it->s_hi, it->s_lo);
  } else {
    for (const Run& r : runs) emit(r, r.s_lo, r.s_hi);
  }
  return profile;
}

double SolutionProfile::evaluate(double x, double t, double x0) const {
  if (t <= 0.0) return x < x0 ? s_left : s_right;
  if (segments.size() == 1 && segments[0].kind == SegmentKind::Constant)
    return s_left;
  const double xi = (x - x0) / t;

  for (const WaveSegment& seg : segments) {
    if (xi < seg.xi_lo)
      return seg.s_before;
    if (xi <= seg.xi_hi) {
      if (seg.kind == SegmentKind::Shock) return seg.s_after;
      // invert f'(S) = xi over the fan; f' is monotone along it
      double a = seg.s_before, b = seg.s_after;
      double ga = flux_derivative(flux, a) - xi;
      for (int it = 0; it < 80 && std::abs(b - a) > 1e-13; ++it) {
        const double mid = 0.5 * (a + b);
        const double gm = flux_derivative(flux, mid) - xi;
        if (ga * gm <= 0.0)
          b = mid;
        else {
          a = mid;
          ga = gm;
        }
      }
      return 0.5 * (a + b);
    }
  }
  return s_right;
}

std::vector<double> SolutionProfile::shock_speeds() const {
  std::vector<double> out;
  for (const auto& seg : segments)
    if (seg.kind == SegmentKind::Shock) out.push_back(seg.xi_lo);
  return out;
}

bool SolutionProfile::shock_position(double t, double x0,
                                     double& x_out) const {
  double best_jump = -1.0;
  for (const auto& seg : segments) {
    if (seg.kind != SegmentKind::Shock) continue;
    const double jump = std::abs(seg.s_before - seg.s_after);
    if (jump > best_jump) {
      best_jump = jump;
      x_out = x0 + seg.xi_lo * t;
    }
  }
  return best_jump >= 0.0;
}

std::vector<double> GridSolution::cell_centers() const {
  std::vector<double> xs(nx);
  for (int i = 0; i < nx; ++i) xs[i] = x_min + dx * (i + 0.5);
  return xs;
}

GridSolution fv_solve(const std::function<double(double)>& flux,
                      std::vector<double> s_init, double inlet,
                      const FvConfig& cfg) {
  if (cfg.nx <= 0) throw ConfigError("fv_solve: nx must be positive");
  if (cfg.cfl <= 0.0 || cfg.cfl > 1.0)
    throw ConfigError("fv_solve: cfl must lie in (0, 1]");
  if (static_cast<int>(s_init.size()) != cfg.nx)
    throw ConfigError("fv_solve: s_init size != nx");

  GridSolution out;
  out.nx = cfg.nx;
  out.x_min = cfg.x_min;
  out.dx = (cfg.x_max - cfg.x_min) / cfg.nx;

  // State range is invariant under a monotone scheme; sample flux extrema
  // and interior critical points on it once.
  double smin = inlet, smax = inlet;
  for (double s : s_init) {
    smin = std::min(smin, s);
    smax = std::max(smax, s);
  }
  constexpr int kScan = 4096;
  const double span = smax > smin ? smax - smin : 1.0;
  std::vector<double> crit;
  double max_slope = 0.0;
  {
    double prev_f = flux(smin);
    double prev_df = 0.0;
    for (int i = 1; i <= kScan; ++i) {
      const double s = smin + span * i / kScan;
      const double fi = flux(s);
      const double df = fi - prev_f;
      max_slope = std::max(max_slope, std::abs(df) * kScan / span);
      if (i > 1 && df * prev_df < 0.0)
        crit.push_back(smin + span * (i - 1) / kScan);
      prev_f = fi;
      prev_df = df;
    }
  }
  if (max_slope <= 0.0) max_slope = 1.0;
  const double dt_max = cfg.cfl * out.dx / max_slope;

  const auto godunov = [&](double a, double b) {
    if (a == b) return flux(a);
    const double lo = std::min(a, b), hi = std::max(a, b);
    double fa = flux(a), fb = flux(b);
    if (a < b) {
      double m = std::min(fa, fb);
      for (double c : crit)
        if (c > lo && c < hi) m = std::min(m, flux(c));
      return m;
    }
    double m = std::max(fa, fb);
    for (double c : crit)
      if (c > lo && c < hi) m = std::max(m, flux(c));
    return m;
  };

  std::vector<double> s = std::move(s_init);
  std::vector<double> fluxes(cfg.nx + 1);
  std::vector<double> times = cfg.snapshot_times;
  if (times.empty()) times.push_back(cfg.t_end);
  std::sort(times.begin(), times.end());

  double t = 0.0, in_acc = 0.0, out_acc = 0.0;
  const auto advance_to = [&](double target) {
    while (t < target - 1e-15) {
      const double dt = std::min(dt_max, target - t);
      fluxes[0] = godunov(inlet, s[0]);
      for (int i = 1; i < cfg.nx; ++i) fluxes[i] = godunov(s[i - 1], s[i]);
      fluxes[cfg.nx] = godunov(s[cfg.nx - 1], s[cfg.nx - 1]);
      const double r = dt / out.dx;
      for (int i = 0; i < cfg.nx; ++i)
        s[i] -= r * (fluxes[i + 1] - fluxes[i]);
      in_acc += dt * fluxes[0];
      out_acc += dt * fluxes[cfg.nx];
      t += dt;
    }
  };

  for (double target : times) {
    if (target > cfg.t_end + 1e-12)
      throw ConfigError("fv_solve: snapshot time beyond t_end");
    advance_to(target);
    out.times.push_back(target);
    out.snapshots.push_back(s);
    out.influx.push_back(in_acc);
    out.outflux.push_back(out_acc);
  }
  return out;
}

void save_grid_solution(const GridSolution& g, const std::string& path) {
  std::ostringstream out;
  out << "t,x,s\n";
  const auto xs = g.cell_centers();
  for (std::size_t k = 0; k < g.times.size(); ++k)
    for (int i = 0; i < g.nx; ++i)
      out << fmt17(g.times[k]) << ',' << fmt17(xs[i]) << ','
          << fmt17(g.snapshots[k][i]) << "\n";
  write_text_file(path, out.str());
}

SamplingScheme scheme_from_name(const std::string& name) {
  if (name == "random") return SamplingScheme::Random;
  if (name == "fixed_wells") return SamplingScheme::FixedWells;
  if (name == "early_time") return SamplingScheme::EarlyTime;
  if (name == "boundary_only") return SamplingScheme::BoundaryOnly;
  throw ConfigError("unknown sampling scheme: " + name);
}

std::string scheme_name(SamplingScheme s) {
  switch (s) {
  case SamplingScheme::Random: return "random";
  case SamplingScheme::FixedWells: return "fixed_wells";
  case SamplingScheme::EarlyTime: return "early_time";
  case SamplingScheme::BoundaryOnly: return "boundary_only";
  }
  return "random";
}

SampleSet sample_training_data(const SolutionProfile& profile,
                               const SamplingConfig& cfg) {
  if (cfg.noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
  Rng rng(cfg.seed);
  SampleSet set;

  const auto label = [&](double x, double t, bool initial_line) {
    double s = profile.evaluate(x, t, cfg.x0);
    if (cfg.noise_sigma > 0.0 && (!cfg.noise_initial_only || initial_line))
      s += rng.normal(0.0, cfg.noise_sigma);
    return s;
  };

  // The scheme only places the n labeled interior points; every set also
  // carries n0 initial, nb boundary, and nr collocation points.
  switch (cfg.scheme) {
  case SamplingScheme::Random:
  case SamplingScheme::EarlyTime: {
    const double t_hi =
        cfg.scheme == SamplingScheme::EarlyTime ? cfg.early_t_max : cfg.t_max;
    for (int i = 0; i < cfg.n; ++i) {
      const double x = rng.uniform(cfg.x_min, cfg.x_max);
      const double t = rng.uniform(0.0, t_hi);
      set.data.push_back(Sample{x, t, label(x, t, false)});
    }
    break;
  }
  case SamplingScheme::FixedWells: {
    if (cfg.wells.empty())
      throw ConfigError("fixed_wells scheme needs a nonempty well list");
    for (int i = 0; i < cfg.n; ++i) {
      const double x = cfg.wells[rng.index(cfg.wells.size())];
      const double t = rng.uniform(0.0, cfg.t_max);
      set.data.push_back(Sample{x, t, label(x, t, false)});
    }
    break;
  }
  case SamplingScheme::BoundaryOnly:
    break;
  }

  for (int i = 0; i < cfg.n0; ++i) {
    const double x = rng.uniform(cfg.x_min, cfg.x_max);
    set.initial.push_back(InitialPoint{x, label(x, 0.0, true)});
  }
  for (int i = 0; i < cfg.nb; ++i) {
    const int side = i < (cfg.nb + 1) / 2 ? 0 : 1;
    const double x = side == 0 ? cfg.x_min : cfg.x_max;
    const double t = (1.0 - rng.uniform()) * cfg.t_max; // (0, t_max]
    set.boundary.push_back(BoundaryPoint{t, side, label(x, t, false)});
  }
  for (int i = 0; i < cfg.nr; ++i) {
    const double x = rng.uniform(cfg.x_min, cfg.x_max);
    const double t = rng.uniform(0.0, cfg.t_max);
    set.collocation.push_back(CollocationPoint{x, t});
  }
  return set;
}

void save_samples(const SampleSet& set, const std::string& path) {
  std::ostringstream out;
  out << "x,t,s,kind\n";
  for (const Sample& p : set.data)
    out << fmt17(p.x) << ',' << fmt17(p.t) << ',' << fmt17(p.s) << ",data\n";
  for (const InitialPoint& p : set.initial)
    out << fmt17(p.x) << ",0," << fmt17(p.s) << ",initial\n";
  // Boundary rows store the endpoint itself; side is recovered on load.
  for (const BoundaryPoint& p : set.boundary)
    out << (p.side == 0 ? "0," : "1,") << fmt17(p.t) << ',' << fmt17(p.s)
        << ",boundary\n";
  for (const CollocationPoint& p : set.collocation)
    out << fmt17(p.x) << ',' << fmt17(p.t) << ",0,collocation\n";
  write_text_file(path, out.str());
}

SampleSet load_samples(const std::string& path) {
  SampleSet set;
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || trim(line) != "x,t,s,kind")
    throw ConfigError(path + ": expected header x,t,s,kind");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cols = split(line, ',');
    if (cols.size() != 4)
      throw ConfigError(path + " line " + std::to_string(line_no) +
                        ": expected 4 columns");
    const std::string where = path + " line " + std::to_string(line_no);
    const double x = parse_double(cols[0], where);
    const double t = parse_double(cols[1], where);
    const double s = parse_double(cols[2], where);
    const std::string kind = trim(cols[3]);
    if (kind == "data") set.data.push_back({x, t, s});
    else if (kind == "initial") set.initial.push_back({x, s});
    else if (kind == "boundary")
      set.boundary.push_back({t, x > 0.5 ? 1 : 0, s});
    else if (kind == "collocation") set.collocation.push_back({x, t});
    else throw ConfigError(where + ": unknown kind '" + kind + "'");
  }
  return set;
}

} // namespace blpinn
