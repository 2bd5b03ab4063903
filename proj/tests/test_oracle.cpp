#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "blpinn/errors.hpp"
#include "blpinn/io.hpp"
#include "blpinn/oracle.hpp"
#include "blpinn/physics.hpp"
#include "doctest.h"

using namespace blpinn;

namespace {

SolutionProfile corey_profile() {
  PdeParams p; // swc = sor = 0, m = 2
  return riemann_solve(flux_fn(FluxKind::Corey, p), 1.0, 0.0);
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
    std::filesystem::remove(path);
  }
  ~TempFile() { std::filesystem::remove(path); }
};

} // namespace

TEST_CASE("classic waterflood profile: rarefaction into tangent shock") {
  const SolutionProfile profile = corey_profile();
  REQUIRE(profile.segments.size() >= 2);

  // Front saturation from the tangency condition 3 S^2 = 1.
  const double s_front = 1.0 / std::sqrt(3.0);
  const WaveSegment& shock = profile.segments.back();
  CHECK(shock.kind == SegmentKind::Shock);
  CHECK(std::abs(shock.s_before - s_front) < 1e-9);
  CHECK(shock.s_after == doctest::Approx(0.0));

  // Tangency: shock speed equals f'(s_front) and the chord slope.
  PdeParams p;
  const auto f = flux_fn(FluxKind::Corey, p);
  CHECK(shock.xi_lo == doctest::Approx(shock.xi_hi));
  CHECK(shock.xi_lo ==
        doctest::Approx(flux_derivative(f, s_front)).epsilon(1e-7));
  CHECK(shock.xi_lo ==
        doctest::Approx(f(s_front) / s_front).epsilon(1e-9));

  const std::vector<double> speeds = profile.shock_speeds();
  REQUIRE(speeds.size() == 1);
  double x_shock = 0.0;
  REQUIRE(profile.shock_position(0.4, 0.0, x_shock));
  CHECK(x_shock == doctest::Approx(0.4 * speeds[0]).epsilon(1e-12));
}

TEST_CASE("profile evaluation is self-similar and monotone") {
  const SolutionProfile profile = corey_profile();
  CHECK(profile.evaluate(-0.1, 0.5) == 1.0);
  CHECK(profile.evaluate(0.9, 0.5) == 0.0);
  CHECK(profile.evaluate(0.2, 0.5) ==
        doctest::Approx(profile.evaluate(0.4, 1.0)).epsilon(1e-12));

  double prev = 2.0;
  for (int i = 0; i <= 200; ++i) {
    const double s = profile.evaluate(i / 200.0, 0.5);
    CHECK(s <= prev + 1e-12);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    prev = s;
  }

  // t = 0 reproduces the step data.
  CHECK(profile.evaluate(-0.01, 0.0) == 1.0);
  CHECK(profile.evaluate(0.01, 0.0) == 0.0);
}

TEST_CASE("segments are ordered by wave speed in both orientations") {
  PdeParams p;
  const auto f = flux_fn(FluxKind::Corey, p);
  for (const auto& [sl, sr] : std::vector<std::pair<double, double>>{
           {1.0, 0.0}, {0.0, 1.0}, {0.8, 0.2}, {0.1, 0.9}}) {
    const SolutionProfile profile = riemann_solve(f, sl, sr);
    double xi = -1e300;
    for (const WaveSegment& seg : profile.segments) {
      CHECK(seg.xi_lo >= xi - 1e-12);
      CHECK(seg.xi_hi >= seg.xi_lo - 1e-12);
      xi = seg.xi_hi;
    }
    // End states match the data.
    CHECK(profile.evaluate(-100.0, 1.0) == doctest::Approx(sl));
    CHECK(profile.evaluate(100.0, 1.0) == doctest::Approx(sr));
  }
}

TEST_CASE("linear flux gives a single contact discontinuity") {
  PdeParams p;
  const SolutionProfile profile =
      riemann_solve(flux_fn(FluxKind::Linear, p), 1.0, 0.0);
  REQUIRE(profile.segments.size() == 1);
  CHECK(profile.segments[0].kind == SegmentKind::Shock);
  CHECK(profile.segments[0].xi_lo == doctest::Approx(1.0));
  CHECK(profile.evaluate(0.49, 0.5) == 1.0);
  CHECK(profile.evaluate(0.51, 0.5) == 0.0);
}

TEST_CASE("equal states produce a constant profile") {
  PdeParams p;
  const SolutionProfile profile =
      riemann_solve(flux_fn(FluxKind::Corey, p), 0.4, 0.4);
  CHECK(profile.shock_speeds().empty());
  CHECK(profile.evaluate(0.3, 0.7) == 0.4);
}

TEST_CASE("godunov solver conserves mass to round-off") {
  PdeParams p;
  FvConfig cfg;
  cfg.nx = 120;
  cfg.t_end = 0.5;
  cfg.snapshot_times = {0.25, 0.5};
  const GridSolution g = fv_solve(flux_fn(FluxKind::Corey, p),
                                  std::vector<double>(cfg.nx, 0.0), 1.0, cfg);

  REQUIRE(g.snapshots.size() == 2);
  for (std::size_t k = 0; k < g.snapshots.size(); ++k) {
    double mass = 0.0; // initial mass is zero: s(x, 0) = 0 on the grid
    for (double s : g.snapshots[k]) mass += s * g.dx;
    CHECK(mass ==
          doctest::Approx(g.influx[k] - g.outflux[k]).epsilon(1e-12));
  }
}

TEST_CASE("godunov profile stays monotone and converges to the oracle") {
  PdeParams p;
  const SolutionProfile profile = corey_profile();
  FvConfig cfg;
  cfg.nx = 200;
  cfg.t_end = 0.5;
  cfg.snapshot_times = {0.5};
  const GridSolution g = fv_solve(flux_fn(FluxKind::Corey, p),
                                  std::vector<double>(cfg.nx, 0.0), 1.0, cfg);

  const std::vector<double>& s = g.snapshots[0];
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] <= s[i - 1] + 1e-12);

  const std::vector<double> xs = g.cell_centers();
  double l1 = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    l1 += std::abs(s[i] - profile.evaluate(xs[i], 0.5)) * g.dx;
  CHECK(l1 < 0.05);
}

TEST_CASE("finite-volume config is validated") {
  PdeParams p;
  const auto f = flux_fn(FluxKind::Corey, p);
  FvConfig cfg;
  cfg.nx = 0;
  CHECK_THROWS_AS((void)fv_solve(f, {}, 1.0, cfg), ConfigError);
  cfg = FvConfig{};
  cfg.cfl = 1.5;
  CHECK_THROWS_AS(
      (void)fv_solve(f, std::vector<double>(cfg.nx, 0.0), 1.0, cfg),
      ConfigError);
}

TEST_CASE("sampling schemes draw from their advertised regions") {
  const SolutionProfile profile = corey_profile();
  SamplingConfig cfg;
  cfg.n = 200;
  cfg.seed = 99;

  SUBCASE("random covers the full window and labels exactly") {
    const SampleSet set = sample_training_data(profile, cfg);
    REQUIRE(set.n() == 200);
    // Interior schemes still carry the condition and collocation pools.
    CHECK(set.n0() == 50);
    CHECK(set.nb() == 50);
    CHECK(set.nr() == 10000);
    for (const Sample& s : set.data) {
      CHECK(s.x >= 0.0);
      CHECK(s.x <= 1.0);
      CHECK(s.t >= 0.0);
      CHECK(s.t <= 1.0);
      CHECK(s.s == profile.evaluate(s.x, s.t));
    }
  }

  SUBCASE("fixed wells only sample well columns") {
    cfg.scheme = SamplingScheme::FixedWells;
    const SampleSet set = sample_training_data(profile, cfg);
    for (const Sample& s : set.data) {
      const bool at_well =
          std::any_of(cfg.wells.begin(), cfg.wells.end(),
                      [&](double w) { return w == s.x; });
      CHECK(at_well);
    }
  }

  SUBCASE("early time truncates the horizon") {
    cfg.scheme = SamplingScheme::EarlyTime;
    const SampleSet set = sample_training_data(profile, cfg);
    for (const Sample& s : set.data) CHECK(s.t <= cfg.early_t_max);
  }

  SUBCASE("boundary scheme has no interior data") {
    cfg.scheme = SamplingScheme::BoundaryOnly;
    cfg.n0 = 40;
    cfg.nb = 30;
    cfg.nr = 500;
    const SampleSet set = sample_training_data(profile, cfg);
    CHECK(set.n() == 0);
    CHECK(set.n0() == 40);
    CHECK(set.nb() == 30);
    CHECK(set.nr() == 500);
    int side0 = 0;
    for (const BoundaryPoint& b : set.boundary) {
      if (b.side == 0) ++side0;
      CHECK(b.t > 0.0);
      CHECK(b.t <= 1.0);
    }
    CHECK(side0 == 15);
    for (const InitialPoint& q : set.initial)
      CHECK(q.s == profile.evaluate(q.x, 0.0));
  }
}

TEST_CASE("initial-only noise leaves other labels exact") {
  const SolutionProfile profile = corey_profile();
  SamplingConfig cfg;
  cfg.scheme = SamplingScheme::BoundaryOnly;
  cfg.n0 = 50;
  cfg.nb = 20;
  cfg.nr = 10;
  cfg.noise_sigma = std::sqrt(0.05);
  cfg.noise_initial_only = true;
  cfg.seed = 3;
  const SampleSet set = sample_training_data(profile, cfg);

  int perturbed = 0;
  for (const InitialPoint& q : set.initial)
    if (q.s != profile.evaluate(q.x, 0.0)) ++perturbed;
  CHECK(perturbed > 40);
  for (const BoundaryPoint& b : set.boundary) {
    const double x = b.side == 0 ? 0.0 : 1.0;
    CHECK(b.s == profile.evaluate(x, b.t));
  }
}

TEST_CASE("sample sets round trip through CSV byte-stably") {
  const SolutionProfile profile = corey_profile();
  SamplingConfig cfg;
  cfg.scheme = SamplingScheme::BoundaryOnly;
  cfg.n0 = 7;
  cfg.nb = 5;
  cfg.nr = 11;
  cfg.seed = 12;
  const SampleSet set = sample_training_data(profile, cfg);

  TempFile f1("blpinn_samples_a.csv"), f2("blpinn_samples_b.csv");
  save_samples(set, f1.path);
  const SampleSet loaded = load_samples(f1.path);
  REQUIRE(loaded.n0() == set.n0());
  REQUIRE(loaded.nb() == set.nb());
  REQUIRE(loaded.nr() == set.nr());
  CHECK(loaded.boundary[0].side == set.boundary[0].side);
  save_samples(loaded, f2.path);
  CHECK(read_text_file(f1.path) == read_text_file(f2.path));
}

TEST_CASE("sampling is deterministic per seed") {
  const SolutionProfile profile = corey_profile();
  SamplingConfig cfg;
  cfg.n = 25;
  cfg.seed = 1234;
  const SampleSet a = sample_training_data(profile, cfg);
  const SampleSet b = sample_training_data(profile, cfg);
  REQUIRE(a.n() == b.n());
  for (std::size_t i = 0; i < a.n(); ++i) {
    CHECK(a.data[i].x == b.data[i].x);
    CHECK(a.data[i].s == b.data[i].s);
  }
}

TEST_CASE("grid solutions serialize with one row per cell per time") {
  PdeParams p;
  FvConfig cfg;
  cfg.nx = 10;
  cfg.t_end = 0.2;
  cfg.snapshot_times = {0.1, 0.2};
  const GridSolution g = fv_solve(flux_fn(FluxKind::Corey, p),
                                  std::vector<double>(cfg.nx, 0.0), 1.0, cfg);
  TempFile f("blpinn_grid.csv");
  save_grid_solution(g, f.path);
  const std::string text = read_text_file(f.path);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 2 * 10);
}
