#include <cmath>
#include <filesystem>
#include <vector>

#include "blpinn/errors.hpp"
#include "blpinn/io.hpp"
#include "blpinn/pigan.hpp"
#include "blpinn/rng.hpp"
#include "doctest.h"

using namespace blpinn;

namespace {

double softplus_ref(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

std::vector<Var> as_inputs(Tape& tape, const std::vector<double>& vals) {
  std::vector<Var> out;
  for (double v : vals) out.push_back(tape.input(v));
  return out;
}

double disc_loss_value(const std::vector<double>& real,
                       const std::vector<double>& fake, bool swap) {
  Tape tape;
  const std::vector<Var> r = as_inputs(tape, real);
  const std::vector<Var> f = as_inputs(tape, fake);
  return discriminator_loss(tape, r, f, swap).value;
}

NetSpec spec3(std::vector<int> widths, std::uint64_t seed, int in_dim = 3) {
  NetSpec s;
  s.input_dim = in_dim;
  s.layer_widths = std::move(widths);
  s.seed = seed;
  return s;
}

SampleSet micro_samples() {
  SampleSet s;
  s.data = {{0.2, 0.3, 0.9}, {0.5, 0.4, 0.4}, {0.7, 0.6, 0.1}};
  s.initial = {{0.3, 0.0}, {0.8, 0.0}};
  s.boundary = {{0.2, 0, 1.0}, {0.7, 1, 0.0}};
  s.collocation = {{0.1, 0.1}, {0.4, 0.5}, {0.6, 0.2}, {0.9, 0.8}};
  return s;
}

GanConfig micro_config() {
  GanConfig cfg;
  cfg.epochs = 6;
  cfg.batch_data = 4;
  cfg.batch_collocation = 3;
  cfg.seed = 17;
  cfg.log_every = 2;
  return cfg;
}

} // namespace

TEST_CASE("discriminator loss hand values") {
  // Zero logits: both softplus terms equal log 2.
  CHECK(disc_loss_value({0.0, 0.0}, {0.0}, false) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
  // Confident-wrong logits on both batches.
  CHECK(disc_loss_value({1.0}, {-1.0}, false) ==
        doctest::Approx(2.0 * softplus_ref(1.0)).epsilon(1e-15));
  // Swapping labels is the same as swapping the batches.
  CHECK(disc_loss_value({0.4, -1.2}, {0.9}, true) ==
        doctest::Approx(disc_loss_value({0.9}, {0.4, -1.2}, false))
            .epsilon(1e-15));
  Tape tape;
  CHECK_THROWS_AS((void)discriminator_loss(tape, {}, {}, false), ConfigError);
}

TEST_CASE("discriminator loss matches finite differences") {
  const std::vector<double> real0{0.7, -0.4, 1.3};
  const std::vector<double> fake0{-0.9, 0.2};

  Tape tape;
  const std::vector<Var> r = as_inputs(tape, real0);
  const std::vector<Var> f = as_inputs(tape, fake0);
  const Var loss = discriminator_loss(tape, r, f, false);
  std::vector<std::int32_t> wrt;
  for (const Var& v : r) wrt.push_back(v.id);
  for (const Var& v : f) wrt.push_back(v.id);
  std::vector<double> grad;
  tape.gradient(loss, wrt, grad);

  const double h = 1e-6;
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    auto rp = real0, rm = real0, fp = fake0, fm = fake0;
    if (k < real0.size()) {
      rp[k] += h;
      rm[k] -= h;
    } else {
      fp[k - real0.size()] += h;
      fm[k - real0.size()] -= h;
    }
    const double fd = (disc_loss_value(rp, fp, false) -
                       disc_loss_value(rm, fm, false)) /
                      (2.0 * h);
    CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("posterior penalties hand values") {
  Tape tape;
  const Var mu = tape.input(0.3);
  const std::vector<Var> mus{mu};
  const std::vector<double> z{0.5};
  const double nll = posterior_nll(tape, mus, z).value;
  CHECK(nll == doctest::Approx(0.5 * 0.04 + 0.5 * std::log(2.0 * M_PI))
                   .epsilon(1e-15));

  const std::vector<Var> logits = as_inputs(tape, {0.0, 2.0});
  const std::vector<double> labels{0.5, 1.0};
  const double ce = posterior_ce(tape, logits, labels).value;
  CHECK(ce == doctest::Approx(std::log(2.0) + softplus_ref(2.0) - 2.0)
                  .epsilon(1e-14));

  const std::vector<double> z2{0.5, 1.0};
  CHECK_THROWS_AS((void)posterior_nll(tape, mus, z2), ConfigError);
}

TEST_CASE("generator loss is an exact weighted sum") {
  GanConfig cfg;
  cfg.lambda_entropy = 0.25;
  cfg.w_posterior = 2.0;
  cfg.w_pde = 3.0;

  Tape tape;
  const std::vector<Var> logits = as_inputs(tape, {0.5, -1.5});
  const std::vector<Var> penalties = as_inputs(tape, {2.0, 4.0});
  const std::vector<Var> residuals = as_inputs(tape, {0.1, -0.3});
  const GenLossTerms terms =
      generator_loss(tape, logits, penalties, residuals, cfg);

  CHECK(terms.entropy.value == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(terms.posterior.value ==
        doctest::Approx(0.75 * 2.0 * 3.0).epsilon(1e-15));
  CHECK(terms.pde.value ==
        doctest::Approx(3.0 * (0.01 + 0.09) / 2.0).epsilon(1e-15));
  CHECK(terms.total.value ==
        (terms.entropy.value + terms.posterior.value) + terms.pde.value);

  cfg.swap_labels = true;
  const GenLossTerms swapped =
      generator_loss(tape, logits, penalties, residuals, cfg);
  CHECK(swapped.entropy.value == doctest::Approx(0.5).epsilon(1e-15));

  const GenLossTerms bare = generator_loss(tape, logits, {}, {}, cfg);
  CHECK(bare.posterior.value == 0.0);
  CHECK(bare.pde.value == 0.0);
  CHECK(bare.total.value == bare.entropy.value);
}

TEST_CASE("adversarial training runs finite and deterministic") {
  const SampleSet samples = micro_samples();
  PdeParams p;
  const GanConfig cfg = micro_config();
  const NetSpec gen = spec3({8, 1}, 100, 3);
  const NetSpec disc = spec3({8, 1}, 101);
  const NetSpec post = spec3({8, 1}, 102);

  const GanResult a = train_gan(samples, p, FluxKind::Corey, cfg, gen, disc,
                                post);
  CHECK_FALSE(a.aborted);
  CHECK_FALSE(a.history.empty());
  CHECK(a.history.back().epoch == cfg.epochs - 1);
  for (const GanHistoryRow& row : a.history) {
    CHECK(std::isfinite(row.d_loss));
    CHECK(std::isfinite(row.g_total));
  }

  const GanResult b = train_gan(samples, p, FluxKind::Corey, cfg, gen, disc,
                                post);
  CHECK(a.nets.generator.params() == b.nets.generator.params());
  CHECK(a.nets.discriminator.params() == b.nets.discriminator.params());
  CHECK(a.nets.posterior.params() == b.nets.posterior.params());
}

TEST_CASE("objective and sampling variants stay finite") {
  const SampleSet samples = micro_samples();
  PdeParams p;
  GanConfig cfg = micro_config();
  cfg.listing_objective = true;
  cfg.swap_labels = true;
  cfg.resample_collocation = true;
  cfg.d_steps = 2;
  const GanResult r =
      train_gan(samples, p, FluxKind::Corey, cfg, spec3({6, 1}, 200, 3),
                spec3({6, 1}, 201), spec3({6, 1}, 202));
  CHECK_FALSE(r.aborted);
  CHECK(std::isfinite(r.history.back().g_total));
}

TEST_CASE("threshold crossing is recorded and can stop the run") {
  const SampleSet samples = micro_samples();
  PdeParams p;
  const SolutionProfile profile =
      riemann_solve(flux_fn(FluxKind::Corey, p), 1.0, 0.0);
  GanConfig cfg = micro_config();
  cfg.epochs = 10;
  cfg.stop_at_threshold = true;
  GanEvalSpec eval;
  eval.profile = &profile;
  eval.times = {0.4};
  eval.nx = 16;
  eval.threshold = 1e9; // any finite error crosses at the first eval
  eval.every = 2;
  eval.members = 4;
  const GanResult r =
      train_gan(samples, p, FluxKind::Corey, cfg, spec3({6, 1}, 300, 3),
                spec3({6, 1}, 301), spec3({6, 1}, 302), &eval);
  CHECK(r.epochs_to_threshold == 2);
  CHECK(r.final_rel_l2 >= 0.0);
  CHECK(r.history.back().epoch == 1); // stopped right after the crossing
  CHECK(r.history.back().rel_l2 == r.final_rel_l2);
}

TEST_CASE("training rejects inconsistent shapes") {
  const SampleSet samples = micro_samples();
  PdeParams p;
  const GanConfig cfg = micro_config();
  CHECK_THROWS_AS((void)train_gan(samples, p, FluxKind::Corey, cfg,
                                  spec3({8, 1}, 1, 2), spec3({8, 1}, 2),
                                  spec3({8, 1}, 3)),
                  ConfigError);
  CHECK_THROWS_AS((void)train_gan(samples, p, FluxKind::Corey, cfg,
                                  spec3({8, 1}, 1, 3), spec3({8, 1}, 2),
                                  spec3({8, 2}, 3)),
                  ConfigError);
  SampleSet empty;
  empty.collocation = samples.collocation;
  CHECK_THROWS_AS((void)train_gan(empty, p, FluxKind::Corey, cfg,
                                  spec3({8, 1}, 1, 3), spec3({8, 1}, 2),
                                  spec3({8, 1}, 3)),
                  ConfigError);
}

TEST_CASE("ensemble statistics reproduce the latent draws") {
  // Generator output equals its latent input: weights (0,0,1), bias 0.
  NetSpec spec;
  spec.input_dim = 3;
  spec.layer_widths = {1};
  DenseNet gen(spec);
  gen.params() = {0.0, 0.0, 1.0, 0.0};

  UqGrid grid;
  grid.times = {0.25, 0.75};
  grid.nx = 4;
  const std::uint64_t seed = 99;
  const UqEnsemble e = uq_ensemble(gen, 5, grid, seed, true);
  REQUIRE(e.mean.size() == 8);
  REQUIRE(e.members.size() == 5);

  Rng rng(seed);
  std::vector<double> draws;
  for (int i = 0; i < 5; ++i) draws.push_back(rng.normal());
  double mean = 0.0;
  for (double z : draws) mean += z;
  mean /= 5.0;
  double var = 0.0;
  for (double z : draws) var += (z - mean) * (z - mean);
  var /= 4.0;
  for (std::size_t k = 0; k < e.mean.size(); ++k) {
    CHECK(e.mean[k] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(e.std_dev[k] == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  }
  CHECK(e.members[2][0] == doctest::Approx(draws[2]).epsilon(1e-15));

  CHECK_THROWS_AS((void)uq_ensemble(gen, 1, grid, seed), ConfigError);
  CHECK_THROWS_AS((void)uq_ensemble(gen, 5, UqGrid{}, seed), ConfigError);
  NetSpec flat;
  flat.input_dim = 2;
  flat.layer_widths = {1};
  CHECK_THROWS_AS((void)uq_ensemble(DenseNet(flat), 5, grid, seed),
                  ConfigError);
}

TEST_CASE("ensemble and history files carry the documented schema") {
  NetSpec spec;
  spec.input_dim = 3;
  spec.layer_widths = {1};
  DenseNet gen(spec);
  gen.params() = {0.0, 0.0, 0.0, 0.5};
  UqGrid grid;
  grid.times = {0.5};
  grid.nx = 2;
  const UqEnsemble e = uq_ensemble(gen, 3, grid, 1);

  const auto dir = std::filesystem::temp_directory_path();
  const std::string epath = (dir / "blpinn_ens.csv").string();
  save_ensemble(e, epath);
  const std::string etext = read_text_file(epath);
  CHECK(etext.find("t,x,mean,std,lo2sd,hi2sd\n") == 0);
  CHECK(etext.find("0.5,0.25,0.5,0,0.5,0.5") != std::string::npos);

  GanHistoryRow row;
  row.epoch = 7;
  row.d_loss = 1.25;
  const std::string hpath = (dir / "blpinn_gan_hist.csv").string();
  save_gan_history(std::vector<GanHistoryRow>{row}, hpath);
  const std::string htext = read_text_file(hpath);
  CHECK(htext.find("epoch,d_loss,g_total,g_entropy,g_posterior,g_pde,rel_l2") ==
        0);
  CHECK(htext.find("\n7,1.25,") != std::string::npos);
  std::filesystem::remove(epath);
  std::filesystem::remove(hpath);
}
