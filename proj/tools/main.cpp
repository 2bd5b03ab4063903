#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "blpinn/config.hpp"
#include "blpinn/errors.hpp"
#include "blpinn/io.hpp"
#include "blpinn/pigan.hpp"
#include "blpinn/rng.hpp"
#include "blpinn/training.hpp"

namespace {

using namespace blpinn;

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string out = "out";
  std::string data;
  std::string checkpoint;
  std::string mode; // empty -> [training] mode from the config
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool force = false;
  int jobs = 1;
};

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

RunConfig load_config(const Options& opt) {
  RunConfig cfg = opt.config.empty() ? RunConfig{} : RunConfig::load(opt.config);
  if (opt.seed_given) cfg.reseed(opt.seed);
  if (!opt.data.empty()) cfg.data_path = opt.data;
  if (!opt.checkpoint.empty()) cfg.checkpoint_path = opt.checkpoint;
  if (cfg.scenario.eval_nx <= 0)
    throw ConfigError("scenario.eval_nx must be positive");
  return cfg;
}

// Mean prediction of a latent generator over n_z standard-normal draws.
std::vector<double> latent_mean(const DenseNet& net,
                                std::span<const double> times, int nx,
                                double x_min, double x_max, int n_z,
                                std::uint64_t z_seed) {
  const int latent = net.spec().input_dim - 2;
  std::vector<double> mean(times.size() * nx, 0.0);
  std::vector<double> in(2 + latent);
  Rng rng(z_seed);
  const double dx = (x_max - x_min) / nx;
  for (int member = 0; member < n_z; ++member) {
    for (int d = 0; d < latent; ++d) in[2 + d] = rng.normal();
    std::size_t k = 0;
    for (double t : times) {
      in[1] = t;
      for (int j = 0; j < nx; ++j, ++k) {
        in[0] = x_min + (j + 0.5) * dx;
        mean[k] += net.forward(in) / n_z;
      }
    }
  }
  return mean;
}

int cmd_gen_data(const Options& opt) {
  const RunConfig cfg = load_config(opt);
  const std::string samples_path = join(opt.out, "samples.csv");
  const std::string oracle_path = join(opt.out, "oracle.csv");
  check_overwrite(samples_path, opt.force);
  check_overwrite(oracle_path, opt.force);

  const SolutionProfile profile = cfg.make_profile();
  const SampleSet samples = sample_training_data(profile, cfg.sampling);
  save_samples(samples, samples_path);

  std::ostringstream out;
  out << "t,x,s\n";
  const int nx = cfg.scenario.eval_nx;
  const double dx = (cfg.sampling.x_max - cfg.sampling.x_min) / nx;
  for (double t : cfg.scenario.snapshot_times)
    for (int j = 0; j < nx; ++j) {
      const double x = cfg.sampling.x_min + (j + 0.5) * dx;
      out << fmt17(t) << ',' << fmt17(x) << ','
          << fmt17(profile.evaluate(x, t, cfg.scenario.x0)) << "\n";
    }
  write_text_file(oracle_path, out.str());
  std::printf("wrote %s (%zu points) and %s\n", samples_path.c_str(),
              samples.n() + samples.n0() + samples.nb() + samples.nr(),
              oracle_path.c_str());
  return 0;
}

int cmd_train(const Options& opt) {
  RunConfig cfg = load_config(opt);
  const std::string mode =
      !opt.mode.empty() ? opt.mode
      : cfg.training.mode == TrainConfig::Mode::Infer ? "infer"
                                                      : "identify";
  if (cfg.data_path.empty())
    throw ConfigError("train needs a dataset (--data or [training] data)");
  const SampleSet samples = load_samples(cfg.data_path);
  const SolutionProfile profile = cfg.make_profile();
  const std::string history_path = join(opt.out, "history.csv");
  const std::string report_path = join(opt.out, "error_report.txt");
  check_overwrite(history_path, opt.force);
  check_overwrite(report_path, opt.force);

  if (mode == "gan") {
    const std::string gen_path = join(opt.out, "generator.ckpt");
    const std::string disc_path = join(opt.out, "discriminator.ckpt");
    const std::string post_path = join(opt.out, "posterior.ckpt");
    check_overwrite(gen_path, opt.force);
    check_overwrite(disc_path, opt.force);
    check_overwrite(post_path, opt.force);

    GanEvalSpec eval;
    eval.profile = &profile;
    eval.times = cfg.scenario.snapshot_times;
    eval.nx = cfg.scenario.eval_nx;
    eval.x0 = cfg.scenario.x0;
    const int latent = cfg.gan.latent_dim;
    const GanResult result = train_gan(
        samples, cfg.physics, cfg.flux, cfg.gan,
        cfg.gan_spec(cfg.gen_widths, 2 + latent, 1, RunConfig::StreamNetInit),
        cfg.gan_spec(cfg.disc_widths, 3, 1, RunConfig::StreamDiscInit),
        cfg.gan_spec(cfg.post_widths, 3, latent, RunConfig::StreamPostInit),
        &eval);
    if (result.aborted)
      std::fprintf(stderr, "warning: training aborted on non-finite loss\n");

    result.nets.generator.save(gen_path);
    result.nets.discriminator.save(disc_path);
    result.nets.posterior.save(post_path);
    save_gan_history(result.history, history_path);

    ErrorReport report;
    const std::vector<double> mean = latent_mean(
        result.nets.generator, cfg.scenario.snapshot_times,
        cfg.scenario.eval_nx, cfg.sampling.x_min, cfg.sampling.x_max, 64,
        Rng::derive(cfg.seed, RunConfig::StreamEval));
    const double dx =
        (cfg.sampling.x_max - cfg.sampling.x_min) / cfg.scenario.eval_nx;
    std::size_t k = 0;
    for (double t : cfg.scenario.snapshot_times)
      for (int j = 0; j < cfg.scenario.eval_nx; ++j, ++k) {
        const double x = cfg.sampling.x_min + (j + 0.5) * dx;
        const double pred = std::min(std::max(mean[k], 0.0), 1.0);
        const double diff = pred - profile.evaluate(x, t, cfg.scenario.x0);
        report.mse_data += diff * diff;
      }
    report.mse_data /= static_cast<double>(mean.size());
    // Unweighted mean squared residual from the last generator step.
    report.mse_pde = result.history.empty() || cfg.gan.w_pde <= 0.0
                         ? 0.0
                         : result.history.back().g_pde / cfg.gan.w_pde;
    report.swc_hat = cfg.physics.swc;
    report.sor_hat = cfg.physics.sor;
    report.m_hat = cfg.physics.m;
    save_error_report(report, report_path);
    std::printf("gan: final rel_l2 %s, epochs to threshold %d\n",
                fmt17(result.final_rel_l2).c_str(),
                result.epochs_to_threshold);
    return 0;
  }

  const std::string net_path = join(opt.out, "net.ckpt");
  check_overwrite(net_path, opt.force);

  TrainResult result;
  if (mode == "identify" || mode == "infer") {
    cfg.training.mode = mode == "identify" ? TrainConfig::Mode::Identify
                                           : TrainConfig::Mode::Infer;
    result = train(DenseNet::init_xavier(cfg.network), cfg.physics_init,
                   samples, cfg.flux, cfg.training);
  } else if (mode == "transfer") {
    if (cfg.checkpoint_path.empty())
      throw ConfigError(
          "transfer needs a checkpoint (--checkpoint or [training] "
          "checkpoint)");
    result = transfer_train(cfg.checkpoint_path, cfg.physics_init, samples,
                            cfg.flux, cfg.training.freeze_first_k,
                            cfg.training);
  } else {
    throw ConfigError("unknown training mode '" + mode + "'");
  }
  if (result.aborted)
    std::fprintf(stderr, "warning: training aborted on non-finite loss\n");

  result.net.save(net_path);
  save_history(result.history, history_path);
  const ErrorReport report =
      error_report(result.net, cfg.physics, result.fitted, cfg.flux, profile,
                   50, cfg.scenario.eval_nx, cfg.scenario.x0,
                   cfg.scenario.t_max);
  save_error_report(report, report_path);
  std::printf("%s: mse_data %s, m_hat %s\n", mode.c_str(),
              fmt17(report.mse_data).c_str(), fmt17(report.m_hat).c_str());
  return 0;
}

int cmd_evaluate(const Options& opt) {
  const RunConfig cfg = load_config(opt);
  if (cfg.checkpoint_path.empty())
    throw ConfigError("evaluate needs --checkpoint");
  const DenseNet net = DenseNet::load(cfg.checkpoint_path);
  if (net.output_dim() != 1 || net.spec().input_dim < 2)
    throw ConfigError("evaluate needs a scalar saturation net over (x,t)");

  const std::string eval_path = join(opt.out, "eval.csv");
  const std::string report_path = join(opt.out, "error_report.txt");
  check_overwrite(eval_path, opt.force);
  check_overwrite(report_path, opt.force);

  const SolutionProfile profile = cfg.make_profile();
  const int nx = cfg.scenario.eval_nx;
  const double dx = (cfg.sampling.x_max - cfg.sampling.x_min) / nx;
  const bool latent = net.spec().input_dim > 2;
  std::vector<double> pred;
  if (latent) {
    pred = latent_mean(net, cfg.scenario.snapshot_times, nx,
                       cfg.sampling.x_min, cfg.sampling.x_max, 64,
                       Rng::derive(cfg.seed, RunConfig::StreamEval));
  } else {
    for (double t : cfg.scenario.snapshot_times)
      for (int j = 0; j < nx; ++j) {
        const double in[] = {cfg.sampling.x_min + (j + 0.5) * dx, t};
        pred.push_back(net.forward(in));
      }
  }

  ErrorReport report;
  std::ostringstream out;
  out << "t,x,s_pred,s_true\n";
  std::size_t k = 0;
  for (double t : cfg.scenario.snapshot_times)
    for (int j = 0; j < nx; ++j, ++k) {
      const double x = cfg.sampling.x_min + (j + 0.5) * dx;
      const double truth = profile.evaluate(x, t, cfg.scenario.x0);
      out << fmt17(t) << ',' << fmt17(x) << ',' << fmt17(pred[k]) << ','
          << fmt17(truth) << "\n";
      const double clamped = std::min(std::max(pred[k], 0.0), 1.0);
      report.mse_data += (clamped - truth) * (clamped - truth);
    }
  report.mse_data /= static_cast<double>(pred.size());
  if (!latent)
    report.mse_pde = residual_mse(net, cfg.physics, cfg.flux, 50,
                                  cfg.scenario.eval_nx, 0.0,
                                  cfg.scenario.t_max, cfg.scenario.x0,
                                  cfg.sampling.x_min, cfg.sampling.x_max);
  report.swc_hat = cfg.physics.swc;
  report.sor_hat = cfg.physics.sor;
  report.m_hat = cfg.physics.m;
  write_text_file(eval_path, out.str());
  save_error_report(report, report_path);
  std::printf("evaluate: mse_data %s over %zu rows\n",
              fmt17(report.mse_data).c_str(), pred.size());
  return 0;
}

int cmd_uq(const Options& opt) {
  const RunConfig cfg = load_config(opt);
  if (cfg.checkpoint_path.empty()) throw ConfigError("uq needs --checkpoint");
  const DenseNet generator = DenseNet::load(cfg.checkpoint_path);
  if (generator.spec().input_dim < 3)
    throw ConfigError("uq needs a generator checkpoint with latent inputs");

  const std::string path = join(opt.out, "ensemble.csv");
  check_overwrite(path, opt.force);
  const UqEnsemble ensemble =
      uq_ensemble(generator, cfg.uq_members, cfg.uq_grid,
                  Rng::derive(cfg.seed, RunConfig::StreamUq));
  save_ensemble(ensemble, path);
  std::printf("uq: %d members over %zu cells -> %s\n", ensemble.n_members,
              ensemble.mean.size(), path.c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed networks for two-phase transport"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opt;
  app.add_option("--config", opt.config, "INI run configuration");
  auto* seed_opt =
      app.add_option("--seed", opt.seed, "override the config root seed");
  app.add_option("--out", opt.out, "output directory")
      ->capture_default_str();
  app.add_flag("--force", opt.force, "overwrite existing outputs");
  app.add_option("--jobs", opt.jobs,
                 "parallel workers for multi-run sweeps (single runs ignore "
                 "this)");
  app.add_option("--data", opt.data, "dataset CSV (overrides config)");
  app.add_option("--checkpoint", opt.checkpoint,
                 "network checkpoint (overrides config)");

  auto* gen = app.add_subcommand(
      "gen-data", "sample a training set and the reference profile");
  auto* train_cmd =
      app.add_subcommand("train", "fit a network (see --mode)");
  train_cmd
      ->add_option("--mode", opt.mode,
                   "identify | infer | transfer | gan (default: [training] "
                   "mode from the config)")
      ->check(CLI::IsMember({"identify", "infer", "transfer", "gan"}));
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "compare a checkpoint against the analytic profile");
  auto* uq_cmd = app.add_subcommand(
      "uq", "propagate latent uncertainty through a generator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  opt.seed_given = seed_opt->count() > 0;

  try {
    if (gen->parsed()) return cmd_gen_data(opt);
    if (train_cmd->parsed()) return cmd_train(opt);
    if (eval_cmd->parsed()) return cmd_evaluate(opt);
    if (uq_cmd->parsed()) return cmd_uq(opt);
  } catch (const blpinn::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
