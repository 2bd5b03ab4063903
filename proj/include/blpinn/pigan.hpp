#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "blpinn/network.hpp"
#include "blpinn/oracle.hpp"
#include "blpinn/physics.hpp"
#include "blpinn/samples.hpp"
#include "blpinn/training.hpp"

namespace blpinn {

struct GanConfig {
  int latent_dim = 1;
  double lambda_entropy = 0.5; // lambda; posterior term carries (1-lambda)
  double w_posterior = 1.0;
  double w_pde = 1.0; // beta
  int epochs = 15000;
  bool stop_at_threshold = false; // end the run at the first eval crossing
  int d_steps = 1, g_steps = 1;
  double lr_d = 1e-3, lr_g = 1e-3;
  std::uint64_t seed = 0;
  int batch_data = 0;         // 0 -> all labeled points per step
  int batch_collocation = 128;
  bool listing_objective = false;  // sigmoid-CE posterior term
  bool swap_labels = false;        // real->1, fake->0 instead
  bool resample_collocation = false;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  int log_every = 200;
};

// Real samples are labeled 0 and fake samples 1 (swap_labels reverses).
// L_D = mean softplus(real logits) + mean softplus(-fake logits).
Var discriminator_loss(Tape& tape, std::span<const Var> real_logits,
                       std::span<const Var> fake_logits, bool swap_labels);

// Per-sample posterior penalties. nll: 0.5*||z - mu||^2 + d/2*log(2*pi)
// (negative Gaussian log-density, unit variance). ce: sigmoid
// cross-entropy of the raw posterior outputs against z as soft labels.
Var posterior_nll(Tape& tape, std::span<const Var> mu,
                  std::span<const double> z);
Var posterior_ce(Tape& tape, std::span<const Var> logits,
                 std::span<const double> z);

struct GenLossTerms {
  Var total;     // exact sum of the three terms below
  Var entropy;   // arithmetic mean of fake logits
  Var posterior; // (1-lambda) * w_posterior * mean per-sample penalty
  Var pde;       // w_pde * mean squared residual
};

GenLossTerms generator_loss(Tape& tape, std::span<const Var> fake_logits,
                            std::span<const Var> posterior_per_sample,
                            std::span<const Var> residuals,
                            const GanConfig& cfg);

struct GanHistoryRow {
  int epoch = 0;
  double d_loss = 0.0;
  double g_total = 0.0, g_entropy = 0.0, g_posterior = 0.0, g_pde = 0.0;
  double rel_l2 = -1.0; // -1 when not evaluated this epoch
};

struct GanNets {
  DenseNet generator, discriminator, posterior;
};

// Optional during-training evaluation: ensemble-mean relative L2 against
// the analytic profile every `every` epochs; epochs_to_threshold records
// the first crossing.
struct GanEvalSpec {
  const SolutionProfile* profile = nullptr;
  std::vector<double> times;
  int nx = 256;
  double x0 = 0.0;
  double threshold = 0.15;
  int every = 250;
  int members = 64;
};

struct GanResult {
  GanNets nets;
  std::vector<GanHistoryRow> history;
  bool aborted = false;
  bool saturation_warned = false; // |mean logit| > 30 for 100 iterations
  int epochs_to_threshold = -1;
  double final_rel_l2 = -1.0;
};

// Alternates d_steps discriminator updates with g_steps joint
// generator+posterior updates. Real batches are labeled (x,t,S) points
// (data + initial + boundary); fake batches reuse the same (x,t) with
// generated S; residuals are evaluated on fresh latent draws at
// collocation points.
GanResult train_gan(const SampleSet& samples, const PdeParams& params,
                    FluxKind flux, const GanConfig& cfg,
                    const NetSpec& gen_spec, const NetSpec& disc_spec,
                    const NetSpec& post_spec,
                    const GanEvalSpec* eval = nullptr);

struct UqGrid {
  std::vector<double> times;
  int nx = 256;
  double x_min = 0.0, x_max = 1.0;
};

struct UqEnsemble {
  UqGrid grid;
  int n_members = 0;
  std::vector<double> mean;    // row-major [time][x]
  std::vector<double> std_dev; // sample std (n-1 divisor)
  std::vector<std::vector<double>> members; // optional, kept on request
};

UqEnsemble uq_ensemble(const DenseNet& generator, int n_members,
                       const UqGrid& grid, std::uint64_t seed,
                       bool keep_members = false);

// t,x,mean,std,lo2sd,hi2sd CSV.
void save_ensemble(const UqEnsemble& e, const std::string& path);

void save_gan_history(std::span<const GanHistoryRow> history,
                      const std::string& path);

} // namespace blpinn
