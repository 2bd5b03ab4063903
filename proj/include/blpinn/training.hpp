#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blpinn/network.hpp"
#include "blpinn/oracle.hpp"
#include "blpinn/physics.hpp"
#include "blpinn/samples.hpp"

namespace blpinn {

// First-order moment-based update; operates on a flat parameter vector,
// optionally restricted to an active-index subset.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  int t = 0;

  void reset(std::size_t n);
  void step(std::span<double> theta, std::span<const double> grad);
  void step_masked(std::span<double> theta, std::span<const double> grad,
                   std::span<const std::size_t> active);
};

struct TrainConfig {
  enum class Mode { Identify, Infer };
  Mode mode = Mode::Identify;
  int epochs = 10000;
  double learning_rate = 1e-3;
  double omega = 1.0; // residual-loss weight (identify)
  int batch = 0;      // 0 -> full batch; otherwise minibatch size per step
  std::uint64_t seed = 0;
  int freeze_first_k = 0;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  int log_every = 200;
};

struct HistoryRow {
  int epoch = 0;
  double total = 0.0;
  double data = 0.0;     // L_s (identify)
  double residual = 0.0; // L_r
  double initial = 0.0;  // L_0 (infer)
  double boundary = 0.0; // L_b (infer)
  double swc = 0.0, sor = 0.0, m = 0.0; // current estimates
};

struct ErrorReport {
  double mse_data = 0.0;
  double mse_pde = 0.0;
  double param_error = 0.0; // sum of |fitted - true| over learnable fields
  double swc_hat = 0.0, sor_hat = 0.0, m_hat = 0.0;
};

struct LossTerms {
  Var total, data, residual, initial, boundary;
};

// Tape workspace for one training run: network leaves plus learnable
// physics parameters, rewound to `mark` every step.
class PinnWorkspace {
public:
  PinnWorkspace(DenseNet net, const PdeParams& params, FluxKind flux);

  Tape& tape() { return tape_; }
  DenseNet& net() { return net_; }
  const DenseNet& net() const { return net_; }
  FluxKind flux() const { return flux_; }

  // Rewinds to the post-parameter mark and refreshes all leaf values.
  void begin_step();

  FluxVars flux_vars(); // binds current (possibly learnable) parameters

  // L = L_s + omega * L_r; both terms averaged over the same points.
  LossTerms loss_identify(std::span<const Sample> batch, double omega);
  // L = L_0 + L_b + L_r over initial/boundary/collocation points.
  LossTerms loss_infer(std::span<const InitialPoint> initial,
                       std::span<const BoundaryPoint> boundary,
                       std::span<const CollocationPoint> collocation);

  // Gradient of `loss` w.r.t. trainable parameters followed by an Adam
  // update. Returns false when the loss is non-finite (no update applied).
  bool step(Adam& adam, Var loss);

  std::size_t trainable_count() const {
    return trainable_param_idx_.size() + u_.size();
  }
  PdeParams fitted_params() const; // learnable fields mapped from u
  const std::vector<double>& learnable_u() const { return u_; }
  void set_learnable_u(std::span<const double> u);

private:
  Var forward_point(double x, double t, Var& x_var, Var& t_var);

  Tape tape_;
  DenseNet net_;
  PdeParams params_;
  FluxKind flux_;
  std::vector<double> u_;                  // unconstrained learnables
  std::vector<Var> u_leaves_;
  std::size_t mark_ = 0;
  std::vector<std::int32_t> trainable_leaves_;
  std::vector<std::size_t> trainable_param_idx_; // into net params
  std::vector<double> grad_;
};

struct TrainResult {
  DenseNet net;
  PdeParams fitted;
  std::vector<HistoryRow> history;
  bool aborted = false; // non-finite loss; net holds last finite state
};

TrainResult train(DenseNet net, const PdeParams& params,
                  const SampleSet& samples, FluxKind flux,
                  const TrainConfig& cfg);

// Loads a checkpoint, freezes its first `freeze_first_k` layers and trains
// on the new problem's boundary/initial data (inference loss).
TrainResult transfer_train(const std::string& checkpoint_path,
                           const PdeParams& params, const SampleSet& samples,
                           FluxKind flux, int freeze_first_k,
                           TrainConfig cfg);

// Mean squared saturation error on an nt-by-nx uniform grid vs the
// analytic profile; predictions clamped to [0,1] for reporting only.
double mse_vs_profile(const DenseNet& net, const SolutionProfile& profile,
                      int nt, int nx, double t_max = 1.0, double x0 = 0.0);

// Mean squared PDE residual of the trained net over a (t, x) window.
double residual_mse(const DenseNet& net, const PdeParams& params,
                    FluxKind flux, int nt, int nx, double t_lo, double t_hi,
                    double x0 = 0.0, double x_lo = 0.0, double x_hi = 1.0);

// 2-input nets evaluate directly; latent nets average over `n_z` draws.
double relative_l2(const DenseNet& net, const SolutionProfile& profile,
                   std::span<const double> times, int nx, double x0 = 0.0,
                   int n_z = 64, std::uint64_t z_seed = 0);

ErrorReport error_report(const DenseNet& net, const PdeParams& true_params,
                         const PdeParams& fitted, FluxKind flux,
                         const SolutionProfile& profile, int nt, int nx,
                         double x0 = 0.0, double t_max = 1.0);

void save_history(std::span<const HistoryRow> history,
                  const std::string& path);
void save_error_report(const ErrorReport& r, const std::string& path);

} // namespace blpinn
