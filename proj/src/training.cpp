#include "blpinn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "blpinn/errors.hpp"
#include "blpinn/io.hpp"
#include "blpinn/rng.hpp"

namespace blpinn {

void Adam::reset(std::size_t n) {
  m.assign(n, 0.0);
  v.assign(n, 0.0);
  t = 0;
}

namespace {

inline double adam_delta(Adam& a, std::size_t i, double g, double c1,
                         double c2) {
  a.m[i] = a.beta1 * a.m[i] + (1.0 - a.beta1) * g;
  a.v[i] = a.beta2 * a.v[i] + (1.0 - a.beta2) * g * g;
  return a.lr * (a.m[i] / c1) / (std::sqrt(a.v[i] / c2) + a.eps);
}

} // namespace

void Adam::step(std::span<double> theta, std::span<const double> grad) {
  ++t;
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < theta.size(); ++i)
    theta[i] -= adam_delta(*this, i, grad[i], c1, c2);
}

void Adam::step_masked(std::span<double> theta, std::span<const double> grad,
                       std::span<const std::size_t> active) {
  ++t;
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < active.size(); ++i)
    theta[active[i]] -= adam_delta(*this, i, grad[i], c1, c2);
}

PinnWorkspace::PinnWorkspace(DenseNet net, const PdeParams& params,
                             FluxKind flux)
    : net_(std::move(net)), params_(params), flux_(flux) {
  params_.validate();
  net_.bind(tape_);
  if (params_.swc_learnable)
    u_.push_back(inverse_map_saturation(params_.swc));
  if (params_.sor_learnable)
    u_.push_back(inverse_map_saturation(params_.sor));
  if (params_.m_learnable) u_.push_back(inverse_map_mobility(params_.m));
  u_leaves_.reserve(u_.size());
  for (double u : u_) u_leaves_.push_back(tape_.input(u));
  mark_ = tape_.size();

  trainable_leaves_ = net_.trainable_leaf_ids();
  trainable_param_idx_ = net_.trainable_indices();
  for (const Var& v : u_leaves_) trainable_leaves_.push_back(v.id);
}

void PinnWorkspace::begin_step() {
  tape_.rewind(mark_);
  net_.refresh(tape_);
  for (std::size_t i = 0; i < u_.size(); ++i) {
    u_leaves_[i].value = u_[i];
    tape_.set_input(u_leaves_[i], u_[i]);
  }
}

FluxVars PinnWorkspace::flux_vars() {
  return bind_flux_vars(tape_, params_, u_leaves_);
}

void PinnWorkspace::set_learnable_u(std::span<const double> u) {
  if (u.size() != u_.size())
    throw ConfigError("set_learnable_u: size mismatch");
  std::copy(u.begin(), u.end(), u_.begin());
}

Var PinnWorkspace::forward_point(double x, double t, Var& x_var,
                                 Var& t_var) {
  x_var = tape_.input(x);
  t_var = tape_.input(t);
  const Var in[] = {x_var, t_var};
  return net_.forward(tape_, in);
}

LossTerms PinnWorkspace::loss_identify(std::span<const Sample> batch,
                                       double omega) {
  if (batch.empty()) throw ConfigError("loss_identify: empty data set");
  const FluxVars fv = flux_vars();
  Var ls = tape_.constant(0.0);
  Var lr = tape_.constant(0.0);
  for (const Sample& p : batch) {
    Var xv, tv;
    const Var s_hat = forward_point(p.x, p.t, xv, tv);
    ls = tape_.add(ls, tape_.square(tape_.sub(s_hat, tape_.constant(p.s))));
    const ResidualParts parts =
        residual_of(tape_, s_hat, xv, tv, flux_, fv, params_.epsilon);
    lr = tape_.add(lr, tape_.square(parts.r));
  }
  const double n = static_cast<double>(batch.size());
  LossTerms terms;
  terms.data = tape_.div(ls, n);
  terms.residual = tape_.mul(tape_.div(lr, n), omega); // reported with omega
  terms.initial = tape_.constant(0.0);
  terms.boundary = tape_.constant(0.0);
  terms.total = tape_.add(terms.data, terms.residual);
  return terms;
}

LossTerms PinnWorkspace::loss_infer(
    std::span<const InitialPoint> initial,
    std::span<const BoundaryPoint> boundary,
    std::span<const CollocationPoint> collocation) {
  if (initial.empty() || boundary.empty() || collocation.empty())
    throw ConfigError(
        "loss_infer: needs initial, boundary and collocation points");
  const FluxVars fv = flux_vars();

  Var l0 = tape_.constant(0.0);
  for (const InitialPoint& p : initial) {
    Var xv, tv;
    const Var s_hat = forward_point(p.x, 0.0, xv, tv);
    l0 = tape_.add(l0, tape_.square(tape_.sub(s_hat, tape_.constant(p.s))));
  }
  l0 = tape_.div(l0, static_cast<double>(initial.size()));

  Var lb = tape_.constant(0.0);
  for (const BoundaryPoint& p : boundary) {
    Var xv, tv;
    const Var s_hat =
        forward_point(p.side == 0 ? 0.0 : 1.0, p.t, xv, tv);
    lb = tape_.add(lb, tape_.square(tape_.sub(s_hat, tape_.constant(p.s))));
  }
  lb = tape_.div(lb, static_cast<double>(boundary.size()));

  Var lr = tape_.constant(0.0);
  for (const CollocationPoint& p : collocation) {
    Var xv = tape_.input(p.x);
    Var tv = tape_.input(p.t);
    const ResidualParts parts =
        residual(tape_, net_, xv, tv, flux_, fv, params_.epsilon);
    lr = tape_.add(lr, tape_.square(parts.r));
  }
  lr = tape_.div(lr, static_cast<double>(collocation.size()));

  LossTerms terms;
  terms.initial = l0;
  terms.boundary = lb;
  terms.residual = lr;
  terms.data = tape_.constant(0.0);
  terms.total = tape_.add(tape_.add(l0, lb), lr);
  return terms;
}

bool PinnWorkspace::step(Adam& adam, Var loss) {
  if (!std::isfinite(loss.value)) return false;
  tape_.gradient(loss, trainable_leaves_, grad_);
  for (double g : grad_)
    if (!std::isfinite(g)) return false;

  ++adam.t;
  const double c1 = 1.0 - std::pow(adam.beta1, adam.t);
  const double c2 = 1.0 - std::pow(adam.beta2, adam.t);
  auto& theta = net_.params();
  const std::size_t nw = trainable_param_idx_.size();
  for (std::size_t i = 0; i < nw; ++i)
    theta[trainable_param_idx_[i]] -= adam_delta(adam, i, grad_[i], c1, c2);
  for (std::size_t j = 0; j < u_.size(); ++j)
    u_[j] -= adam_delta(adam, nw + j, grad_[nw + j], c1, c2);
  return true;
}

PdeParams PinnWorkspace::fitted_params() const {
  PdeParams p = params_;
  std::size_t k = 0;
  const auto sig = [](double u) { return 0.45 / (1.0 + std::exp(-u)); };
  if (p.swc_learnable) p.swc = sig(u_[k++]);
  if (p.sor_learnable) p.sor = sig(u_[k++]);
  if (p.m_learnable) p.m = std::exp(u_[k++]);
  return p;
}

namespace {

HistoryRow make_row(int epoch, const LossTerms& terms, const PdeParams& p) {
  HistoryRow row;
  row.epoch = epoch;
  row.total = terms.total.value;
  row.data = terms.data.value;
  row.residual = terms.residual.value;
  row.initial = terms.initial.value;
  row.boundary = terms.boundary.value;
  row.swc = p.swc;
  row.sor = p.sor;
  row.m = p.m;
  return row;
}

} // namespace

TrainResult train(DenseNet net, const PdeParams& params,
                  const SampleSet& samples, FluxKind flux,
                  const TrainConfig& cfg) {
  if (cfg.epochs <= 0) throw ConfigError("epochs must be positive");
  if (cfg.omega < 0.0) throw ConfigError("omega must be >= 0");
  if (cfg.freeze_first_k > 0) net.set_frozen(cfg.freeze_first_k);

  PinnWorkspace ws(std::move(net), params, flux);
  Adam adam;
  adam.lr = cfg.learning_rate;
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.eps = cfg.adam_eps;
  adam.reset(ws.trainable_count());

  Rng rng(cfg.seed);
  const bool identify = cfg.mode == TrainConfig::Mode::Identify;
  if (identify && samples.data.empty())
    throw ConfigError("identification needs interior data points");

  // Persistent index pool for minibatch selection (partial Fisher-Yates).
  const std::size_t n_pool =
      identify ? samples.data.size() : samples.collocation.size();
  std::vector<std::size_t> pool(n_pool);
  std::iota(pool.begin(), pool.end(), 0);
  const std::size_t batch =
      cfg.batch > 0 ? std::min<std::size_t>(cfg.batch, n_pool) : n_pool;

  std::vector<Sample> data_buf;
  std::vector<CollocationPoint> colloc_buf;

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ws.begin_step();

    LossTerms terms;
    if (identify) {
      std::span<const Sample> pts;
      if (batch == samples.data.size()) {
        pts = samples.data;
      } else {
        for (std::size_t k = 0; k < batch; ++k)
          std::swap(pool[k], pool[k + rng.index(n_pool - k)]);
        data_buf.clear();
        for (std::size_t k = 0; k < batch; ++k)
          data_buf.push_back(samples.data[pool[k]]);
        pts = data_buf;
      }
      terms = ws.loss_identify(pts, cfg.omega);
    } else {
      std::span<const CollocationPoint> pts;
      if (batch == samples.collocation.size()) {
        pts = samples.collocation;
      } else {
        for (std::size_t k = 0; k < batch; ++k)
          std::swap(pool[k], pool[k + rng.index(n_pool - k)]);
        colloc_buf.clear();
        for (std::size_t k = 0; k < batch; ++k)
          colloc_buf.push_back(samples.collocation[pool[k]]);
        pts = colloc_buf;
      }
      terms = ws.loss_infer(samples.initial, samples.boundary, pts);
    }

    const bool logged = epoch % cfg.log_every == 0 || epoch == cfg.epochs - 1;
    if (logged)
      result.history.push_back(make_row(epoch, terms, ws.fitted_params()));

    if (!ws.step(adam, terms.total)) {
      result.aborted = true;
      if (!logged)
        result.history.push_back(make_row(epoch, terms, ws.fitted_params()));
      break;
    }
  }

  result.net = ws.net();
  result.fitted = ws.fitted_params();
  return result;
}

TrainResult transfer_train(const std::string& checkpoint_path,
                           const PdeParams& params, const SampleSet& samples,
                           FluxKind flux, int freeze_first_k,
                           TrainConfig cfg) {
  DenseNet net = DenseNet::load(checkpoint_path);
  net.set_frozen(freeze_first_k);
  cfg.mode = TrainConfig::Mode::Infer;
  cfg.freeze_first_k = 0; // already applied
  return train(std::move(net), params, samples, flux, cfg);
}

double mse_vs_profile(const DenseNet& net, const SolutionProfile& profile,
                      int nt, int nx, double t_max, double x0) {
  double acc = 0.0;
  for (int i = 0; i < nt; ++i) {
    const double t = t_max * (i + 0.5) / nt;
    for (int j = 0; j < nx; ++j) {
      const double x = (j + 0.5) / nx;
      const double in[] = {x, t};
      double pred = net.forward(in);
      pred = std::min(std::max(pred, 0.0), 1.0); // reporting clamp
      const double diff = pred - profile.evaluate(x, t, x0);
      acc += diff * diff;
    }
  }
  return acc / (static_cast<double>(nt) * nx);
}

double residual_mse(const DenseNet& net, const PdeParams& params,
                    FluxKind flux, int nt, int nx, double t_lo, double t_hi,
                    double x0, double x_lo, double x_hi) {
  (void)x0;
  PdeParams fixed = params;
  fixed.swc_learnable = fixed.sor_learnable = fixed.m_learnable = false;
  PinnWorkspace ws(net, fixed, flux);
  double acc = 0.0;
  for (int i = 0; i < nt; ++i) {
    const double t = t_lo + (t_hi - t_lo) * (i + 0.5) / nt;
    for (int j = 0; j < nx; ++j) {
      const double x = x_lo + (x_hi - x_lo) * (j + 0.5) / nx;
      ws.begin_step();
      const FluxVars fv = ws.flux_vars();
      Var xv = ws.tape().input(x);
      Var tv = ws.tape().input(t);
      const ResidualParts parts =
          residual(ws.tape(), ws.net(), xv, tv, flux, fv, fixed.epsilon);
      acc += parts.r.value * parts.r.value;
    }
  }
  return acc / (static_cast<double>(nt) * nx);
}

double relative_l2(const DenseNet& net, const SolutionProfile& profile,
                   std::span<const double> times, int nx, double x0,
                   int n_z, std::uint64_t z_seed) {
  const int latent = net.spec().input_dim - 2;
  std::vector<double> pred(times.size() * nx, 0.0);
  if (latent <= 0) {
    for (std::size_t k = 0; k < times.size(); ++k)
      for (int j = 0; j < nx; ++j) {
        const double in[] = {(j + 0.5) / nx, times[k]};
        pred[k * nx + j] = net.forward(in);
      }
  } else {
    Rng rng(z_seed);
    std::vector<double> in(2 + latent);
    for (int member = 0; member < n_z; ++member) {
      for (int d = 0; d < latent; ++d) in[2 + d] = rng.normal();
      for (std::size_t k = 0; k < times.size(); ++k) {
        in[1] = times[k];
        for (int j = 0; j < nx; ++j) {
          in[0] = (j + 0.5) / nx;
          pred[k * nx + j] += net.forward(in) / n_z;
        }
      }
    }
  }
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k)
    for (int j = 0; j < nx; ++j) {
      const double truth = profile.evaluate((j + 0.5) / nx, times[k], x0);
      const double diff = pred[k * nx + j] - truth;
      num += diff * diff;
      den += truth * truth;
    }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

ErrorReport error_report(const DenseNet& net, const PdeParams& true_params,
                         const PdeParams& fitted, FluxKind flux,
                         const SolutionProfile& profile, int nt, int nx,
                         double x0, double t_max) {
  ErrorReport r;
  r.mse_data = mse_vs_profile(net, profile, nt, nx, t_max, x0);
  r.mse_pde = residual_mse(net, fitted, flux, nt, nx, 0.0, t_max, x0);
  r.swc_hat = fitted.swc;
  r.sor_hat = fitted.sor;
  r.m_hat = fitted.m;
  r.param_error = 0.0;
  if (fitted.swc_learnable) r.param_error += std::abs(fitted.swc - true_params.swc);
  if (fitted.sor_learnable) r.param_error += std::abs(fitted.sor - true_params.sor);
  if (fitted.m_learnable) r.param_error += std::abs(fitted.m - true_params.m);
  return r;
}

void save_history(std::span<const HistoryRow> history,
                  const std::string& path) {
  std::ostringstream out;
  out << "epoch,total,data,residual,initial,boundary,swc,sor,m\n";
  for (const HistoryRow& r : history)
    out << r.epoch << ',' << fmt17(r.total) << ',' << fmt17(r.data) << ','
        << fmt17(r.residual) << ',' << fmt17(r.initial) << ','
        << fmt17(r.boundary) << ',' << fmt17(r.swc) << ',' << fmt17(r.sor)
        << ',' << fmt17(r.m) << "\n";
  write_text_file(path, out.str());
}

void save_error_report(const ErrorReport& r, const std::string& path) {
  std::ostringstream out;
  out << "mse_data " << fmt17(r.mse_data) << "\n"
      << "mse_pde " << fmt17(r.mse_pde) << "\n"
      << "param_error " << fmt17(r.param_error) << "\n"
      << "swc_hat " << fmt17(r.swc_hat) << "\n"
      << "sor_hat " << fmt17(r.sor_hat) << "\n"
      << "m_hat " << fmt17(r.m_hat) << "\n";
  write_text_file(path, out.str());
}

} // namespace blpinn
