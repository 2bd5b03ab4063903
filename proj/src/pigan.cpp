#include "blpinn/pigan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "blpinn/errors.hpp"
#include "blpinn/io.hpp"
#include "blpinn/rng.hpp"

namespace blpinn {

namespace {

// log(1 + e^x), branch chosen at record time so exp never overflows.
Var softplus(Tape& tape, Var x) {
  if (x.value > 0.0)
    return tape.add(x, tape.log(tape.add(tape.exp(tape.neg(x)), 1.0)));
  return tape.log(tape.add(tape.exp(x), 1.0));
}

Var mean_of(Tape& tape, std::span<const Var> xs) {
  Var acc = tape.constant(0.0);
  for (const Var& x : xs) acc = tape.add(acc, x);
  return tape.div(acc, static_cast<double>(xs.size()));
}

} // namespace

Var discriminator_loss(Tape& tape, std::span<const Var> real_logits,
                       std::span<const Var> fake_logits, bool swap_labels) {
  if (real_logits.empty() || fake_logits.empty())
    throw ConfigError("discriminator_loss: empty logit batch");
  Var real_term = tape.constant(0.0);
  for (const Var& d : real_logits)
    real_term = tape.add(real_term,
                         softplus(tape, swap_labels ? tape.neg(d) : d));
  Var fake_term = tape.constant(0.0);
  for (const Var& d : fake_logits)
    fake_term = tape.add(fake_term,
                         softplus(tape, swap_labels ? d : tape.neg(d)));
  return tape.add(tape.div(real_term, static_cast<double>(real_logits.size())),
                  tape.div(fake_term, static_cast<double>(fake_logits.size())));
}

Var posterior_nll(Tape& tape, std::span<const Var> mu,
                  std::span<const double> z) {
  if (mu.size() != z.size())
    throw ConfigError("posterior_nll: dimension mismatch");
  Var acc = tape.constant(0.0);
  for (std::size_t i = 0; i < mu.size(); ++i)
    acc = tape.add(acc, tape.square(tape.sub(tape.constant(z[i]), mu[i])));
  const double log_2pi = std::log(2.0 * 3.14159265358979323846);
  return tape.add(tape.mul(acc, 0.5),
                  tape.constant(0.5 * log_2pi * static_cast<double>(z.size())));
}

Var posterior_ce(Tape& tape, std::span<const Var> logits,
                 std::span<const double> z) {
  if (logits.size() != z.size())
    throw ConfigError("posterior_ce: dimension mismatch");
  Var acc = tape.constant(0.0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const Var term =
        tape.sub(softplus(tape, logits[i]), tape.mul(logits[i], z[i]));
    acc = tape.add(acc, term);
  }
  return acc;
}

GenLossTerms generator_loss(Tape& tape, std::span<const Var> fake_logits,
                            std::span<const Var> posterior_per_sample,
                            std::span<const Var> residuals,
                            const GanConfig& cfg) {
  if (fake_logits.empty())
    throw ConfigError("generator_loss: empty logit batch");
  GenLossTerms terms;
  // Sign follows the label convention: the generator drives fake logits
  // toward the "real" label.
  terms.entropy = mean_of(tape, fake_logits);
  if (cfg.swap_labels) terms.entropy = tape.neg(terms.entropy);

  if (!posterior_per_sample.empty()) {
    const double w = (1.0 - cfg.lambda_entropy) * cfg.w_posterior;
    terms.posterior = tape.mul(mean_of(tape, posterior_per_sample), w);
  } else {
    terms.posterior = tape.constant(0.0);
  }

  if (!residuals.empty()) {
    Var acc = tape.constant(0.0);
    for (const Var& r : residuals) acc = tape.add(acc, tape.square(r));
    terms.pde = tape.mul(
        tape.div(acc, static_cast<double>(residuals.size())), cfg.w_pde);
  } else {
    terms.pde = tape.constant(0.0);
  }

  terms.total = tape.add(tape.add(terms.entropy, terms.posterior), terms.pde);
  return terms;
}

namespace {

// One network's trainable view plus its own Adam state.
struct NetOpt {
  DenseNet* net = nullptr;
  std::vector<std::size_t> idx;

  explicit NetOpt(DenseNet* n) : net(n), idx(n->trainable_indices()) {}
  void apply(Adam& adam, std::span<const double> grad, std::size_t offset,
             double c1, double c2, std::size_t state_offset) {
    auto& theta = net->params();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::size_t s = state_offset + i;
      const double g = grad[offset + i];
      adam.m[s] = adam.beta1 * adam.m[s] + (1.0 - adam.beta1) * g;
      adam.v[s] = adam.beta2 * adam.v[s] + (1.0 - adam.beta2) * g * g;
      theta[idx[i]] -=
          adam.lr * (adam.m[s] / c1) / (std::sqrt(adam.v[s] / c2) + adam.eps);
    }
  }
};

void adam_apply(Adam& adam, std::span<const double> grad,
                std::span<NetOpt*> nets) {
  for (double g : grad)
    if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient");
  ++adam.t;
  const double c1 = 1.0 - std::pow(adam.beta1, adam.t);
  const double c2 = 1.0 - std::pow(adam.beta2, adam.t);
  std::size_t offset = 0;
  for (NetOpt* n : nets) {
    n->apply(adam, grad, offset, c1, c2, offset);
    offset += n->idx.size();
  }
}

} // namespace

GanResult train_gan(const SampleSet& samples, const PdeParams& params,
                    FluxKind flux, const GanConfig& cfg,
                    const NetSpec& gen_spec, const NetSpec& disc_spec,
                    const NetSpec& post_spec, const GanEvalSpec* eval) {
  params.validate();
  if (cfg.latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (gen_spec.input_dim != 2 + cfg.latent_dim)
    throw ConfigError("generator input_dim must be 2 + latent_dim");
  if (disc_spec.input_dim != 3 || post_spec.input_dim != 3)
    throw ConfigError("discriminator and posterior nets take (x,t,S)");
  if (post_spec.layer_widths.back() != cfg.latent_dim)
    throw ConfigError("posterior net output must match latent_dim");
  if (cfg.epochs <= 0) throw ConfigError("epochs must be positive");

  // Labeled pool: interior data plus initial and boundary conditions.
  std::vector<Sample> reals = samples.data;
  for (const InitialPoint& p : samples.initial)
    reals.push_back({p.x, 0.0, p.s});
  for (const BoundaryPoint& p : samples.boundary)
    reals.push_back({p.side == 0 ? 0.0 : 1.0, p.t, p.s});
  if (reals.empty()) throw ConfigError("train_gan: no labeled points");
  if (samples.collocation.empty())
    throw ConfigError("train_gan: no collocation points");

  PdeParams fixed = params;
  fixed.swc_learnable = fixed.sor_learnable = fixed.m_learnable = false;

  Tape tape;
  GanNets nets{DenseNet::init_xavier(gen_spec),
               DenseNet::init_xavier(disc_spec),
               DenseNet::init_xavier(post_spec)};
  nets.generator.bind(tape);
  nets.discriminator.bind(tape);
  nets.posterior.bind(tape);
  const std::size_t mark = tape.size();

  NetOpt g_opt(&nets.generator);
  NetOpt d_opt(&nets.discriminator);
  NetOpt q_opt(&nets.posterior);
  Adam adam_d, adam_g;
  adam_d.lr = cfg.lr_d;
  adam_g.lr = cfg.lr_g;
  adam_d.beta1 = adam_g.beta1 = cfg.beta1;
  adam_d.beta2 = adam_g.beta2 = cfg.beta2;
  adam_d.eps = adam_g.eps = cfg.adam_eps;
  adam_d.reset(d_opt.idx.size());
  adam_g.reset(g_opt.idx.size() + q_opt.idx.size());

  std::vector<std::int32_t> d_leaves = nets.discriminator.trainable_leaf_ids();
  std::vector<std::int32_t> gq_leaves = nets.generator.trainable_leaf_ids();
  for (std::int32_t id : nets.posterior.trainable_leaf_ids())
    gq_leaves.push_back(id);
  NetOpt* d_view[] = {&d_opt};
  NetOpt* gq_view[] = {&g_opt, &q_opt};

  Rng rng(cfg.seed);
  const std::size_t n_real = reals.size();
  const std::size_t batch_r =
      cfg.batch_data > 0
          ? std::min<std::size_t>(cfg.batch_data, n_real)
          : n_real;
  std::vector<std::size_t> pool(n_real);
  std::iota(pool.begin(), pool.end(), 0);

  const std::size_t n_colloc = samples.collocation.size();
  const std::size_t batch_c =
      cfg.batch_collocation > 0
          ? std::min<std::size_t>(cfg.batch_collocation, n_colloc)
          : n_colloc;
  std::vector<std::size_t> cpool(n_colloc);
  std::iota(cpool.begin(), cpool.end(), 0);
  double cx_lo = samples.collocation.front().x, cx_hi = cx_lo;
  double ct_lo = samples.collocation.front().t, ct_hi = ct_lo;
  for (const CollocationPoint& p : samples.collocation) {
    cx_lo = std::min(cx_lo, p.x);
    cx_hi = std::max(cx_hi, p.x);
    ct_lo = std::min(ct_lo, p.t);
    ct_hi = std::max(ct_hi, p.t);
  }

  const int latent = cfg.latent_dim;
  std::vector<double> z(latent);
  std::vector<double> grad;
  std::vector<Var> in, real_logits, fake_logits, fake_s, penalties, residuals;
  std::vector<std::vector<double>> zs(batch_r, std::vector<double>(latent));

  const auto pick = [&](std::vector<std::size_t>& p, std::size_t k) {
    for (std::size_t i = 0; i < k; ++i)
      std::swap(p[i], p[i + rng.index(p.size() - i)]);
  };

  const auto begin_step = [&] {
    tape.rewind(mark);
    nets.generator.refresh(tape);
    nets.discriminator.refresh(tape);
    nets.posterior.refresh(tape);
  };

  const auto gen_forward = [&](double x, double t,
                               std::span<const double> zv, Var* xv,
                               Var* tv) {
    in.clear();
    in.push_back(tape.input(x));
    in.push_back(tape.input(t));
    for (double v : zv) in.push_back(tape.input(v));
    if (xv) *xv = in[0];
    if (tv) *tv = in[1];
    return nets.generator.forward(tape, in);
  };

  GanResult result;
  int saturated_run = 0;
  double d_loss_value = 0.0;
  GenLossTerms g_terms{};

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch_r < n_real) pick(pool, batch_r);
    for (std::size_t i = 0; i < batch_r; ++i)
      for (int d = 0; d < latent; ++d) zs[i][d] = rng.normal();

    for (int sub = 0; sub < cfg.d_steps; ++sub) {
      begin_step();
      real_logits.clear();
      fake_logits.clear();
      for (std::size_t i = 0; i < batch_r; ++i) {
        const Sample& p = reals[pool[i]];
        const Var rin[] = {tape.input(p.x), tape.input(p.t),
                           tape.input(p.s)};
        real_logits.push_back(nets.discriminator.forward(tape, rin));
        const Var s_fake = gen_forward(p.x, p.t, zs[i], nullptr, nullptr);
        const Var fin[] = {tape.constant(p.x), tape.constant(p.t), s_fake};
        fake_logits.push_back(nets.discriminator.forward(tape, fin));
      }
      const Var d_loss =
          discriminator_loss(tape, real_logits, fake_logits, cfg.swap_labels);
      if (!std::isfinite(d_loss.value)) {
        result.aborted = true;
        break;
      }
      d_loss_value = d_loss.value;
      tape.gradient(d_loss, d_leaves, grad);
      adam_apply(adam_d, grad, d_view);
    }
    if (result.aborted) break;

    if (batch_c < n_colloc && !cfg.resample_collocation) pick(cpool, batch_c);
    for (int sub = 0; sub < cfg.g_steps; ++sub) {
      begin_step();
      const FluxVars fv = bind_flux_vars(tape, fixed, {});
      fake_logits.clear();
      penalties.clear();
      residuals.clear();
      for (std::size_t i = 0; i < batch_r; ++i) {
        const Sample& p = reals[pool[i]];
        const Var s_fake = gen_forward(p.x, p.t, zs[i], nullptr, nullptr);
        const Var fin[] = {tape.constant(p.x), tape.constant(p.t), s_fake};
        fake_logits.push_back(nets.discriminator.forward(tape, fin));
        const Var qin[] = {fin[0], fin[1], s_fake};
        const std::vector<Var> mu = nets.posterior.forward_all(tape, qin);
        penalties.push_back(cfg.listing_objective
                                ? posterior_ce(tape, mu, zs[i])
                                : posterior_nll(tape, mu, zs[i]));
      }
      for (std::size_t i = 0; i < batch_c; ++i) {
        double cx, ct;
        if (cfg.resample_collocation) {
          cx = rng.uniform(cx_lo, cx_hi);
          ct = rng.uniform(ct_lo, ct_hi);
        } else {
          cx = samples.collocation[cpool[i]].x;
          ct = samples.collocation[cpool[i]].t;
        }
        for (int d = 0; d < latent; ++d) z[d] = rng.normal();
        Var xv, tv;
        const Var s_hat = gen_forward(cx, ct, z, &xv, &tv);
        residuals.push_back(
            residual_of(tape, s_hat, xv, tv, flux, fv, fixed.epsilon).r);
      }
      g_terms = generator_loss(tape, fake_logits, penalties, residuals, cfg);
      if (!std::isfinite(g_terms.total.value)) {
        result.aborted = true;
        break;
      }
      tape.gradient(g_terms.total, gq_leaves, grad);
      adam_apply(adam_g, grad, gq_view);
    }
    if (result.aborted) break;

    if (std::abs(g_terms.entropy.value) > 30.0) {
      if (++saturated_run == 100 && !result.saturation_warned) {
        result.saturation_warned = true;
        std::fprintf(stderr,
                     "warning: discriminator saturated (|mean fake logit| > "
                     "30 for 100 epochs)\n");
      }
    } else {
      saturated_run = 0;
    }

    const bool last = epoch == cfg.epochs - 1;
    double rel = -1.0;
    bool crossed = false;
    if (eval && ((epoch + 1) % eval->every == 0 || last)) {
      rel = relative_l2(nets.generator, *eval->profile, eval->times, eval->nx,
                        eval->x0, eval->members, Rng::derive(cfg.seed, 6));
      result.final_rel_l2 = rel;
      if (rel <= eval->threshold && result.epochs_to_threshold < 0) {
        result.epochs_to_threshold = epoch + 1;
        crossed = true;
      }
    }
    if (epoch % cfg.log_every == 0 || last || rel >= 0.0) {
      GanHistoryRow row;
      row.epoch = epoch;
      row.d_loss = d_loss_value;
      row.g_total = g_terms.total.value;
      row.g_entropy = g_terms.entropy.value;
      row.g_posterior = g_terms.posterior.value;
      row.g_pde = g_terms.pde.value;
      row.rel_l2 = rel;
      result.history.push_back(row);
    }
    if (crossed && cfg.stop_at_threshold) break;
  }

  result.nets = std::move(nets);
  return result;
}

UqEnsemble uq_ensemble(const DenseNet& generator, int n_members,
                       const UqGrid& grid, std::uint64_t seed,
                       bool keep_members) {
  if (n_members < 2) throw ConfigError("uq_ensemble: need >= 2 members");
  if (grid.times.empty() || grid.nx <= 0)
    throw ConfigError("uq_ensemble: empty grid");
  const int latent = generator.spec().input_dim - 2;
  if (latent < 1) throw ConfigError("uq_ensemble: generator has no latent");

  const std::size_t cells = grid.times.size() * grid.nx;
  UqEnsemble e;
  e.grid = grid;
  e.n_members = n_members;
  e.mean.assign(cells, 0.0);
  e.std_dev.assign(cells, 0.0);
  std::vector<double> sumsq(cells, 0.0);
  std::vector<double> member(cells);
  std::vector<double> in(2 + latent);

  Rng rng(seed);
  const double dx = (grid.x_max - grid.x_min) / grid.nx;
  for (int mbr = 0; mbr < n_members; ++mbr) {
    for (int d = 0; d < latent; ++d) in[2 + d] = rng.normal();
    std::size_t k = 0;
    for (double t : grid.times) {
      in[1] = t;
      for (int j = 0; j < grid.nx; ++j, ++k) {
        in[0] = grid.x_min + (j + 0.5) * dx;
        member[k] = generator.forward(in);
        e.mean[k] += member[k];
        sumsq[k] += member[k] * member[k];
      }
    }
    if (keep_members) e.members.push_back(member);
  }
  for (std::size_t k = 0; k < cells; ++k) {
    e.mean[k] /= n_members;
    const double var =
        (sumsq[k] - n_members * e.mean[k] * e.mean[k]) / (n_members - 1);
    e.std_dev[k] = std::sqrt(std::max(var, 0.0));
  }
  return e;
}

void save_ensemble(const UqEnsemble& e, const std::string& path) {
  std::ostringstream out;
  out << "t,x,mean,std,lo2sd,hi2sd\n";
  const double dx = (e.grid.x_max - e.grid.x_min) / e.grid.nx;
  std::size_t k = 0;
  for (double t : e.grid.times)
    for (int j = 0; j < e.grid.nx; ++j, ++k) {
      const double x = e.grid.x_min + (j + 0.5) * dx;
      out << fmt17(t) << ',' << fmt17(x) << ',' << fmt17(e.mean[k]) << ','
          << fmt17(e.std_dev[k]) << ','
          << fmt17(e.mean[k] - 2.0 * e.std_dev[k]) << ','
          << fmt17(e.mean[k] + 2.0 * e.std_dev[k]) << "\n";
    }
  write_text_file(path, out.str());
}

void save_gan_history(std::span<const GanHistoryRow> history,
                      const std::string& path) {
  std::ostringstream out;
  out << "epoch,d_loss,g_total,g_entropy,g_posterior,g_pde,rel_l2\n";
  for (const GanHistoryRow& r : history)
    out << r.epoch << ',' << fmt17(r.d_loss) << ',' << fmt17(r.g_total) << ','
        << fmt17(r.g_entropy) << ',' << fmt17(r.g_posterior) << ','
        << fmt17(r.g_pde) << ',' << fmt17(r.rel_l2) << "\n";
  write_text_file(path, out.str());
}

} // namespace blpinn
