#include "blpinn/config.hpp"

#include <sstream>

#include "blpinn/errors.hpp"
#include "blpinn/io.hpp"
#include "blpinn/rng.hpp"

namespace blpinn {

Ini Ini::parse_file(const std::string& path) {
  return parse_string(read_text_file(path));
}

Ini Ini::parse_string(const std::string& text) {
  Ini ini;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t cut = line.find_first_of("#;");
    if (cut != std::string::npos) line.erase(cut);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    ini.sections_[section][key] = trim(line.substr(eq + 1));
  }
  return ini;
}

bool Ini::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string Ini::get(const std::string& section, const std::string& key,
                     const std::string& fallback) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  const auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double Ini::get_double(const std::string& section, const std::string& key,
                       double fallback) const {
  if (!has(section, key)) return fallback;
  return parse_double(get(section, key, ""), section + "." + key);
}

long long Ini::get_int(const std::string& section, const std::string& key,
                       long long fallback) const {
  if (!has(section, key)) return fallback;
  return parse_int(get(section, key, ""), section + "." + key);
}

bool Ini::get_bool(const std::string& section, const std::string& key,
                   bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config " + section + "." + key + ": expected a boolean, got '" + v + "'");
}

std::vector<double> Ini::get_doubles(const std::string& section,
                                     const std::string& key,
                                     const std::vector<double>& fallback) const {
  if (!has(section, key)) return fallback;
  std::vector<double> out;
  for (const std::string& tok : split(get(section, key, ""), ','))
    out.push_back(parse_double(trim(tok), section + "." + key));
  return out;
}

std::vector<int> Ini::get_ints(const std::string& section,
                               const std::string& key,
                               const std::vector<int>& fallback) const {
  if (!has(section, key)) return fallback;
  std::vector<int> out;
  for (const std::string& tok : split(get(section, key, ""), ','))
    out.push_back(static_cast<int>(parse_int(trim(tok), section + "." + key)));
  return out;
}

RunConfig RunConfig::load(const std::string& path) {
  return from_ini(Ini::parse_file(path));
}

RunConfig RunConfig::from_ini(const Ini& ini) {
  RunConfig c;
  c.seed = static_cast<std::uint64_t>(ini.get_int("run", "seed", 0));

  PdeParams& p = c.physics;
  p.swc = ini.get_double("physics", "swc", p.swc);
  p.sor = ini.get_double("physics", "sor", p.sor);
  p.m = ini.get_double("physics", "m", p.m);
  p.ng_sin_theta = ini.get_double("physics", "ng_sin_theta", p.ng_sin_theta);
  p.kro0 = ini.get_double("physics", "kro0", p.kro0);
  p.n_o = ini.get_double("physics", "n_o", p.n_o);
  p.n_w = ini.get_double("physics", "n_w", p.n_w);
  p.m0 = ini.get_double("physics", "m0", p.m0);
  p.epsilon = ini.get_double("physics", "epsilon", p.epsilon);
  for (const std::string& tok :
       split(ini.get("physics", "learn", ""), ',')) {
    const std::string name = trim(tok);
    if (name.empty()) continue;
    if (name == "swc") p.swc_learnable = true;
    else if (name == "sor") p.sor_learnable = true;
    else if (name == "m") p.m_learnable = true;
    else throw ConfigError("physics.learn: unknown parameter '" + name + "'");
  }
  c.flux = flux_kind_from_name(
      ini.get("physics", "flux", flux_kind_name(c.flux)));
  c.physics_init = p;
  c.physics_init.swc = ini.get_double("physics", "init_swc", p.swc);
  c.physics_init.sor = ini.get_double("physics", "init_sor", p.sor);
  c.physics_init.m = ini.get_double("physics", "init_m", p.m);

  Scenario& sc = c.scenario;
  sc.s_left = ini.get_double("scenario", "s_left", sc.s_left);
  sc.s_right = ini.get_double("scenario", "s_right", sc.s_right);
  sc.x0 = ini.get_double("scenario", "x0", sc.x0);
  sc.t_max = ini.get_double("scenario", "t_max", sc.t_max);
  sc.snapshot_times =
      ini.get_doubles("scenario", "snapshot_times", sc.snapshot_times);
  sc.eval_nx = static_cast<int>(ini.get_int("scenario", "eval_nx", sc.eval_nx));

  SamplingConfig& sm = c.sampling;
  sm.t_max = sc.t_max;
  sm.x0 = sc.x0;
  sm.scheme = scheme_from_name(
      ini.get("sampling", "scheme", scheme_name(sm.scheme)));
  sm.n = static_cast<int>(ini.get_int("sampling", "n", sm.n));
  sm.n0 = static_cast<int>(ini.get_int("sampling", "n0", sm.n0));
  sm.nb = static_cast<int>(ini.get_int("sampling", "nb", sm.nb));
  sm.nr = static_cast<int>(ini.get_int("sampling", "nr", sm.nr));
  sm.noise_sigma = ini.get_double("sampling", "noise_sigma", sm.noise_sigma);
  sm.noise_initial_only =
      ini.get_bool("sampling", "noise_initial_only", sm.noise_initial_only);
  sm.wells = ini.get_doubles("sampling", "wells", sm.wells);
  sm.early_t_max = ini.get_double("sampling", "early_t_max", sm.early_t_max);
  sm.x_min = ini.get_double("sampling", "x_min", sm.x_min);
  sm.x_max = ini.get_double("sampling", "x_max", sm.x_max);
  sm.t_max = ini.get_double("sampling", "t_max", sm.t_max);
  sm.seed = Rng::derive(c.seed, StreamSampling);

  NetSpec& net = c.network;
  net.input_dim = 2;
  net.layer_widths =
      ini.get_ints("network", "widths", std::vector<int>(8, 20));
  net.layer_widths.push_back(1);
  net.activation = activation_from_name(
      ini.get("network", "activation", activation_name(net.activation)));
  net.seed = Rng::derive(c.seed, StreamNetInit);

  TrainConfig& tr = c.training;
  {
    const std::string mode = ini.get("training", "mode", "identify");
    if (mode == "identify") tr.mode = TrainConfig::Mode::Identify;
    else if (mode == "infer") tr.mode = TrainConfig::Mode::Infer;
    else throw ConfigError("training.mode: expected identify or infer");
  }
  tr.epochs = static_cast<int>(ini.get_int("training", "epochs", tr.epochs));
  tr.learning_rate =
      ini.get_double("training", "learning_rate", tr.learning_rate);
  tr.omega = ini.get_double("training", "omega", tr.omega);
  tr.batch = static_cast<int>(ini.get_int("training", "batch", tr.batch));
  tr.freeze_first_k = static_cast<int>(
      ini.get_int("training", "freeze_first_k", tr.freeze_first_k));
  tr.log_every =
      static_cast<int>(ini.get_int("training", "log_every", tr.log_every));
  tr.seed = Rng::derive(c.seed, StreamTraining);
  c.data_path = ini.get("training", "data", "");
  c.checkpoint_path = ini.get("training", "checkpoint", "");

  GanConfig& g = c.gan;
  g.latent_dim =
      static_cast<int>(ini.get_int("gan", "latent_dim", g.latent_dim));
  g.lambda_entropy = ini.get_double("gan", "lambda", g.lambda_entropy);
  g.w_posterior = ini.get_double("gan", "w_posterior", g.w_posterior);
  g.w_pde = ini.get_double("gan", "w_pde", g.w_pde);
  g.epochs = static_cast<int>(ini.get_int("gan", "epochs", g.epochs));
  g.stop_at_threshold =
      ini.get_bool("gan", "stop_at_threshold", g.stop_at_threshold);
  g.d_steps = static_cast<int>(ini.get_int("gan", "d_steps", g.d_steps));
  g.g_steps = static_cast<int>(ini.get_int("gan", "g_steps", g.g_steps));
  g.lr_d = ini.get_double("gan", "lr_d", g.lr_d);
  g.lr_g = ini.get_double("gan", "lr_g", g.lr_g);
  g.batch_data =
      static_cast<int>(ini.get_int("gan", "batch_data", g.batch_data));
  g.batch_collocation = static_cast<int>(
      ini.get_int("gan", "batch_collocation", g.batch_collocation));
  g.listing_objective =
      ini.get_bool("gan", "listing_objective", g.listing_objective);
  g.swap_labels = ini.get_bool("gan", "swap_labels", g.swap_labels);
  g.resample_collocation =
      ini.get_bool("gan", "resample_collocation", g.resample_collocation);
  g.log_every =
      static_cast<int>(ini.get_int("gan", "log_every", g.log_every));
  g.seed = Rng::derive(c.seed, StreamTraining);
  c.gen_widths = ini.get_ints("gan", "gen_widths", {20, 20, 20, 20});
  c.disc_widths = ini.get_ints("gan", "disc_widths", {20, 20});
  c.post_widths = ini.get_ints("gan", "post_widths", {20, 20});

  c.uq_members =
      static_cast<int>(ini.get_int("uq", "members", c.uq_members));
  c.uq_grid.nx = static_cast<int>(ini.get_int("uq", "nx", sc.eval_nx));
  c.uq_grid.times = ini.get_doubles("uq", "times", sc.snapshot_times);
  c.uq_grid.x_min = sm.x_min;
  c.uq_grid.x_max = sm.x_max;

  c.physics.validate();
  c.physics_init.validate();
  return c;
}

void RunConfig::reseed(std::uint64_t new_seed) {
  seed = new_seed;
  sampling.seed = Rng::derive(seed, StreamSampling);
  network.seed = Rng::derive(seed, StreamNetInit);
  training.seed = Rng::derive(seed, StreamTraining);
  gan.seed = Rng::derive(seed, StreamTraining);
}

SolutionProfile RunConfig::make_profile() const {
  return riemann_solve(flux_fn(flux, physics), scenario.s_left,
                       scenario.s_right);
}

NetSpec RunConfig::gan_spec(const std::vector<int>& widths, int input_dim,
                            int output_dim, std::uint64_t stream) const {
  NetSpec s;
  s.input_dim = input_dim;
  s.layer_widths = widths;
  s.layer_widths.push_back(output_dim);
  s.activation = network.activation;
  s.seed = Rng::derive(seed, stream);
  return s;
}

} // namespace blpinn
