#include "blpinn/network.hpp"

#include <cmath>
#include <sstream>

#include "blpinn/errors.hpp"
#include "blpinn/io.hpp"
#include "blpinn/rng.hpp"

namespace blpinn {

std::string activation_name(Activation a) {
  return a == Activation::Tanh ? "tanh" : "sigmoid";
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw ConfigError("unknown activation: " + name);
}

DenseNet::DenseNet(NetSpec spec) : spec_(std::move(spec)) {
  validate_spec();
  const int depth = static_cast<int>(spec_.layer_widths.size());
  offsets_.resize(depth + 1);
  offsets_[0] = 0;
  for (int l = 0; l < depth; ++l)
    offsets_[l + 1] = offsets_[l] + layer_param_count(l);
  params_.assign(offsets_.back(), 0.0);
  frozen_.assign(depth, false);
}

void DenseNet::validate_spec() const {
  if (spec_.input_dim <= 0) throw ConfigError("input_dim must be positive");
  if (spec_.layer_widths.empty())
    throw ConfigError("layer_widths must be nonempty");
  for (int w : spec_.layer_widths)
    if (w <= 0) throw ConfigError("layer widths must be positive");
}

std::size_t DenseNet::layer_param_count(int l) const {
  const int rows = spec_.layer_widths[l];
  return static_cast<std::size_t>(rows) * fan_in(l) + rows;
}

DenseNet DenseNet::init_xavier(NetSpec spec) {
  DenseNet net(std::move(spec));
  Rng rng(net.spec_.seed);
  for (int l = 0; l < net.depth(); ++l) {
    const int rows = net.spec_.layer_widths[l];
    const int cols = net.fan_in(l);
    const double a = std::sqrt(6.0 / (rows + cols));
    double* w = net.params_.data() + net.offsets_[l];
    for (int k = 0; k < rows * cols; ++k) w[k] = rng.uniform(-a, a);
    // biases (the rows entries after the weight block) stay zero
  }
  return net;
}

void DenseNet::load_params(std::span<const double> flat) {
  if (flat.size() != params_.size())
    throw ConfigError("parameter vector length mismatch: expected " +
                      std::to_string(params_.size()) + ", got " +
                      std::to_string(flat.size()));
  std::copy(flat.begin(), flat.end(), params_.begin());
}

void DenseNet::set_frozen(int first_k_layers) {
  if (first_k_layers < 0 || first_k_layers > depth())
    throw ConfigError("freeze count out of range: " +
                      std::to_string(first_k_layers));
  for (int l = 0; l < depth(); ++l) frozen_[l] = l < first_k_layers;
}

std::vector<std::size_t> DenseNet::trainable_indices() const {
  std::vector<std::size_t> idx;
  idx.reserve(params_.size());
  for (int l = 0; l < depth(); ++l) {
    if (frozen_[l]) continue;
    for (std::size_t k = offsets_[l]; k < offsets_[l + 1]; ++k)
      idx.push_back(k);
  }
  return idx;
}

void DenseNet::bind(Tape& tape) {
  leaf_ids_.resize(params_.size());
  for (std::size_t k = 0; k < params_.size(); ++k)
    leaf_ids_[k] = tape.input(params_[k]).id;
}

void DenseNet::refresh(Tape& tape) const {
  for (std::size_t k = 0; k < params_.size(); ++k)
    tape.set_input(Var{leaf_ids_[k], 0.0}, params_[k]);
}

std::vector<std::int32_t> DenseNet::trainable_leaf_ids() const {
  std::vector<std::int32_t> ids;
  for (std::size_t k : trainable_indices()) ids.push_back(leaf_ids_[k]);
  return ids;
}

std::vector<Var> DenseNet::forward_all(Tape& tape,
                                       std::span<const Var> inputs) const {
  if (static_cast<int>(inputs.size()) != spec_.input_dim)
    throw ConfigError("forward: expected " +
                      std::to_string(spec_.input_dim) + " inputs, got " +
                      std::to_string(inputs.size()));
  std::vector<Var> cur(inputs.begin(), inputs.end());
  std::vector<Var> next;
  for (int l = 0; l < depth(); ++l) {
    const int rows = spec_.layer_widths[l];
    const int cols = fan_in(l);
    const std::size_t base = offsets_[l];
    const std::size_t bias = base + static_cast<std::size_t>(rows) * cols;
    next.clear();
    next.reserve(rows);
    for (int r = 0; r < rows; ++r) {
      Var z{leaf_ids_[bias + r], params_[bias + r]};
      const std::size_t row = base + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) {
        Var w{leaf_ids_[row + c], params_[row + c]};
        z = tape.add(z, tape.mul(w, cur[c]));
      }
      if (l + 1 < depth())
        z = spec_.activation == Activation::Tanh ? tape.tanh(z)
                                                 : tape.sigmoid(z);
      next.push_back(z);
    }
    cur.swap(next);
  }
  return cur;
}

Var DenseNet::forward(Tape& tape, std::span<const Var> inputs) const {
  return forward_all(tape, inputs)[0];
}

std::vector<double>
DenseNet::forward_all(std::span<const double> inputs) const {
  if (static_cast<int>(inputs.size()) != spec_.input_dim)
    throw ConfigError("forward: input dimension mismatch");
  std::vector<double> cur(inputs.begin(), inputs.end());
  std::vector<double> next;
  for (int l = 0; l < depth(); ++l) {
    const int rows = spec_.layer_widths[l];
    const int cols = fan_in(l);
    const std::size_t base = offsets_[l];
    const std::size_t bias = base + static_cast<std::size_t>(rows) * cols;
    next.assign(rows, 0.0);
    for (int r = 0; r < rows; ++r) {
      double z = params_[bias + r];
      const double* w = params_.data() + base + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) z += w[c] * cur[c];
      if (l + 1 < depth())
        z = spec_.activation == Activation::Tanh
                ? std::tanh(z)
                : 1.0 / (1.0 + std::exp(-z));
      next[r] = z;
    }
    cur.swap(next);
  }
  return cur;
}

double DenseNet::forward(std::span<const double> inputs) const {
  return forward_all(inputs)[0];
}

void DenseNet::save(const std::string& path) const {
  std::ostringstream out;
  out << "net input_dim=" << spec_.input_dim << " widths=";
  for (int l = 0; l < depth(); ++l)
    out << (l ? "," : "") << spec_.layer_widths[l];
  out << " activation=" << activation_name(spec_.activation) << " frozen=";
  for (int l = 0; l < depth(); ++l) out << (l ? "," : "") << (frozen_[l] ? 1 : 0);
  out << " count=" << params_.size() << "\n";
  for (double v : params_) out << fmt17(v) << "\n";
  write_text_file(path, out.str());
}

DenseNet DenseNet::load(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string header;
  if (!std::getline(in, header))
    throw ConfigError("empty checkpoint: " + path);

  NetSpec spec;
  std::vector<int> frozen_flags;
  std::size_t count = 0;
  for (const auto& tok : split(header, ' ')) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "input_dim") {
      spec.input_dim = static_cast<int>(parse_int(val, "input_dim"));
    } else if (key == "widths") {
      for (const auto& w : split(val, ','))
        spec.layer_widths.push_back(static_cast<int>(parse_int(w, "width")));
    } else if (key == "activation") {
      spec.activation = activation_from_name(val);
    } else if (key == "frozen") {
      for (const auto& f : split(val, ','))
        frozen_flags.push_back(static_cast<int>(parse_int(f, "frozen")));
    } else if (key == "count") {
      count = static_cast<std::size_t>(parse_int(val, "count"));
    }
  }

  DenseNet net(spec);
  if (count != net.params_.size())
    throw ConfigError("checkpoint parameter count mismatch in " + path);
  if (frozen_flags.size() != static_cast<std::size_t>(net.depth()))
    throw ConfigError("checkpoint frozen-flag count mismatch in " + path);
  for (int l = 0; l < net.depth(); ++l) net.frozen_[l] = frozen_flags[l] != 0;

  std::string line;
  for (std::size_t k = 0; k < count; ++k) {
    if (!std::getline(in, line))
      throw ConfigError("checkpoint truncated: " + path);
    net.params_[k] = parse_double(line, "checkpoint value");
  }
  return net;
}

} // namespace blpinn
