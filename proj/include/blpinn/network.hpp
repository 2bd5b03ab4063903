#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "blpinn/tape.hpp"

namespace blpinn {

enum class Activation { Tanh, Sigmoid };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct NetSpec {
  int input_dim = 2;
  std::vector<int> layer_widths; // hidden widths, final entry = output dim
  Activation activation = Activation::Tanh;
  std::uint64_t seed = 0;
};

// Dense feed-forward network with affine output layer. Parameters live in
// one flat vector ordered layer-major, row-major, weights before biases.
// To evaluate on a tape, bind() once (records one Input leaf per parameter)
// and refresh() after every parameter update.
class DenseNet {
public:
  DenseNet() = default;
  explicit DenseNet(NetSpec spec); // all parameters zero

  // Weights uniform on +-sqrt(6/(fan_in+fan_out)), biases zero,
  // deterministic under spec.seed.
  static DenseNet init_xavier(NetSpec spec);

  const NetSpec& spec() const { return spec_; }
  int depth() const { return static_cast<int>(spec_.layer_widths.size()); }
  int output_dim() const { return spec_.layer_widths.back(); }
  std::size_t param_count() const { return params_.size(); }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  void load_params(std::span<const double> flat); // length must match

  // Marks layers 0..k-1 frozen; trainable indices exclude them.
  void set_frozen(int first_k_layers);
  const std::vector<bool>& frozen() const { return frozen_; }
  std::vector<std::size_t> trainable_indices() const;

  void bind(Tape& tape);
  void refresh(Tape& tape) const;
  bool bound() const { return !leaf_ids_.empty(); }
  const std::vector<std::int32_t>& leaf_ids() const { return leaf_ids_; }
  std::vector<std::int32_t> trainable_leaf_ids() const;

  // Recorded forward pass; inputs must live on `tape` and bind() must have
  // been called on the same tape below the current position.
  Var forward(Tape& tape, std::span<const Var> inputs) const;
  std::vector<Var> forward_all(Tape& tape, std::span<const Var> inputs) const;

  // Plain evaluation without a tape (for reporting and ensembles).
  double forward(std::span<const double> inputs) const;
  std::vector<double> forward_all(std::span<const double> inputs) const;

  void save(const std::string& path) const;
  static DenseNet load(const std::string& path);

private:
  void validate_spec() const;
  std::size_t layer_param_count(int l) const;
  int fan_in(int l) const {
    return l == 0 ? spec_.input_dim : spec_.layer_widths[l - 1];
  }

  NetSpec spec_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_; // start of each layer's block
  std::vector<bool> frozen_;
  std::vector<std::int32_t> leaf_ids_;
};

} // namespace blpinn
