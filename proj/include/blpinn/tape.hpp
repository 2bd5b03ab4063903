#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace blpinn {

// Reverse-mode autodiff on a growable tape of scalar ops.
//
// Nodes are recorded in topological order: parents always precede children.
// Two adjoint sweeps are provided:
//   * gradient()       numeric sweep, one double per node, O(tape) per call
//   * gradient_as_vars()  adjoint pass recorded back onto the tape, so the
//                      returned derivatives are themselves differentiable
//                      (reverse-over-reverse second derivatives)
enum class Op : std::uint8_t {
  Input,
  Constant,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Square,
  Pow,
  Tanh,
  Sigmoid,
  Exp,
  Log,
};

// Lightweight handle: node id plus a cached copy of the primal value.
struct Var {
  std::int32_t id = -1;
  double value = 0.0;
};

// Raised at record time when an op leaves its domain (div by zero,
// log of a non-positive value, non-finite pow). Carries the offending
// node id so callers can locate the op in the recording.
class TapeDomainError : public std::runtime_error {
public:
  TapeDomainError(const std::string& msg, std::int32_t node)
      : std::runtime_error(msg + " (node " + std::to_string(node) + ")"),
        node_id(node) {}
  std::int32_t node_id;
};

class Tape {
public:
  Tape() = default;
  explicit Tape(std::size_t reserve_nodes) { nodes_.reserve(reserve_nodes); }

  std::size_t size() const { return nodes_.size(); }

  // Truncates the tape back to `mark` nodes. Handles below the mark stay
  // valid; everything above is discarded. Used to reuse one tape across
  // training steps while keeping parameter leaves alive.
  void rewind(std::size_t mark) { nodes_.resize(mark); }

  Var input(double value) { return push(Op::Input, -1, -1, value); }
  Var constant(double value) { return push(Op::Constant, -1, -1, value); }

  // Overwrites the value of an existing Input leaf (no new node).
  void set_input(Var v, double value) { nodes_[v.id].val = value; }

  double value(std::int32_t id) const { return nodes_[id].val; }

  Var add(Var a, Var b) { return push(Op::Add, a.id, b.id, a.value + b.value); }
  Var sub(Var a, Var b) { return push(Op::Sub, a.id, b.id, a.value - b.value); }
  Var mul(Var a, Var b) { return push(Op::Mul, a.id, b.id, a.value * b.value); }

  Var div(Var a, Var b) {
    if (b.value == 0.0)
      throw TapeDomainError("div by zero", static_cast<std::int32_t>(size()));
    return push(Op::Div, a.id, b.id, a.value / b.value);
  }

  Var neg(Var a) { return push(Op::Neg, a.id, -1, -a.value); }
  Var square(Var a) { return push(Op::Square, a.id, -1, a.value * a.value); }

  Var pow(Var base, Var exponent) {
    const double v = std::pow(base.value, exponent.value);
    if (!std::isfinite(v))
      throw TapeDomainError("pow out of domain",
                            static_cast<std::int32_t>(size()));
    return push(Op::Pow, base.id, exponent.id, v);
  }

  Var tanh(Var a) { return push(Op::Tanh, a.id, -1, std::tanh(a.value)); }

  Var sigmoid(Var a) {
    const double x = clamp_exp_arg(a.value);
    const double v =
        x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                 : std::exp(x) / (1.0 + std::exp(x));
    return push(Op::Sigmoid, a.id, -1, v);
  }

  Var exp(Var a) {
    return push(Op::Exp, a.id, -1, std::exp(clamp_exp_arg(a.value)));
  }

  Var log(Var a) {
    if (a.value <= 0.0)
      throw TapeDomainError("log of non-positive value",
                            static_cast<std::int32_t>(size()));
    return push(Op::Log, a.id, -1, std::log(a.value));
  }

  Var add(Var a, double b) { return add(a, constant(b)); }
  Var sub(Var a, double b) { return sub(a, constant(b)); }
  Var sub(double a, Var b) { return sub(constant(a), b); }
  Var mul(Var a, double b) { return mul(a, constant(b)); }
  Var div(Var a, double b) { return div(a, constant(b)); }
  Var div(double a, Var b) { return div(constant(a), b); }

  // Numeric adjoint sweep from `seed`. Fills `out[k]` with d(seed)/d(wrt[k]).
  // Adjoints are not propagated below the smallest id in `wrt`.
  void gradient(Var seed, std::span<const std::int32_t> wrt,
                std::vector<double>& out);

  // Adjoint pass recorded onto the tape itself. Returns one Var per wrt
  // node holding d(seed)/d(wrt[k]); differentiate those again for second
  // derivatives. Gradients w.r.t. Constant-op exponents are skipped.
  std::vector<Var> gradient_as_vars(Var seed,
                                 std::span<const std::int32_t> wrt);

private:
  struct Node {
    double val;
    std::int32_t a;
    std::int32_t b;
    Op op;
  };

  static double clamp_exp_arg(double x) {
    return x < -500.0 ? -500.0 : (x > 500.0 ? 500.0 : x);
  }

  Var push(Op op, std::int32_t a, std::int32_t b, double val) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{val, a, b, op});
    return Var{id, val};
  }

  Var node_var(std::int32_t id) const { return Var{id, nodes_[id].val}; }

  std::vector<Node> nodes_;
  std::vector<double> adj_;          // scratch for gradient()
  std::vector<std::int32_t> adjvar_; // scratch for gradient_as_vars()
};

} // namespace blpinn
