#include "blpinn/tape.hpp"

#include <algorithm>

namespace blpinn {

void Tape::gradient(Var seed, std::span<const std::int32_t> wrt,
                    std::vector<double>& out) {
  out.assign(wrt.size(), 0.0);
  if (wrt.empty() || seed.id < 0) return;

  std::int32_t lo = seed.id;
  for (std::int32_t id : wrt) lo = std::min(lo, id);

  if (adj_.size() < static_cast<std::size_t>(seed.id) + 1)
    adj_.resize(seed.id + 1);
  std::fill(adj_.begin() + lo, adj_.begin() + seed.id + 1, 0.0);
  adj_[seed.id] = 1.0;

  for (std::int32_t i = seed.id; i >= lo; --i) {
    const double w = adj_[i];
    if (w == 0.0) continue;
    const Node& n = nodes_[i];
    switch (n.op) {
    case Op::Input:
    case Op::Constant:
      break;
    case Op::Add:
      if (n.a >= lo) adj_[n.a] += w;
      if (n.b >= lo) adj_[n.b] += w;
      break;
    case Op::Sub:
      if (n.a >= lo) adj_[n.a] += w;
      if (n.b >= lo) adj_[n.b] -= w;
      break;
    case Op::Mul:
      if (n.a >= lo) adj_[n.a] += w * nodes_[n.b].val;
      if (n.b >= lo) adj_[n.b] += w * nodes_[n.a].val;
      break;
    case Op::Div: {
      const double bv = nodes_[n.b].val;
      if (n.a >= lo) adj_[n.a] += w / bv;
      if (n.b >= lo) adj_[n.b] -= w * n.val / bv;
      break;
    }
    case Op::Neg:
      if (n.a >= lo) adj_[n.a] -= w;
      break;
    case Op::Square:
      if (n.a >= lo) adj_[n.a] += w * 2.0 * nodes_[n.a].val;
      break;
    case Op::Pow: {
      const double av = nodes_[n.a].val;
      const double bv = nodes_[n.b].val;
      if (n.a >= lo) adj_[n.a] += w * bv * std::pow(av, bv - 1.0);
      if (n.b >= lo && nodes_[n.b].op != Op::Constant) {
        if (av <= 0.0)
          throw TapeDomainError("pow exponent gradient needs positive base",
                                i);
        adj_[n.b] += w * n.val * std::log(av);
      }
      break;
    }
    case Op::Tanh:
      if (n.a >= lo) adj_[n.a] += w * (1.0 - n.val * n.val);
      break;
    case Op::Sigmoid:
      if (n.a >= lo) adj_[n.a] += w * n.val * (1.0 - n.val);
      break;
    case Op::Exp:
      if (n.a >= lo) adj_[n.a] += w * n.val;
      break;
    case Op::Log:
      if (n.a >= lo) adj_[n.a] += w / nodes_[n.a].val;
      break;
    }
  }

  for (std::size_t k = 0; k < wrt.size(); ++k)
    out[k] = wrt[k] <= seed.id ? adj_[wrt[k]] : 0.0;
}

std::vector<Var> Tape::gradient_as_vars(Var seed,
                                     std::span<const std::int32_t> wrt) {
  std::vector<Var> result(wrt.size());
  if (wrt.empty()) return result;

  std::int32_t lo = seed.id;
  for (std::int32_t id : wrt) lo = std::min(lo, id);

  if (adjvar_.size() < static_cast<std::size_t>(seed.id) + 1)
    adjvar_.resize(seed.id + 1);
  std::fill(adjvar_.begin() + lo, adjvar_.begin() + seed.id + 1, -1);

  const Var one = constant(1.0);
  adjvar_[seed.id] = one.id;

  // `accum` aliases the incoming adjoint when the slot is empty, so long
  // add-chains (loss accumulators) cost zero extra nodes.
  const auto accum = [&](std::int32_t target, Var contrib) {
    if (adjvar_[target] < 0)
      adjvar_[target] = contrib.id;
    else
      adjvar_[target] = add(node_var(adjvar_[target]), contrib).id;
  };

  for (std::int32_t i = seed.id; i >= lo; --i) {
    if (adjvar_[i] < 0) continue;
    const Var w = node_var(adjvar_[i]);
    const Node n = nodes_[i];
    switch (n.op) {
    case Op::Input:
    case Op::Constant:
      break;
    case Op::Add:
      if (n.a >= lo) accum(n.a, w);
      if (n.b >= lo) accum(n.b, w);
      break;
    case Op::Sub:
      if (n.a >= lo) accum(n.a, w);
      if (n.b >= lo) accum(n.b, neg(w));
      break;
    case Op::Mul:
      if (n.a >= lo) accum(n.a, mul(w, node_var(n.b)));
      if (n.b >= lo) accum(n.b, mul(w, node_var(n.a)));
      break;
    case Op::Div:
      if (n.a >= lo) accum(n.a, div(w, node_var(n.b)));
      if (n.b >= lo)
        accum(n.b, neg(div(mul(w, node_var(i)), node_var(n.b))));
      break;
    case Op::Neg:
      if (n.a >= lo) accum(n.a, neg(w));
      break;
    case Op::Square:
      if (n.a >= lo) {
        const Var a = node_var(n.a);
        accum(n.a, mul(w, add(a, a)));
      }
      break;
    case Op::Pow: {
      const Var base = node_var(n.a);
      const Var expo = node_var(n.b);
      if (n.a >= lo)
        accum(n.a, mul(mul(w, expo), pow(base, sub(expo, one))));
      if (n.b >= lo && nodes_[n.b].op != Op::Constant) {
        if (base.value <= 0.0)
          throw TapeDomainError("pow exponent gradient needs positive base",
                                i);
        accum(n.b, mul(mul(w, node_var(i)), log(base)));
      }
      break;
    }
    case Op::Tanh: {
      // d tanh = 1 - tanh^2, reusing the forward value.
      const Var v = node_var(i);
      if (n.a >= lo) accum(n.a, sub(w, mul(w, square(v))));
      break;
    }
    case Op::Sigmoid: {
      // d sigmoid = v (1 - v).
      const Var v = node_var(i);
      if (n.a >= lo) {
        const Var wv = mul(w, v);
        accum(n.a, sub(wv, mul(wv, v)));
      }
      break;
    }
    case Op::Exp:
      if (n.a >= lo) accum(n.a, mul(w, node_var(i)));
      break;
    case Op::Log:
      if (n.a >= lo) accum(n.a, div(w, node_var(n.a)));
      break;
    }
  }

  for (std::size_t k = 0; k < wrt.size(); ++k) {
    const std::int32_t id = wrt[k];
    if (id <= seed.id && adjvar_[id] >= 0)
      result[k] = node_var(adjvar_[id]);
    else
      result[k] = constant(0.0);
  }
  return result;
}

} // namespace blpinn
