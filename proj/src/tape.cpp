#include "panoscan/tape.hpp"

#include <algorithm>
#include <cmath>

#include "panoscan/errors.hpp"

namespace panoscan {

namespace {

// Stable softmax into `out`; returns nothing. Masked logits (very negative)
// come out as exact zeros.
void softmax_values(const Tensor& x, Tensor& out) {
  double mx = x.data[0];
  for (double v : x.data) mx = std::max(mx, v);
  double z = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    out.data[i] = std::exp(x.data[i] - mx);
    z += out.data[i];
  }
  for (auto& p : out.data) p /= z;
}

}  // namespace

Tape::Node& Tape::node(Var v) {
  if (v.i >= nodes_.size()) throw ContractError("Tape: invalid Var");
  return nodes_[v.i];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.i >= nodes_.size()) throw ContractError("Tape: invalid Var");
  return nodes_[v.i];
}

Var Tape::push(Tensor value, std::function<void(Tape&, const Node&)> back) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    n.grad = Tensor(n.value.shape, 0.0);
    n.back = std::move(back);
  }
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Tensor& Tape::val(Var v) const { return node(v).value; }

double Tape::scalar_val(Var v) const {
  const Node& n = node(v);
  if (!n.value.is_scalar()) throw ContractError("scalar_val: not a scalar");
  return n.value.data[0];
}

const Tensor& Tape::grad(Var v) const {
  if (!grad_enabled_) throw ContractError("grad: tape is forward-only");
  return node(v).grad;
}

Var Tape::constant(Tensor value) { return push(std::move(value), {}); }

Var Tape::param(ParamEntry& entry) {
  for (const auto& [p, idx] : param_cache_) {
    if (p == &entry) return Var{idx};
  }
  ParamEntry* p = &entry;
  Var v = push(entry.value, [p](Tape&, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      p->grad.data[i] += n.grad.data[i];
  });
  param_cache_.emplace_back(p, v.i);
  return v;
}

Var Tape::add(Var a, Var b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (!x.same_shape(y)) throw ContractError("add: shape mismatch");
  Tensor out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += y.data[i];
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i, bi = b.i;
  return push(std::move(out), [ai, bi](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i) {
      t.nodes_[ai].grad.data[i] += n.grad.data[i];
      t.nodes_[bi].grad.data[i] += n.grad.data[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (!x.same_shape(y)) throw ContractError("sub: shape mismatch");
  Tensor out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= y.data[i];
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i, bi = b.i;
  return push(std::move(out), [ai, bi](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i) {
      t.nodes_[ai].grad.data[i] += n.grad.data[i];
      t.nodes_[bi].grad.data[i] -= n.grad.data[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  // Broadcast: normalise so that if exactly one side is scalar, it is b.
  if (val(a).is_scalar() && !val(b).is_scalar()) std::swap(a, b);
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  const bool bcast = y.is_scalar() && !x.is_scalar();
  if (!bcast && !x.same_shape(y)) throw ContractError("mul: shape mismatch");
  Tensor out = x;
  if (bcast) {
    for (auto& v : out.data) v *= y.data[0];
  } else {
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= y.data[i];
  }
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i, bi = b.i;
  if (bcast) {
    return push(std::move(out), [ai, bi](Tape& t, const Node& n) {
      const double s = t.nodes_[bi].value.data[0];
      double acc = 0.0;
      for (std::size_t i = 0; i < n.grad.numel(); ++i) {
        t.nodes_[ai].grad.data[i] += n.grad.data[i] * s;
        acc += n.grad.data[i] * t.nodes_[ai].value.data[i];
      }
      t.nodes_[bi].grad.data[0] += acc;
    });
  }
  return push(std::move(out), [ai, bi](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i) {
      t.nodes_[ai].grad.data[i] += n.grad.data[i] * t.nodes_[bi].value.data[i];
      t.nodes_[bi].grad.data[i] += n.grad.data[i] * t.nodes_[ai].value.data[i];
    }
  });
}

Var Tape::scale(Var a, double c) {
  Tensor out = val(a);
  for (auto& v : out.data) v *= c;
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i;
  return push(std::move(out), [ai, c](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      t.nodes_[ai].grad.data[i] += n.grad.data[i] * c;
  });
}

Var Tape::add_const(Var a, double c) {
  Tensor out = val(a);
  for (auto& v : out.data) v += c;
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i;
  return push(std::move(out), [ai](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      t.nodes_[ai].grad.data[i] += n.grad.data[i];
  });
}

Var Tape::tanh(Var a) {
  Tensor out = val(a);
  for (auto& v : out.data) v = std::tanh(v);
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i;
  return push(std::move(out), [ai](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i) {
      const double y = n.value.data[i];
      t.nodes_[ai].grad.data[i] += n.grad.data[i] * (1.0 - y * y);
    }
  });
}

Var Tape::sigmoid(Var a) {
  Tensor out = val(a);
  for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i;
  return push(std::move(out), [ai](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i) {
      const double y = n.value.data[i];
      t.nodes_[ai].grad.data[i] += n.grad.data[i] * y * (1.0 - y);
    }
  });
}

Var Tape::exp(Var a) {
  Tensor out = val(a);
  for (auto& v : out.data) v = std::exp(v);
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i;
  return push(std::move(out), [ai](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      t.nodes_[ai].grad.data[i] += n.grad.data[i] * n.value.data[i];
  });
}

Var Tape::log(Var a) {
  const Tensor& x = val(a);
  Tensor out = x;
  for (auto& v : out.data) {
    if (v <= 0.0) throw ContractError("log: non-positive input");
    v = std::log(v);
  }
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i;
  return push(std::move(out), [ai](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      t.nodes_[ai].grad.data[i] += n.grad.data[i] / t.nodes_[ai].value.data[i];
  });
}

Var Tape::softplus(Var a) {
  Tensor out = val(a);
  for (auto& v : out.data)
    v = std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v)));
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i;
  return push(std::move(out), [ai](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i) {
      const double x = t.nodes_[ai].value.data[i];
      t.nodes_[ai].grad.data[i] += n.grad.data[i] / (1.0 + std::exp(-x));
    }
  });
}

Var Tape::relu(Var a) {
  Tensor out = val(a);
  for (auto& v : out.data) v = std::max(v, 0.0);
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i;
  return push(std::move(out), [ai](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i) {
      if (t.nodes_[ai].value.data[i] > 0.0)
        t.nodes_[ai].grad.data[i] += n.grad.data[i];
    }
  });
}

Var Tape::square(Var a) {
  Tensor out = val(a);
  for (auto& v : out.data) v *= v;
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i;
  return push(std::move(out), [ai](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      t.nodes_[ai].grad.data[i] +=
          n.grad.data[i] * 2.0 * t.nodes_[ai].value.data[i];
  });
}

Var Tape::clamp_const(Var a, double lo, double hi) {
  if (lo > hi) throw ArgumentError("clamp_const: lo > hi");
  Tensor out = val(a);
  for (auto& v : out.data) v = std::clamp(v, lo, hi);
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i;
  return push(std::move(out), [ai, lo, hi](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < n.grad.numel(); ++i) {
      const double x = t.nodes_[ai].value.data[i];
      if (x > lo && x < hi) t.nodes_[ai].grad.data[i] += n.grad.data[i];
    }
  });
}

Var Tape::matvec(Var w, Var x) {
  const Tensor& m = val(w);
  const Tensor& v = val(x);
  if (m.rank() != 2 || v.rank() != 1 || m.cols() != v.numel())
    throw ContractError("matvec: shape mismatch");
  const std::size_t rows = m.rows(), cols = m.cols();
  Tensor out({rows}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* wr = &m.data[r * cols];
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * v.data[c];
    out.data[r] = acc;
  }
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t wi = w.i, xi = x.i;
  return push(std::move(out), [wi, xi, rows, cols](Tape& t, const Node& n) {
    Node& wn = t.nodes_[wi];
    Node& xn = t.nodes_[xi];
    for (std::size_t r = 0; r < rows; ++r) {
      const double g = n.grad.data[r];
      if (g == 0.0) continue;
      const double* wr = &wn.value.data[r * cols];
      double* wg = &wn.grad.data[r * cols];
      for (std::size_t c = 0; c < cols; ++c) {
        wg[c] += g * xn.value.data[c];
        xn.grad.data[c] += g * wr[c];
      }
    }
  });
}

Var Tape::dot(Var a, Var b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (x.rank() != 1 || !x.same_shape(y)) throw ContractError("dot: need equal vectors");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += x.data[i] * y.data[i];
  if (!grad_enabled_) return push(Tensor::scalar(acc), {});
  const std::size_t ai = a.i, bi = b.i;
  return push(Tensor::scalar(acc), [ai, bi](Tape& t, const Node& n) {
    const double g = n.grad.data[0];
    Node& an = t.nodes_[ai];
    Node& bn = t.nodes_[bi];
    for (std::size_t i = 0; i < an.value.numel(); ++i) {
      an.grad.data[i] += g * bn.value.data[i];
      bn.grad.data[i] += g * an.value.data[i];
    }
  });
}

Var Tape::sum(Var a) {
  const Tensor& x = val(a);
  double acc = 0.0;
  for (double v : x.data) acc += v;
  if (!grad_enabled_) return push(Tensor::scalar(acc), {});
  const std::size_t ai = a.i;
  return push(Tensor::scalar(acc), [ai](Tape& t, const Node& n) {
    const double g = n.grad.data[0];
    for (auto& gv : t.nodes_[ai].grad.data) gv += g;
  });
}

Var Tape::mean(Var a) {
  const Tensor& x = val(a);
  if (x.numel() == 0) throw ContractError("mean: empty tensor");
  double acc = 0.0;
  for (double v : x.data) acc += v;
  acc /= static_cast<double>(x.numel());
  if (!grad_enabled_) return push(Tensor::scalar(acc), {});
  const std::size_t ai = a.i;
  const double inv = 1.0 / static_cast<double>(x.numel());
  return push(Tensor::scalar(acc), [ai, inv](Tape& t, const Node& n) {
    const double g = n.grad.data[0] * inv;
    for (auto& gv : t.nodes_[ai].grad.data) gv += g;
  });
}

Var Tape::index(Var a, std::size_t j) {
  const Tensor& x = val(a);
  if (x.rank() != 1 || j >= x.numel()) throw ContractError("index: out of range");
  if (!grad_enabled_) return push(Tensor::scalar(x.data[j]), {});
  const std::size_t ai = a.i;
  return push(Tensor::scalar(x.data[j]), [ai, j](Tape& t, const Node& n) {
    t.nodes_[ai].grad.data[j] += n.grad.data[0];
  });
}

Var Tape::concat(Var a, Var b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (x.rank() != 1 || y.rank() != 1) throw ContractError("concat: need vectors");
  Tensor out({x.numel() + y.numel()}, 0.0);
  std::copy(x.data.begin(), x.data.end(), out.data.begin());
  std::copy(y.data.begin(), y.data.end(), out.data.begin() + x.numel());
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i, bi = b.i, na = x.numel();
  return push(std::move(out), [ai, bi, na](Tape& t, const Node& n) {
    Node& an = t.nodes_[ai];
    Node& bn = t.nodes_[bi];
    for (std::size_t i = 0; i < na; ++i) an.grad.data[i] += n.grad.data[i];
    for (std::size_t i = 0; i < bn.grad.numel(); ++i)
      bn.grad.data[i] += n.grad.data[na + i];
  });
}

Var Tape::stack(const std::vector<Var>& xs) {
  if (xs.empty()) throw ContractError("stack: empty input");
  Tensor out({xs.size()}, 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) out.data[i] = scalar_val(xs[i]);
  if (!grad_enabled_) return push(std::move(out), {});
  std::vector<std::size_t> ids(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) ids[i] = xs[i].i;
  return push(std::move(out), [ids](Tape& t, const Node& n) {
    for (std::size_t i = 0; i < ids.size(); ++i)
      t.nodes_[ids[i]].grad.data[0] += n.grad.data[i];
  });
}

Var Tape::min2(Var a, Var b) {
  const double x = scalar_val(a);
  const double y = scalar_val(b);
  const bool take_a = x <= y;
  if (!grad_enabled_) return push(Tensor::scalar(take_a ? x : y), {});
  const std::size_t src = take_a ? a.i : b.i;
  return push(Tensor::scalar(take_a ? x : y), [src](Tape& t, const Node& n) {
    t.nodes_[src].grad.data[0] += n.grad.data[0];
  });
}

Var Tape::weighted_sum(Var w, const std::vector<Tensor>& items) {
  const Tensor& wv = val(w);
  if (wv.rank() != 1 || wv.numel() != items.size())
    throw ContractError("weighted_sum: weight/item count mismatch");
  if (items.empty()) throw ContractError("weighted_sum: empty items");
  Tensor out(items[0].shape, 0.0);
  for (std::size_t t = 0; t < items.size(); ++t) {
    if (!items[t].same_shape(items[0]))
      throw ContractError("weighted_sum: ragged items");
    for (std::size_t i = 0; i < out.numel(); ++i)
      out.data[i] += wv.data[t] * items[t].data[i];
  }
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t wi = w.i;
  std::vector<Tensor> copies = items;
  return push(std::move(out), [wi, copies](Tape& t, const Node& n) {
    Node& wn = t.nodes_[wi];
    for (std::size_t k = 0; k < copies.size(); ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n.grad.numel(); ++i)
        acc += n.grad.data[i] * copies[k].data[i];
      wn.grad.data[k] += acc;
    }
  });
}

Var Tape::softmax(Var a) {
  const Tensor& x = val(a);
  if (x.rank() != 1 || x.numel() == 0) throw ContractError("softmax: need vector");
  Tensor out(x.shape, 0.0);
  softmax_values(x, out);
  if (!grad_enabled_) return push(std::move(out), {});
  const std::size_t ai = a.i;
  return push(std::move(out), [ai](Tape& t, const Node& n) {
    double gdotp = 0.0;
    for (std::size_t i = 0; i < n.value.numel(); ++i)
      gdotp += n.grad.data[i] * n.value.data[i];
    for (std::size_t i = 0; i < n.value.numel(); ++i)
      t.nodes_[ai].grad.data[i] += n.value.data[i] * (n.grad.data[i] - gdotp);
  });
}

Var Tape::log_softmax_at(Var a, std::size_t j) {
  const Tensor& x = val(a);
  if (x.rank() != 1 || j >= x.numel())
    throw ContractError("log_softmax_at: out of range");
  double mx = x.data[0];
  for (double v : x.data) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : x.data) z += std::exp(v - mx);
  const double lsm = x.data[j] - mx - std::log(z);
  if (!grad_enabled_) return push(Tensor::scalar(lsm), {});
  Tensor p(x.shape, 0.0);
  softmax_values(x, p);
  const std::size_t ai = a.i;
  return push(Tensor::scalar(lsm), [ai, j, p](Tape& t, const Node& n) {
    const double g = n.grad.data[0];
    Node& an = t.nodes_[ai];
    for (std::size_t i = 0; i < p.numel(); ++i)
      an.grad.data[i] += g * ((i == j ? 1.0 : 0.0) - p.data[i]);
  });
}

Var Tape::entropy_softmax(Var a) {
  const Tensor& x = val(a);
  if (x.rank() != 1 || x.numel() == 0)
    throw ContractError("entropy_softmax: need vector");
  Tensor p(x.shape, 0.0);
  softmax_values(x, p);
  double h = 0.0;
  for (double pi : p.data) {
    if (pi > 0.0) h -= pi * std::log(pi);
  }
  if (!grad_enabled_) return push(Tensor::scalar(h), {});
  const std::size_t ai = a.i;
  return push(Tensor::scalar(h), [ai, p, h](Tape& t, const Node& n) {
    const double g = n.grad.data[0];
    Node& an = t.nodes_[ai];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double pi = p.data[i];
      if (pi > 0.0) an.grad.data[i] += g * (-pi * (std::log(pi) + h));
    }
  });
}

void Tape::backward(Var root) {
  if (!grad_enabled_) throw ContractError("backward: tape is forward-only");
  if (backward_done_) throw ContractError("backward: tape already walked");
  Node& r = node(root);
  if (!r.value.is_scalar()) throw ContractError("backward: root must be scalar");
  backward_done_ = true;
  r.grad.data[0] = 1.0;
  for (std::size_t i = root.i + 1; i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back(*this, nodes_[i]);
  }
}

}  // namespace panoscan
