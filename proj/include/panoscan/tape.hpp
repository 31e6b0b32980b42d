#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "panoscan/param_set.hpp"
#include "panoscan/tensor.hpp"

namespace panoscan {

// Handle into a Tape. Only valid for the tape that produced it.
struct Var {
  std::size_t i = static_cast<std::size_t>(-1);
};

// Reverse-mode autodiff over tensor-granular ops. Build a graph forward, call
// backward() once on a scalar root; parameter leaves accumulate into their
// ParamEntry::grad buffers (which must outlive the tape).
//
// Constructed with grad_enabled=false the tape records values only (no grad
// storage, no backward closures) so rollouts share the exact forward math of
// training at a fraction of the cost.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // ---- leaves ----
  Var constant(Tensor value);
  // One leaf per entry per tape (repeat calls return the cached node).
  Var param(ParamEntry& entry);

  // ---- elementwise / shape ops ----
  Var add(Var a, Var b);        // same shape
  Var sub(Var a, Var b);        // same shape
  Var mul(Var a, Var b);        // same shape, or one side scalar (broadcast)
  Var scale(Var a, double c);
  Var add_const(Var a, double c);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);               // requires strictly positive values
  Var softplus(Var a);          // log(1+e^x), stable form
  Var relu(Var a);
  Var square(Var a);
  Var clamp_const(Var a, double lo, double hi);

  // ---- reductions / vector ops ----
  Var matvec(Var w, Var x);     // (m,n) x (n) -> (m)
  Var dot(Var a, Var b);        // vectors -> scalar
  Var sum(Var a);               // -> scalar
  Var mean(Var a);              // -> scalar
  Var index(Var a, std::size_t j);          // vector -> scalar
  Var concat(Var a, Var b);                 // vectors -> vector
  Var stack(const std::vector<Var>& xs);    // scalars -> vector
  Var min2(Var a, Var b);                   // scalars -> scalar
  // sum_t w[t] * items[t]; items are constants of identical vector shape.
  Var weighted_sum(Var w, const std::vector<Tensor>& items);

  // ---- softmax family (vector input) ----
  Var softmax(Var a);
  Var log_softmax_at(Var a, std::size_t j);  // -> scalar
  Var entropy_softmax(Var a);                // Shannon entropy of softmax, nats

  const Tensor& val(Var v) const;
  double scalar_val(Var v) const;
  const Tensor& grad(Var v) const;

  // Seeds d(root)=1 and runs accumulated closures in reverse creation order.
  // root must be a scalar; a tape can be walked backward only once.
  void backward(Var root);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, const Node&)> back;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(Tensor value, std::function<void(Tape&, const Node&)> back);

  std::vector<Node> nodes_;
  std::vector<std::pair<const ParamEntry*, std::size_t>> param_cache_;
  bool grad_enabled_;
  bool backward_done_ = false;
};

}  // namespace panoscan
