#ifndef GADA_AUTODIFF_TAPE_HPP
#define GADA_AUTODIFF_TAPE_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "autodiff/param_store.hpp"
#include "autodiff/tensor.hpp"

namespace gada::ad {

class Tape;

enum class OpTag {
  leaf,
  affine,
  leaky_relu,
  tanh,
  sigmoid,
  log_softmax,
  softmax,
  add,
  sub,
  mul,
  scale,
  add_scalar,
  sum,
  mean,
  col_mean,
  row_sum,
  slice_cols,
  pick,
  log,
  clamp,
  square,
  l2_norm,
};

const char* op_name(OpTag tag) noexcept;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct TapeNode;
using BackwardFn = std::function<void(Tape&, const TapeNode& self)>;

struct TapeNode {
  OpTag tag = OpTag::leaf;
  std::vector<std::size_t> inputs;
  Tensor value;
  Tensor adjoint;
  bool requires_grad = false;
  BackwardFn backward;
};

// Define-by-run reverse-mode tape. Build a fresh tape per forward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = delete;
  Tape& operator=(Tape&&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var variable(Tensor value) { return leaf(std::move(value), true); }

  // Appends an interior node; requires_grad is inherited from the inputs.
  Var push(OpTag tag, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
  void backward(Var loss);

  // Accumulated adjoint, or zeros if the node was never reached.
  Tensor grad(Var v) const;

  const TapeNode& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const noexcept { return nodes_.size(); }

  bool needs_grad(std::size_t id) const noexcept { return nodes_[id].requires_grad; }
  // Adjoint accumulator for node id, zero-initialized on first access.
  Tensor& adjoint(std::size_t id);

 private:
  std::vector<TapeNode> nodes_;
};

// Parameters of a store placed on a tape, in store order.
struct Bound {
  std::vector<std::string> names;
  std::vector<Var> vars;

  Var operator[](std::size_t i) const { return vars[i]; }
  Var get(std::string_view name) const;
  std::size_t size() const noexcept { return vars.size(); }
  // Entries [first, first + count).
  Bound slice(std::size_t first, std::size_t count) const {
    Bound b;
    b.names.assign(names.begin() + first, names.begin() + first + count);
    b.vars.assign(vars.begin() + first, vars.begin() + first + count);
    return b;
  }
};

Bound bind(Tape& tape, const ParamStore& store, bool trainable);

// Reverse-mode gradients of a scalar loss for every bound parameter;
// parameters the loss never reached get zero tensors.
ParamStore backward(Var loss, const Bound& params);

// ---- differentiable operations -------------------------------------------

Var affine(Var x, Var weight, Var bias);
Var leaky_relu(Var x, double alpha);
Var tanh(Var x);
Var sigmoid(Var x);
Var log_softmax(Var logits);
Var softmax(Var logits);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var sum(Var a);
Var mean(Var a);
Var col_mean(Var a);                 // [B x n] -> [1 x n]
Var row_sum(Var a);                  // [B x n] -> [B x 1]
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var pick(Var a, std::span<const std::size_t> cols);  // one column per row -> [B x 1]
Var log(Var a);
Var clamp(Var a, double lo, double hi);
Var square(Var a);
Var l2_norm(Var a);                  // Euclidean norm of all entries; gradient 0 at 0

// Same value as a new constant leaf: no gradient flows back through it.
Var detach(Var a);

}  // namespace gada::ad

#endif  // GADA_AUTODIFF_TAPE_HPP
