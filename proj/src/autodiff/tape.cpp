#include "autodiff/tape.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace gada::ad {

namespace {

Tensor make(Shape shape, std::vector<double> values) {
  return Tensor(Tensor::unchecked, std::move(shape), std::move(values));
}

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid()) throw ContractError("operation on an unbound variable");
  if (a.tape() != b.tape()) throw ContractError("operands live on different tapes");
  return *a.tape();
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("operation on an unbound variable");
  return *a.tape();
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " expects a matrix, got shape " +
                         shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

// Elementwise unary op with derivative expressed through input and output.
template <typename Fwd, typename Deriv>
Var unary(Var a, OpTag tag, Fwd fwd, Deriv deriv) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  return t.push(tag, {a.id()}, make(x.shape(), std::move(out)),
                [deriv](Tape& tp, const TapeNode& self) {
                  const std::size_t in = self.inputs[0];
                  if (!tp.needs_grad(in)) return;
                  const Tensor& xv = tp.node(in).value;
                  Tensor& g = tp.adjoint(in);
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += self.adjoint[i] * deriv(xv[i], self.value[i]);
                  }
                });
}

}  // namespace

const char* op_name(OpTag tag) noexcept {
  switch (tag) {
    case OpTag::leaf: return "leaf";
    case OpTag::affine: return "affine";
    case OpTag::leaky_relu: return "leaky_relu";
    case OpTag::tanh: return "tanh";
    case OpTag::sigmoid: return "sigmoid";
    case OpTag::log_softmax: return "log_softmax";
    case OpTag::softmax: return "softmax";
    case OpTag::add: return "add";
    case OpTag::sub: return "sub";
    case OpTag::mul: return "mul";
    case OpTag::scale: return "scale";
    case OpTag::add_scalar: return "add_scalar";
    case OpTag::sum: return "sum";
    case OpTag::mean: return "mean";
    case OpTag::col_mean: return "col_mean";
    case OpTag::row_sum: return "row_sum";
    case OpTag::slice_cols: return "slice_cols";
    case OpTag::pick: return "pick";
    case OpTag::log: return "log";
    case OpTag::clamp: return "clamp";
    case OpTag::square: return "square";
    case OpTag::l2_norm: return "l2_norm";
  }
  return "?";
}

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("value() on an unbound variable");
  return tape_->node(id_).value;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  TapeNode n;
  n.tag = OpTag::leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(OpTag tag, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward) {
  TapeNode n;
  n.tag = tag;
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [&](std::size_t i) { return nodes_[i].requires_grad; });
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::adjoint(std::size_t id) {
  TapeNode& n = nodes_[id];
  if (n.adjoint.empty()) n.adjoint = make(n.value.shape(), std::vector<double>(n.value.size(), 0.0));
  return n.adjoint;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_string(loss.value().shape()));
  }
  for (auto& n : nodes_) n.adjoint = Tensor();
  adjoint(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const TapeNode& n = nodes_[i];
    if (!n.requires_grad || n.adjoint.empty() || !n.backward) continue;
    n.backward(*this, n);
  }
}

Tensor Tape::grad(Var v) const {
  const TapeNode& n = nodes_[v.id()];
  if (n.adjoint.empty()) return make(n.value.shape(), std::vector<double>(n.value.size(), 0.0));
  return n.adjoint;
}

Var Bound::get(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return vars[i];
  }
  throw ContractError("parameter '" + std::string(name) + "' is not bound");
}

Bound bind(Tape& tape, const ParamStore& store, bool trainable) {
  Bound b;
  b.names.reserve(store.size());
  b.vars.reserve(store.size());
  for (const auto& e : store) {
    b.names.push_back(e.name);
    b.vars.push_back(tape.leaf(e.value, trainable));
  }
  return b;
}

ParamStore backward(Var loss, const Bound& params) {
  Tape& t = tape_of(loss);
  t.backward(loss);
  ParamStore grads;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.vars[i].tape() != &t) throw ContractError("backward: parameter bound to another tape");
    grads.add(params.names[i], t.grad(params.vars[i]));
  }
  return grads;
}

// ---- operations ------------------------------------------------------------

Var affine(Var x, Var weight, Var bias) {
  Tape& t = same_tape(x, weight);
  same_tape(x, bias);
  const Tensor& X = x.value();
  const Tensor& W = weight.value();
  const Tensor& b = bias.value();
  require_matrix(X, "affine input");
  require_matrix(W, "affine weight");
  const std::size_t B = X.rows(), n = X.cols(), m = W.cols();
  if (W.rows() != n) {
    throw DimensionError("affine: input " + shape_string(X.shape()) + " incompatible with weight " +
                         shape_string(W.shape()));
  }
  if (b.size() != m) {
    throw DimensionError("affine: bias " + shape_string(b.shape()) + " incompatible with weight " +
                         shape_string(W.shape()));
  }

  std::vector<double> out(B * m);
  {
    const double* __restrict xp = X.data();
    const double* __restrict wp = W.data();
    const double* __restrict bp = b.data();
    double* __restrict yp = out.data();
    for (std::size_t i = 0; i < B; ++i) {
      double* __restrict yrow = yp + i * m;
      for (std::size_t j = 0; j < m; ++j) yrow[j] = bp[j];
      for (std::size_t k = 0; k < n; ++k) {
        const double xv = xp[i * n + k];
        const double* __restrict wrow = wp + k * m;
        for (std::size_t j = 0; j < m; ++j) yrow[j] += xv * wrow[j];
      }
    }
  }

  return t.push(OpTag::affine, {x.id(), weight.id(), bias.id()}, make({B, m}, std::move(out)),
                [B, n, m](Tape& tp, const TapeNode& self) {
                  const std::size_t ix = self.inputs[0], iw = self.inputs[1], ib = self.inputs[2];
                  const double* __restrict dy = self.adjoint.data();
                  const double* __restrict xp = tp.node(ix).value.data();
                  const double* __restrict wp = tp.node(iw).value.data();
                  if (tp.needs_grad(iw)) {
                    double* __restrict dw = tp.adjoint(iw).data();
                    for (std::size_t i = 0; i < B; ++i) {
                      const double* __restrict dyrow = dy + i * m;
                      for (std::size_t k = 0; k < n; ++k) {
                        const double xv = xp[i * n + k];
                        double* __restrict dwrow = dw + k * m;
                        for (std::size_t j = 0; j < m; ++j) dwrow[j] += xv * dyrow[j];
                      }
                    }
                  }
                  if (tp.needs_grad(ib)) {
                    double* __restrict db = tp.adjoint(ib).data();
                    for (std::size_t i = 0; i < B; ++i) {
                      for (std::size_t j = 0; j < m; ++j) db[j] += dy[i * m + j];
                    }
                  }
                  if (tp.needs_grad(ix)) {
                    std::vector<double> wt(m * n);
                    for (std::size_t k = 0; k < n; ++k) {
                      for (std::size_t j = 0; j < m; ++j) wt[j * n + k] = wp[k * m + j];
                    }
                    const double* __restrict wtp = wt.data();
                    double* __restrict dx = tp.adjoint(ix).data();
                    for (std::size_t i = 0; i < B; ++i) {
                      double* __restrict dxrow = dx + i * n;
                      for (std::size_t j = 0; j < m; ++j) {
                        const double g = dy[i * m + j];
                        const double* __restrict wtrow = wtp + j * n;
                        for (std::size_t k = 0; k < n; ++k) dxrow[k] += g * wtrow[k];
                      }
                    }
                  }
                });
}

Var leaky_relu(Var x, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ContractError("leaky_relu: alpha must lie in [0, 1)");
  // Derivative at exactly 0 is alpha.
  return unary(
      x, OpTag::leaky_relu, [alpha](double v) { return v > 0.0 ? v : alpha * v; },
      [alpha](double v, double) { return v > 0.0 ? 1.0 : alpha; });
}

Var tanh(Var x) {
  return unary(
      x, OpTag::tanh, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(
      x, OpTag::sigmoid,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a) {
  return unary(
      a, OpTag::log, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo must not exceed hi");
  return unary(
      a, OpTag::clamp, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Var square(Var a) {
  return unary(
      a, OpTag::square, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var scale(Var a, double factor) {
  return unary(
      a, OpTag::scale, [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(
      a, OpTag::add_scalar, [offset](double v) { return v + offset; },
      [](double, double) { return 1.0; });
}

Var log_softmax(Var logits) {
  Tape& t = tape_of(logits);
  const Tensor& x = logits.value();
  require_matrix(x, "log_softmax");
  const std::size_t B = x.rows(), C = x.cols();
  if (C < 2) throw DimensionError("log_softmax needs at least 2 columns, got " + shape_string(x.shape()));
  std::vector<double> out(B * C);
  for (std::size_t i = 0; i < B; ++i) {
    const double* row = x.data() + i * C;
    const double mx = *std::max_element(row, row + C);
    double s = 0.0;
    for (std::size_t j = 0; j < C; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < C; ++j) out[i * C + j] = row[j] - lse;
  }
  return t.push(OpTag::log_softmax, {logits.id()}, make({B, C}, std::move(out)),
                [B, C](Tape& tp, const TapeNode& self) {
                  const std::size_t in = self.inputs[0];
                  if (!tp.needs_grad(in)) return;
                  Tensor& g = tp.adjoint(in);
                  for (std::size_t i = 0; i < B; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < C; ++j) s += self.adjoint[i * C + j];
                    for (std::size_t j = 0; j < C; ++j) {
                      g[i * C + j] += self.adjoint[i * C + j] - std::exp(self.value[i * C + j]) * s;
                    }
                  }
                });
}

Var softmax(Var logits) {
  Tape& t = tape_of(logits);
  const Tensor& x = logits.value();
  require_matrix(x, "softmax");
  const std::size_t B = x.rows(), C = x.cols();
  std::vector<double> out(B * C);
  for (std::size_t i = 0; i < B; ++i) {
    const double* row = x.data() + i * C;
    const double mx = *std::max_element(row, row + C);
    double s = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      out[i * C + j] = std::exp(row[j] - mx);
      s += out[i * C + j];
    }
    for (std::size_t j = 0; j < C; ++j) out[i * C + j] /= s;
  }
  return t.push(OpTag::softmax, {logits.id()}, make({B, C}, std::move(out)),
                [B, C](Tape& tp, const TapeNode& self) {
                  const std::size_t in = self.inputs[0];
                  if (!tp.needs_grad(in)) return;
                  Tensor& g = tp.adjoint(in);
                  for (std::size_t i = 0; i < B; ++i) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < C; ++j) {
                      dot += self.adjoint[i * C + j] * self.value[i * C + j];
                    }
                    for (std::size_t j = 0; j < C; ++j) {
                      g[i * C + j] += self.value[i * C + j] * (self.adjoint[i * C + j] - dot);
                    }
                  }
                });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  std::vector<double> out(a.value().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return t.push(OpTag::add, {a.id(), b.id()}, make(a.shape(), std::move(out)),
                [](Tape& tp, const TapeNode& self) {
                  for (std::size_t in : self.inputs) {
                    if (!tp.needs_grad(in)) continue;
                    Tensor& g = tp.adjoint(in);
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.adjoint[i];
                  }
                });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  std::vector<double> out(a.value().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return t.push(OpTag::sub, {a.id(), b.id()}, make(a.shape(), std::move(out)),
                [](Tape& tp, const TapeNode& self) {
                  if (tp.needs_grad(self.inputs[0])) {
                    Tensor& g = tp.adjoint(self.inputs[0]);
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.adjoint[i];
                  }
                  if (tp.needs_grad(self.inputs[1])) {
                    Tensor& g = tp.adjoint(self.inputs[1]);
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.adjoint[i];
                  }
                });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  std::vector<double> out(a.value().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return t.push(OpTag::mul, {a.id(), b.id()}, make(a.shape(), std::move(out)),
                [](Tape& tp, const TapeNode& self) {
                  const std::size_t ia = self.inputs[0], ib = self.inputs[1];
                  if (tp.needs_grad(ia)) {
                    const Tensor& other = tp.node(ib).value;
                    Tensor& g = tp.adjoint(ia);
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.adjoint[i] * other[i];
                  }
                  if (tp.needs_grad(ib)) {
                    const Tensor& other = tp.node(ia).value;
                    Tensor& g = tp.adjoint(ib);
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.adjoint[i] * other[i];
                  }
                });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return t.push(OpTag::sum, {a.id()}, make({1}, {s}), [](Tape& tp, const TapeNode& self) {
    const std::size_t in = self.inputs[0];
    if (!tp.needs_grad(in)) return;
    Tensor& g = tp.adjoint(in);
    const double d = self.adjoint[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += d;
  });
}

Var mean(Var a) {
  Tape& t = tape_of(a);
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return t.push(OpTag::mean, {a.id()}, make({1}, {s / n}), [n](Tape& tp, const TapeNode& self) {
    const std::size_t in = self.inputs[0];
    if (!tp.needs_grad(in)) return;
    Tensor& g = tp.adjoint(in);
    const double d = self.adjoint[0] / n;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += d;
  });
}

Var col_mean(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "col_mean");
  const std::size_t B = x.rows(), n = x.cols();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += x[i * n + j];
  }
  for (double& v : out) v /= static_cast<double>(B);
  return t.push(OpTag::col_mean, {a.id()}, make({1, n}, std::move(out)),
                [B, n](Tape& tp, const TapeNode& self) {
                  const std::size_t in = self.inputs[0];
                  if (!tp.needs_grad(in)) return;
                  Tensor& g = tp.adjoint(in);
                  const double inv = 1.0 / static_cast<double>(B);
                  for (std::size_t i = 0; i < B; ++i) {
                    for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.adjoint[j] * inv;
                  }
                });
}

Var row_sum(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "row_sum");
  const std::size_t B = x.rows(), n = x.cols();
  std::vector<double> out(B, 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i] += x[i * n + j];
  }
  return t.push(OpTag::row_sum, {a.id()}, make({B, 1}, std::move(out)),
                [B, n](Tape& tp, const TapeNode& self) {
                  const std::size_t in = self.inputs[0];
                  if (!tp.needs_grad(in)) return;
                  Tensor& g = tp.adjoint(in);
                  for (std::size_t i = 0; i < B; ++i) {
                    for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.adjoint[i];
                  }
                });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "slice_cols");
  const std::size_t B = x.rows(), n = x.cols();
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of range for shape " + shape_string(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(B * w);
  for (std::size_t i = 0; i < B; ++i) {
    std::copy_n(x.data() + i * n + begin, w, out.data() + i * w);
  }
  return t.push(OpTag::slice_cols, {a.id()}, make({B, w}, std::move(out)),
                [B, n, w, begin](Tape& tp, const TapeNode& self) {
                  const std::size_t in = self.inputs[0];
                  if (!tp.needs_grad(in)) return;
                  Tensor& g = tp.adjoint(in);
                  for (std::size_t i = 0; i < B; ++i) {
                    for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += self.adjoint[i * w + j];
                  }
                });
}

Var pick(Var a, std::span<const std::size_t> cols) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  require_matrix(x, "pick");
  const std::size_t B = x.rows(), n = x.cols();
  if (cols.size() != B) {
    throw DimensionError("pick: " + std::to_string(cols.size()) + " indices for " +
                         std::to_string(B) + " rows");
  }
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  std::vector<double> out(B);
  for (std::size_t i = 0; i < B; ++i) {
    if (idx[i] >= n) throw ContractError("pick: column index out of range");
    out[i] = x[i * n + idx[i]];
  }
  return t.push(OpTag::pick, {a.id()}, make({B, 1}, std::move(out)),
                [n, idx = std::move(idx)](Tape& tp, const TapeNode& self) {
                  const std::size_t in = self.inputs[0];
                  if (!tp.needs_grad(in)) return;
                  Tensor& g = tp.adjoint(in);
                  for (std::size_t i = 0; i < idx.size(); ++i) g[i * n + idx[i]] += self.adjoint[i];
                });
}

Var l2_norm(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v * v;
  const double norm = std::sqrt(s);
  return t.push(OpTag::l2_norm, {a.id()}, make({1}, {norm}), [norm](Tape& tp, const TapeNode& self) {
    const std::size_t in = self.inputs[0];
    if (!tp.needs_grad(in) || norm == 0.0) return;
    const Tensor& x = tp.node(in).value;
    Tensor& g = tp.adjoint(in);
    const double d = self.adjoint[0] / norm;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += d * x[i];
  });
}

Var detach(Var a) { return tape_of(a).constant(a.value()); }

}  // namespace gada::ad
