#include "loren/autodiff.hpp"

#include <utility>

#include "loren/errors.hpp"

namespace loren {

Tensor& Node::ensure_grad() {
  if (grad.numel() == 0 && value->numel() > 0) grad = Tensor(value->shape());
  return grad;
}

Var Tape::make_node(Tensor v, bool needs_grad, bool is_op) {
  auto node = std::make_shared<Node>();
  node->value = std::make_shared<Tensor>(std::move(v));
  node->needs_grad = needs_grad;
  node->is_op_output = is_op;
  node->owner = this;
  return node;
}

Var Tape::input(Tensor v) { return make_node(std::move(v), false, false); }

Var Tape::param(Parameter& p) {
  auto node = std::make_shared<Node>();
  // Alias the parameter's tensor; the no-op deleter keeps ownership with the
  // Parameter, so building a forward pass copies no weight data.
  node->value = std::shared_ptr<const Tensor>(&p.value, [](const Tensor*) {});
  node->needs_grad = p.trainable;
  node->sink = &p;
  node->owner = this;
  param_leaves_.push_back(node);
  return node;
}

void Tape::record(Var out, std::function<void()> step) {
  if (!out->needs_grad) return;
  // An output whose grad was never allocated received no gradient (a branch
  // the loss does not depend on); its step must not run.
  steps_.push_back([out, step = std::move(step)] {
    if (out->grad.numel() != 0) step();
  });
}

Var Tape::conv2d(Var x, Var w, Var b) {
  ++num_ops_;
  Var out = make_node(ops::conv2d(x->val(), w->val(), b->val()),
                      x->needs_grad || w->needs_grad || b->needs_grad, true);
  record(out, [x, w, b, out] {
    ops::conv2d_backward(x->val(), w->val(), out->grad,
                         x->needs_grad ? &x->ensure_grad() : nullptr,
                         w->needs_grad ? &w->ensure_grad() : nullptr,
                         b->needs_grad ? &b->ensure_grad() : nullptr);
  });
  return out;
}

Var Tape::conv1x1(Var x, Var m) {
  ++num_ops_;
  Var out = make_node(ops::conv1x1(x->val(), m->val()),
                      x->needs_grad || m->needs_grad, true);
  record(out, [x, m, out] {
    ops::conv1x1_backward(x->val(), m->val(), out->grad,
                          x->needs_grad ? &x->ensure_grad() : nullptr,
                          m->needs_grad ? &m->ensure_grad() : nullptr);
  });
  return out;
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, std::vector<int> axes, double eps) {
  ++num_ops_;
  auto stats = std::make_shared<ops::LayerNormStats>();
  Var out = make_node(ops::layer_norm(x->val(), gamma->val(), beta->val(), axes, eps,
                                      stats.get()),
                      x->needs_grad || gamma->needs_grad || beta->needs_grad, true);
  record(out, [x, gamma, beta, out, stats, axes = std::move(axes)] {
    ops::layer_norm_backward(x->val(), gamma->val(), axes, *stats, out->grad,
                             x->needs_grad ? &x->ensure_grad() : nullptr,
                             gamma->needs_grad ? &gamma->ensure_grad() : nullptr,
                             beta->needs_grad ? &beta->ensure_grad() : nullptr);
  });
  return out;
}

Var Tape::relu(Var x) {
  ++num_ops_;
  Var out = make_node(ops::relu(x->val()), x->needs_grad, true);
  record(out, [x, out] { ops::relu_backward(x->val(), out->grad, &x->ensure_grad()); });
  return out;
}

Var Tape::add(Var a, Var b) {
  ++num_ops_;
  Var out = make_node(ops::add(a->val(), b->val()), a->needs_grad || b->needs_grad, true);
  record(out, [a, b, out] {
    if (a->needs_grad) {
      Tensor& ga = a->ensure_grad();
      for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += out->grad[i];
    }
    if (b->needs_grad) {
      Tensor& gb = b->ensure_grad();
      for (int64_t i = 0; i < gb.numel(); ++i) gb[i] += out->grad[i];
    }
  });
  return out;
}

Var Tape::sigmoid(Var x) {
  ++num_ops_;
  Var out = make_node(ops::sigmoid(x->val()), x->needs_grad, true);
  record(out, [x, out] { ops::sigmoid_backward(out->val(), out->grad, &x->ensure_grad()); });
  return out;
}

Var Tape::scale(Var x, double s) {
  ++num_ops_;
  Var out = make_node(ops::scale(x->val(), s), x->needs_grad, true);
  record(out, [x, out, s] {
    Tensor& gx = x->ensure_grad();
    for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += s * out->grad[i];
  });
  return out;
}

Var Tape::gather_tf(Var x, std::vector<int32_t> flat_tf) {
  ++num_ops_;
  Var out = make_node(ops::gather_tf(x->val(), flat_tf), x->needs_grad, true);
  record(out, [x, out, flat_tf = std::move(flat_tf)] {
    ops::gather_tf_backward(flat_tf, out->grad, &x->ensure_grad());
  });
  return out;
}

Var Tape::bce_with_llr(Var llrs, std::vector<uint8_t> bits) {
  ++num_ops_;
  Var out = make_node(Tensor::scalar(ops::bce_with_llr(llrs->val(), bits)),
                      llrs->needs_grad, true);
  record(out, [llrs, out, bits = std::move(bits)] {
    ops::bce_with_llr_backward(llrs->val(), bits, out->grad[0], &llrs->ensure_grad());
  });
  return out;
}

void Tape::backward(const Var& loss, double seed_grad) {
  if (num_ops_ == 0) throw ShapeError("backward: tape has no recorded operations");
  if (!loss || loss->owner != this || !loss->is_op_output)
    throw ShapeError("backward: loss is not an output of this tape");
  if (loss->val().numel() != 1) throw ShapeError("backward: loss must be scalar");

  if (loss->needs_grad) {
    loss->ensure_grad()[0] = seed_grad;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }
  for (const Var& leaf : param_leaves_) {
    if (!leaf->sink->trainable || leaf->grad.numel() == 0) continue;
    Tensor& g = leaf->sink->grad;
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += leaf->grad[i];
  }
}

}  // namespace loren
