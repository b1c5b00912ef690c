#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "loren/ops.hpp"
#include "loren/tensor.hpp"

namespace loren {

// A weight together with its gradient accumulator. Frozen parameters
// (trainable = false) keep an all-zero grad through any backward pass.
struct Parameter {
  Parameter() = default;
  Parameter(Tensor v, std::string n, bool train = true)
      : value(std::move(v)), grad(value.shape()), trainable(train), name(std::move(n)) {}

  void zero_grad() {
    for (int64_t i = 0; i < grad.numel(); ++i) grad[i] = 0.0;
  }

  Tensor value;
  Tensor grad;
  bool trainable = true;
  std::string name;
};

class Tape;

struct Node {
  const Tensor& val() const { return *value; }
  Tensor& ensure_grad();

  std::shared_ptr<const Tensor> value;
  Tensor grad;  // allocated on first use
  bool needs_grad = false;
  bool is_op_output = false;
  Parameter* sink = nullptr;
  const Tape* owner = nullptr;
};

using Var = std::shared_ptr<Node>;

// Reverse-mode tape over the fixed operator set used by the receiver.
// Records the forward pass and replays gradients in exact reverse order, so
// identical inputs produce bit-identical gradients. Branches that cannot
// reach a trainable parameter are pruned at record time.
class Tape {
 public:
  Var input(Tensor v);       // constant leaf
  Var param(Parameter& p);   // leaf aliasing a parameter's value, no copy

  Var conv2d(Var x, Var w, Var b);
  Var conv1x1(Var x, Var m);
  Var layer_norm(Var x, Var gamma, Var beta, std::vector<int> axes, double eps);
  Var relu(Var x);
  Var add(Var a, Var b);
  Var sigmoid(Var x);
  Var scale(Var x, double s);
  Var gather_tf(Var x, std::vector<int32_t> flat_tf);
  Var bce_with_llr(Var llrs, std::vector<uint8_t> bits);  // scalar output

  // Seeds d(loss) = seed_grad, replays the tape, then adds each parameter
  // leaf's gradient into its Parameter::grad (trainable parameters only).
  void backward(const Var& loss, double seed_grad = 1.0);

  int64_t num_ops() const { return num_ops_; }

 private:
  Var make_node(Tensor v, bool needs_grad, bool is_op);
  void record(Var out, std::function<void()> step);

  std::vector<std::function<void()>> steps_;
  std::vector<Var> param_leaves_;
  int64_t num_ops_ = 0;
};

}  // namespace loren
