#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace jscc {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // sized lazily, same length as data
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(TensorNode&)> backprop;

  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense row-major double tensor participating in a define-by-run gradient
// tape. Ops below rebuild the tape on every forward pass; backward() walks
// it once from a scalar loss.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, bool requires_grad);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t size() const { return static_cast<int64_t>(node_->data.size()); }
  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  std::vector<double>& grad() { return node_->ensure_grad(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  double item() const;

  // Deep copy of values only; the copy is a leaf detached from any tape.
  Tensor clone() const;

  void zero_grad() { node_->ensure_grad().assign(node_->data.size(), 0.0); }

  // Reverse-mode pass from a scalar. Zeroes the grads of everything
  // reachable first, then accumulates.
  void backward();

  std::shared_ptr<detail::TensorNode> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::TensorNode> node);

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// Per-channel batch normalization state. `eta` is the learnable scaling
// factor whose magnitude drives channel pruning; `beta` the learnable bias.
struct BatchNormState {
  Tensor eta;   // [C]
  Tensor beta;  // [C]
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double epsilon = 1e-5;
  double momentum = 0.1;

  BatchNormState() = default;
  explicit BatchNormState(int channels);
  int channels() const { return eta.defined() ? eta.shape()[0] : 0; }
  BatchNormState clone() const;
};

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  void init(const std::vector<Tensor>& params);
};

// Bias-corrected Adam update applied in-place; reads each parameter's grad.
void adam_step(std::vector<Tensor>& params, AdamState& state);

// input [N,Cin,H,W] (x) kernel [Cout,Cin,kh,kw] -> [N,Cout,H',W'].
// Cross-correlation (no kernel flip); differentiable w.r.t. both.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride,
              int padding);

// input [N,Cin,H,W] (x) kernel [Cin,Cout,kh,kw] -> [N,Cout,H',W'],
// H' = (H-1)*stride - 2*padding + kh + output_padding. Adjoint of conv2d
// with the same stride/padding.
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride,
                        int padding, int output_padding);

// [N,C,H,W] batch normalization. Training mode uses batch statistics and
// updates the running estimates as a side effect; eval mode is a pure
// function of input and state.
Tensor batch_norm(const Tensor& input, BatchNormState& state, bool training);

Tensor relu(const Tensor& input);
Tensor sigmoid(const Tensor& input);
Tensor add(const Tensor& a, const Tensor& b);  // same shape
Tensor scale(const Tensor& a, double factor);
Tensor reshape(const Tensor& input, Shape new_shape);
// mean of squared differences; scalar output
Tensor mse_loss(const Tensor& a, const Tensor& b);
// sum of |x| with subgradient sign(x), sign(0) = 0; scalar output
Tensor l1_penalty(const Tensor& input);

}  // namespace jscc
