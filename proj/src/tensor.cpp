#include "jscc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace jscc {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("non-positive tensor dim in " + shape_str(shape));
  }
}

[[noreturn]] void dim_error(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

}  // namespace

Tensor::Tensor(Shape shape, bool requires_grad) {
  check_shape(shape);
  node_ = std::make_shared<detail::TensorNode>();
  node_->shape = std::move(shape);
  node_->data.assign(shape_numel(node_->shape), 0.0);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.data().begin(), t.data().end(), value);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  if (static_cast<int64_t>(data.size()) != t.size())
    dim_error("from_data", "data length " + std::to_string(data.size()) +
                               " does not match shape " + shape_str(t.shape()));
  t.node_->data = std::move(data);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) dim_error("item", "tensor is not scalar: " + shape_str(shape()));
  return node_->data[0];
}

Tensor Tensor::clone() const {
  Tensor t;
  t.node_ = std::make_shared<detail::TensorNode>();
  t.node_->shape = node_->shape;
  t.node_->data = node_->data;
  t.node_->requires_grad = node_->requires_grad;
  return t;
}

Tensor Tensor::wrap(std::shared_ptr<detail::TensorNode> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

void Tensor::backward() {
  if (size() != 1) throw std::invalid_argument("backward: root must be scalar");
  using Node = detail::TensorNode;
  // iterative topological sort
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({node_.get(), 0});
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx++].get();
      if (!visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(n);
      stack.pop_back();
    }
  }
  for (Node* n : topo) n->ensure_grad().assign(n->data.size(), 0.0);
  node_->grad[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

namespace {

using detail::TensorNode;

std::shared_ptr<TensorNode> make_node(Shape shape,
                                      std::vector<std::shared_ptr<TensorNode>> parents) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data.assign(shape_numel(node->shape), 0.0);
  node->parents = std::move(parents);
  for (const auto& p : node->parents)
    node->requires_grad = node->requires_grad || p->requires_grad;
  return node;
}

struct ConvDims {
  int n, cin, h, w, cout, kh, kw, hout, wout;
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernel, int stride, int padding) {
  if (input.shape().size() != 4) dim_error("conv2d", "input must be 4-D, got " + shape_str(input.shape()));
  if (kernel.shape().size() != 4) dim_error("conv2d", "kernel must be 4-D, got " + shape_str(kernel.shape()));
  if (stride < 1) dim_error("conv2d", "stride must be >= 1");
  ConvDims d;
  d.n = input.shape()[0];
  d.cin = input.shape()[1];
  d.h = input.shape()[2];
  d.w = input.shape()[3];
  d.cout = kernel.shape()[0];
  d.kh = kernel.shape()[2];
  d.kw = kernel.shape()[3];
  if (kernel.shape()[1] != d.cin)
    dim_error("conv2d", "kernel in-channels " + std::to_string(kernel.shape()[1]) +
                            " != input channels " + std::to_string(d.cin));
  if (d.kh > d.h + 2 * padding || d.kw > d.w + 2 * padding)
    dim_error("conv2d", "kernel " + std::to_string(d.kh) + "x" + std::to_string(d.kw) +
                            " larger than padded input");
  d.hout = (d.h + 2 * padding - d.kh) / stride + 1;
  d.wout = (d.w + 2 * padding - d.kw) / stride + 1;
  return d;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int padding) {
  ConvDims d = conv_dims(input, kernel, stride, padding);
  auto node = make_node({d.n, d.cout, d.hout, d.wout}, {input.node(), kernel.node()});
  const double* x = input.data().data();
  const double* k = kernel.data().data();
  double* y = node->data.data();
  for (int n = 0; n < d.n; ++n)
    for (int co = 0; co < d.cout; ++co)
      for (int ci = 0; ci < d.cin; ++ci) {
        const double* xp = x + ((int64_t)n * d.cin + ci) * d.h * d.w;
        const double* kp = k + ((int64_t)co * d.cin + ci) * d.kh * d.kw;
        double* yp = y + ((int64_t)n * d.cout + co) * d.hout * d.wout;
        for (int oh = 0; oh < d.hout; ++oh)
          for (int kh = 0; kh < d.kh; ++kh) {
            int ih = oh * stride - padding + kh;
            if (ih < 0 || ih >= d.h) continue;
            for (int kw = 0; kw < d.kw; ++kw) {
              double kv = kp[kh * d.kw + kw];
              if (kv == 0.0) continue;
              int iw0 = -padding + kw;
              // valid ow range hoisted out of the hot loop
              int lo = iw0 < 0 ? (-iw0 + stride - 1) / stride : 0;
              int hi = std::min(d.wout, iw0 <= d.w - 1 ? (d.w - 1 - iw0) / stride + 1 : 0);
              const double* xr = xp + ih * d.w + iw0;
              double* yr = yp + oh * d.wout;
              for (int ow = lo; ow < hi; ++ow) yr[ow] += kv * xr[ow * stride];
            }
          }
      }
  auto in_node = input.node();
  auto k_node = kernel.node();
  node->backprop = [d, stride, padding, in_node, k_node](TensorNode& self) {
    const double* gy = self.grad.data();
    const double* x = in_node->data.data();
    const double* k = k_node->data.data();
    double* gx = in_node->requires_grad || !in_node->parents.empty()
                     ? in_node->ensure_grad().data()
                     : nullptr;
    double* gk = k_node->requires_grad || !k_node->parents.empty()
                     ? k_node->ensure_grad().data()
                     : nullptr;
    for (int n = 0; n < d.n; ++n)
      for (int co = 0; co < d.cout; ++co)
        for (int ci = 0; ci < d.cin; ++ci) {
          const double* xp = x + ((int64_t)n * d.cin + ci) * d.h * d.w;
          const double* kp = k + ((int64_t)co * d.cin + ci) * d.kh * d.kw;
          const double* gyp = gy + ((int64_t)n * d.cout + co) * d.hout * d.wout;
          double* gxp = gx ? gx + ((int64_t)n * d.cin + ci) * d.h * d.w : nullptr;
          double* gkp = gk ? gk + ((int64_t)co * d.cin + ci) * d.kh * d.kw : nullptr;
          for (int oh = 0; oh < d.hout; ++oh)
            for (int kh = 0; kh < d.kh; ++kh) {
              int ih = oh * stride - padding + kh;
              if (ih < 0 || ih >= d.h) continue;
              for (int kw = 0; kw < d.kw; ++kw) {
                int iw0 = -padding + kw;
                int lo = iw0 < 0 ? (-iw0 + stride - 1) / stride : 0;
                int hi =
                    std::min(d.wout, iw0 <= d.w - 1 ? (d.w - 1 - iw0) / stride + 1 : 0);
                const double* gyr = gyp + oh * d.wout;
                const double* xr = xp + ih * d.w + iw0;
                if (gxp) {
                  double kv = kp[kh * d.kw + kw];
                  double* gxr = gxp + ih * d.w + iw0;
                  for (int ow = lo; ow < hi; ++ow) gxr[ow * stride] += gyr[ow] * kv;
                }
                if (gkp) {
                  double acc = 0.0;
                  for (int ow = lo; ow < hi; ++ow) acc += gyr[ow] * xr[ow * stride];
                  gkp[kh * d.kw + kw] += acc;
                }
              }
            }
        }
  };
  return Tensor::wrap(node);
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride,
                        int padding, int output_padding) {
  if (input.shape().size() != 4)
    dim_error("conv2d_transpose", "input must be 4-D, got " + shape_str(input.shape()));
  if (kernel.shape().size() != 4)
    dim_error("conv2d_transpose", "kernel must be 4-D, got " + shape_str(kernel.shape()));
  if (stride < 1) dim_error("conv2d_transpose", "stride must be >= 1");
  int n = input.shape()[0], cin = input.shape()[1], h = input.shape()[2], w = input.shape()[3];
  if (kernel.shape()[0] != cin)
    dim_error("conv2d_transpose", "kernel in-channels " + std::to_string(kernel.shape()[0]) +
                                      " != input channels " + std::to_string(cin));
  int cout = kernel.shape()[1], kh = kernel.shape()[2], kw = kernel.shape()[3];
  int hout = (h - 1) * stride - 2 * padding + kh + output_padding;
  int wout = (w - 1) * stride - 2 * padding + kw + output_padding;
  if (hout <= 0 || wout <= 0)
    dim_error("conv2d_transpose", "parameters yield non-positive output dims");

  auto node = make_node({n, cout, hout, wout}, {input.node(), kernel.node()});
  const double* x = input.data().data();
  const double* k = kernel.data().data();
  double* y = node->data.data();
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < cin; ++ci)
      for (int co = 0; co < cout; ++co) {
        const double* xp = x + ((int64_t)ni * cin + ci) * h * w;
        const double* kp = k + ((int64_t)ci * cout + co) * kh * kw;
        double* yp = y + ((int64_t)ni * cout + co) * hout * wout;
        for (int ih = 0; ih < h; ++ih)
          for (int kr = 0; kr < kh; ++kr) {
            int oh = ih * stride - padding + kr;
            if (oh < 0 || oh >= hout) continue;
            for (int kc = 0; kc < kw; ++kc) {
              double kv = kp[kr * kw + kc];
              if (kv == 0.0) continue;
              int ow0 = kc - padding;  // ow = iw * stride + ow0
              int lo = ow0 < 0 ? (-ow0 + stride - 1) / stride : 0;
              int hi = std::min(w, ow0 <= wout - 1 ? (wout - 1 - ow0) / stride + 1 : 0);
              const double* xr = xp + ih * w;
              double* yr = yp + oh * wout + ow0;
              for (int iw = lo; iw < hi; ++iw) yr[iw * stride] += kv * xr[iw];
            }
          }
      }
  auto in_node = input.node();
  auto k_node = kernel.node();
  node->backprop = [n, cin, cout, h, w, kh, kw, hout, wout, stride, padding, in_node,
                    k_node](TensorNode& self) {
    const double* gy = self.grad.data();
    const double* x = in_node->data.data();
    const double* k = k_node->data.data();
    double* gx = in_node->requires_grad || !in_node->parents.empty()
                     ? in_node->ensure_grad().data()
                     : nullptr;
    double* gk = k_node->requires_grad || !k_node->parents.empty()
                     ? k_node->ensure_grad().data()
                     : nullptr;
    for (int ni = 0; ni < n; ++ni)
      for (int ci = 0; ci < cin; ++ci)
        for (int co = 0; co < cout; ++co) {
          const double* xp = x + ((int64_t)ni * cin + ci) * h * w;
          const double* kp = k + ((int64_t)ci * cout + co) * kh * kw;
          const double* gyp = gy + ((int64_t)ni * cout + co) * hout * wout;
          double* gxp = gx ? gx + ((int64_t)ni * cin + ci) * h * w : nullptr;
          double* gkp = gk ? gk + ((int64_t)ci * cout + co) * kh * kw : nullptr;
          for (int ih = 0; ih < h; ++ih)
            for (int kr = 0; kr < kh; ++kr) {
              int oh = ih * stride - padding + kr;
              if (oh < 0 || oh >= hout) continue;
              for (int kc = 0; kc < kw; ++kc) {
                int ow0 = kc - padding;  // ow = iw * stride + ow0
                int lo = ow0 < 0 ? (-ow0 + stride - 1) / stride : 0;
                int hi =
                    std::min(w, ow0 <= wout - 1 ? (wout - 1 - ow0) / stride + 1 : 0);
                const double* gyr = gyp + oh * wout + ow0;
                const double* xr = xp + ih * w;
                if (gxp) {
                  double kv = kp[kr * kw + kc];
                  double* gxr = gxp + ih * w;
                  for (int iw = lo; iw < hi; ++iw) gxr[iw] += gyr[iw * stride] * kv;
                }
                if (gkp) {
                  double acc = 0.0;
                  for (int iw = lo; iw < hi; ++iw) acc += gyr[iw * stride] * xr[iw];
                  gkp[kr * kw + kc] += acc;
                }
              }
            }
        }
  };
  return Tensor::wrap(node);
}

BatchNormState::BatchNormState(int channels) {
  eta = Tensor::full({channels}, 1.0, true);
  beta = Tensor::zeros({channels}, true);
  running_mean.assign(channels, 0.0);
  running_var.assign(channels, 1.0);
}

BatchNormState BatchNormState::clone() const {
  BatchNormState s;
  s.eta = eta.clone();
  s.beta = beta.clone();
  s.running_mean = running_mean;
  s.running_var = running_var;
  s.epsilon = epsilon;
  s.momentum = momentum;
  return s;
}

Tensor batch_norm(const Tensor& input, BatchNormState& state, bool training) {
  if (input.shape().size() != 4)
    dim_error("batch_norm", "input must be 4-D, got " + shape_str(input.shape()));
  int n = input.shape()[0], c = input.shape()[1], h = input.shape()[2], w = input.shape()[3];
  if (c != state.channels())
    dim_error("batch_norm", "channel count " + std::to_string(c) + " != state channels " +
                                std::to_string(state.channels()));
  int64_t m = (int64_t)n * h * w;  // samples per channel
  if (training && m < 2) dim_error("batch_norm", "training mode needs N*H*W >= 2");

  auto node = make_node(input.shape(), {input.node(), state.eta.node(), state.beta.node()});
  const double* x = input.data().data();
  const double* eta = state.eta.data().data();
  const double* beta = state.beta.data().data();
  double* y = node->data.data();

  std::vector<double> mean(c), var(c);
  if (training) {
    for (int ci = 0; ci < c; ++ci) {
      double s = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const double* xp = x + ((int64_t)ni * c + ci) * h * w;
        for (int64_t i = 0; i < (int64_t)h * w; ++i) s += xp[i];
      }
      mean[ci] = s / m;
      double v = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const double* xp = x + ((int64_t)ni * c + ci) * h * w;
        for (int64_t i = 0; i < (int64_t)h * w; ++i) {
          double dxi = xp[i] - mean[ci];
          v += dxi * dxi;
        }
      }
      var[ci] = v / m;  // biased, as used for normalization
      state.running_mean[ci] =
          (1.0 - state.momentum) * state.running_mean[ci] + state.momentum * mean[ci];
      state.running_var[ci] =
          (1.0 - state.momentum) * state.running_var[ci] + state.momentum * var[ci];
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  double epsilon = state.epsilon;
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      const double* xp = x + ((int64_t)ni * c + ci) * h * w;
      double* yp = y + ((int64_t)ni * c + ci) * h * w;
      double inv = 1.0 / std::sqrt(var[ci] + epsilon);
      for (int64_t i = 0; i < (int64_t)h * w; ++i)
        yp[i] = eta[ci] * (xp[i] - mean[ci]) * inv + beta[ci];
    }

  auto in_node = input.node();
  auto eta_node = state.eta.node();
  auto beta_node = state.beta.node();
  node->backprop = [n, c, h, w, m, mean, var, epsilon, training, in_node, eta_node,
                    beta_node](TensorNode& self) {
    const double* gy = self.grad.data();
    const double* x = in_node->data.data();
    const double* eta = eta_node->data.data();
    double* gx = in_node->requires_grad || !in_node->parents.empty()
                     ? in_node->ensure_grad().data()
                     : nullptr;
    double* geta = eta_node->requires_grad ? eta_node->ensure_grad().data() : nullptr;
    double* gbeta = beta_node->requires_grad ? beta_node->ensure_grad().data() : nullptr;
    for (int ci = 0; ci < c; ++ci) {
      double inv = 1.0 / std::sqrt(var[ci] + epsilon);
      double sum_gy = 0.0, sum_gy_xhat = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const double* xp = x + ((int64_t)ni * c + ci) * h * w;
        const double* gyp = gy + ((int64_t)ni * c + ci) * h * w;
        for (int64_t i = 0; i < (int64_t)h * w; ++i) {
          sum_gy += gyp[i];
          sum_gy_xhat += gyp[i] * (xp[i] - mean[ci]) * inv;
        }
      }
      if (geta) geta[ci] += sum_gy_xhat;
      if (gbeta) gbeta[ci] += sum_gy;
      if (!gx) continue;
      if (training) {
        // batch statistics participate in the gradient
        for (int ni = 0; ni < n; ++ni) {
          const double* xp = x + ((int64_t)ni * c + ci) * h * w;
          const double* gyp = gy + ((int64_t)ni * c + ci) * h * w;
          double* gxp = gx + ((int64_t)ni * c + ci) * h * w;
          for (int64_t i = 0; i < (int64_t)h * w; ++i) {
            double xhat = (xp[i] - mean[ci]) * inv;
            gxp[i] += eta[ci] * inv *
                      (gyp[i] - sum_gy / m - xhat * sum_gy_xhat / m);
          }
        }
      } else {
        for (int ni = 0; ni < n; ++ni) {
          const double* gyp = gy + ((int64_t)ni * c + ci) * h * w;
          double* gxp = gx + ((int64_t)ni * c + ci) * h * w;
          for (int64_t i = 0; i < (int64_t)h * w; ++i) gxp[i] += eta[ci] * inv * gyp[i];
        }
      }
    }
  };
  return Tensor::wrap(node);
}

namespace {

Tensor elementwise_unary(const Tensor& input, double (*f)(double),
                         double (*dfdy)(double x, double y)) {
  auto node = make_node(input.shape(), {input.node()});
  for (int64_t i = 0; i < input.size(); ++i) node->data[i] = f(input.data()[i]);
  auto in_node = input.node();
  node->backprop = [in_node, dfdy](TensorNode& self) {
    if (!in_node->requires_grad && in_node->parents.empty()) return;
    double* gx = in_node->ensure_grad().data();
    for (size_t i = 0; i < self.data.size(); ++i)
      gx[i] += self.grad[i] * dfdy(in_node->data[i], self.data[i]);
  };
  return Tensor::wrap(node);
}

}  // namespace

Tensor relu(const Tensor& input) {
  return elementwise_unary(
      input, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& input) {
  return elementwise_unary(
      input, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    dim_error("add", "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  auto node = make_node(a.shape(), {a.node(), b.node()});
  for (int64_t i = 0; i < a.size(); ++i) node->data[i] = a.data()[i] + b.data()[i];
  auto an = a.node(), bn = b.node();
  node->backprop = [an, bn](TensorNode& self) {
    for (auto& p : {an, bn}) {
      if (!p->requires_grad && p->parents.empty()) continue;
      double* g = p->ensure_grad().data();
      for (size_t i = 0; i < self.data.size(); ++i) g[i] += self.grad[i];
    }
  };
  return Tensor::wrap(node);
}

Tensor scale(const Tensor& a, double factor) {
  auto node = make_node(a.shape(), {a.node()});
  for (int64_t i = 0; i < a.size(); ++i) node->data[i] = factor * a.data()[i];
  auto an = a.node();
  node->backprop = [an, factor](TensorNode& self) {
    if (!an->requires_grad && an->parents.empty()) return;
    double* g = an->ensure_grad().data();
    for (size_t i = 0; i < self.data.size(); ++i) g[i] += factor * self.grad[i];
  };
  return Tensor::wrap(node);
}

Tensor reshape(const Tensor& input, Shape new_shape) {
  check_shape(new_shape);
  if (shape_numel(new_shape) != input.size())
    dim_error("reshape", "element count mismatch: " + shape_str(input.shape()) + " -> " +
                             shape_str(new_shape));
  auto node = make_node(new_shape, {input.node()});
  node->data = input.data();
  auto in_node = input.node();
  node->backprop = [in_node](TensorNode& self) {
    if (!in_node->requires_grad && in_node->parents.empty()) return;
    double* g = in_node->ensure_grad().data();
    for (size_t i = 0; i < self.data.size(); ++i) g[i] += self.grad[i];
  };
  return Tensor::wrap(node);
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    dim_error("mse_loss", "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  auto node = make_node({1}, {a.node(), b.node()});
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  int64_t n = a.size();
  node->data[0] = s / n;
  auto an = a.node(), bn = b.node();
  node->backprop = [an, bn, n](TensorNode& self) {
    double g = self.grad[0] * 2.0 / n;
    double* ga = an->requires_grad || !an->parents.empty() ? an->ensure_grad().data() : nullptr;
    double* gb = bn->requires_grad || !bn->parents.empty() ? bn->ensure_grad().data() : nullptr;
    for (int64_t i = 0; i < n; ++i) {
      double d = an->data[i] - bn->data[i];
      if (ga) ga[i] += g * d;
      if (gb) gb[i] -= g * d;
    }
  };
  return Tensor::wrap(node);
}

Tensor l1_penalty(const Tensor& input) {
  auto node = make_node({1}, {input.node()});
  double s = 0.0;
  for (int64_t i = 0; i < input.size(); ++i) s += std::abs(input.data()[i]);
  node->data[0] = s;
  auto in_node = input.node();
  node->backprop = [in_node](TensorNode& self) {
    if (!in_node->requires_grad && in_node->parents.empty()) return;
    double* g = in_node->ensure_grad().data();
    for (size_t i = 0; i < in_node->data.size(); ++i) {
      double x = in_node->data[i];
      double sgn = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      g[i] += self.grad[0] * sgn;
    }
  };
  return Tensor::wrap(node);
}

void AdamState::init(const std::vector<Tensor>& params) {
  step = 0;
  m.clear();
  v.clear();
  for (const auto& p : params) {
    m.emplace_back(p.size(), 0.0);
    v.emplace_back(p.size(), 0.0);
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.m.size() != params.size()) state.init(params);
  ++state.step;
  double bc1 = 1.0 - std::pow(state.beta1, (double)state.step);
  double bc2 = 1.0 - std::pow(state.beta2, (double)state.step);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi].data();
    const auto& g = params[pi].grad();
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace jscc
