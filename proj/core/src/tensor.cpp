// Copyright 2026 The cstgl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cstgl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include <Eigen/Dense>

#include "cstgl/errors.hpp"

namespace cstgl {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

// ---------------------------------------------------------------------------
// DiffArray

DiffArray::DiffArray(Shape shape, std::vector<double> values, bool trainable) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError("DiffArray: shape " + shape_to_string(shape) +
                         " holds " + std::to_string(shape_size(shape)) +
                         " values but " + std::to_string(values.size()) +
                         " were given");
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->trainable = trainable;
  node_->requires_grad = trainable;
}

DiffArray DiffArray::zeros(Shape shape, bool trainable) {
  return filled(std::move(shape), 0.0, trainable);
}

DiffArray DiffArray::filled(Shape shape, double value, bool trainable) {
  const std::size_t n = shape_size(shape);
  return DiffArray(std::move(shape), std::vector<double>(n, value), trainable);
}

DiffArray DiffArray::scalar(double value) { return DiffArray({1}, {value}); }

DiffArray DiffArray::wrap(std::shared_ptr<detail::Node> node) {
  DiffArray out;
  out.node_ = std::move(node);
  return out;
}

namespace {

const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw ContractError("DiffArray: use of an undefined array");
  return *node;
}

}  // namespace

const Shape& DiffArray::shape() const { return checked(node_).shape; }

std::size_t DiffArray::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("DiffArray: axis " + std::to_string(axis) +
                         " out of range for shape " + shape_to_string(s));
  }
  return s[axis];
}

std::size_t DiffArray::size() const { return checked(node_).value.size(); }

std::span<const double> DiffArray::values() const {
  return checked(node_).value;
}

std::span<double> DiffArray::mutable_values() {
  checked(node_);
  if (!is_leaf()) {
    throw ContractError("DiffArray: only leaf arrays may be modified in place");
  }
  return node_->value;
}

bool DiffArray::has_grad() const { return !checked(node_).grad.empty(); }

std::span<const double> DiffArray::grad() const { return checked(node_).grad; }

std::span<double> DiffArray::mutable_grad() {
  checked(node_);
  return node_->grad;
}

void DiffArray::zero_grad() {
  checked(node_);
  node_->grad.clear();
}

bool DiffArray::trainable() const { return checked(node_).trainable; }
bool DiffArray::requires_grad() const { return checked(node_).requires_grad; }
bool DiffArray::is_leaf() const { return !checked(node_).backward; }

double DiffArray::item() const {
  if (size() != 1) {
    throw DimensionError("DiffArray::item: array of shape " +
                         shape_to_string(shape()) + " is not a scalar");
  }
  return node_->value[0];
}

DiffArray DiffArray::detach() const {
  return DiffArray(shape(), checked(node_).value, false);
}

// ---------------------------------------------------------------------------
// recording

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace detail {

bool grad_enabled() { return g_grad_enabled; }

DiffArray make_result(Shape shape, std::vector<double> value,
                      std::vector<DiffArray> parents,
                      std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs_grad = needs_grad || p.requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return DiffArray::wrap(std::move(node));
}

std::vector<double>& grad_of(Node& node) {
  if (node.grad.size() != node.value.size()) {
    node.grad.assign(node.value.size(), 0.0);
  }
  return node.grad;
}

}  // namespace detail

using detail::grad_of;
using detail::make_result;
using detail::Node;

// ---------------------------------------------------------------------------
// elementwise

namespace {

void require_same_shape(const char* op, const DiffArray& a,
                        const DiffArray& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

template <typename Fwd, typename Deriv>
DiffArray unary(const DiffArray& a, Fwd fwd, Deriv deriv) {
  const auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result(a.shape(), std::move(out), {a}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = grad_of(p);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
    }
  });
}

}  // namespace

DiffArray add(const DiffArray& a, const DiffArray& b) {
  require_same_shape("add", a, b);
  const auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = grad_of(*p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

DiffArray sub(const DiffArray& a, const DiffArray& b) {
  require_same_shape("sub", a, b);
  const auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = grad_of(*self.parents[0]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = grad_of(*self.parents[1]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

DiffArray mul(const DiffArray& a, const DiffArray& b) {
  require_same_shape("mul", a, b);
  const auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = grad_of(pa);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = grad_of(pb);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

DiffArray scale(const DiffArray& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

DiffArray add_scalar(const DiffArray& a, double offset) {
  return unary(
      a, [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

DiffArray tanh(const DiffArray& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

DiffArray sigmoid(const DiffArray& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

DiffArray relu(const DiffArray& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// reductions and shape

DiffArray sum(const DiffArray& a) {
  const auto x = a.values();
  double total = 0.0;
  for (double v : x) total += v;
  return make_result({1}, {total}, {a}, [](Node& self) {
    auto& g = grad_of(*self.parents[0]);
    for (double& v : g) v += self.grad[0];
  });
}

DiffArray mean(const DiffArray& a) {
  if (a.size() == 0) throw DimensionError("mean: empty array");
  const double inv = 1.0 / static_cast<double>(a.size());
  const auto x = a.values();
  double total = 0.0;
  for (double v : x) total += v;
  return make_result({1}, {total * inv}, {a}, [inv](Node& self) {
    auto& g = grad_of(*self.parents[0]);
    for (double& v : g) v += self.grad[0] * inv;
  });
}

DiffArray reshape(const DiffArray& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) +
                         " as " + shape_to_string(shape));
  }
  const auto x = a.values();
  return make_result(std::move(shape), std::vector<double>(x.begin(), x.end()),
                     {a}, [](Node& self) {
                       auto& g = grad_of(*self.parents[0]);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                     });
}

// ---------------------------------------------------------------------------
// matrices

DiffArray matmul(const DiffArray& a, const DiffArray& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " +
                         shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto x = a.values(), y = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      const double* yrow = &y[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += xv * yrow[j];
    }
  }
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto& g = self.grad;
    if (pa.requires_grad) {
      // dA = G * B^T
      auto& ga = grad_of(pa);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = &g[i * n];
          const double* brow = &pb.value[p * n];
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      // dB = A^T * G
      auto& gb = grad_of(pb);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = pa.value[i * k + p];
          const double* grow = &g[i * n];
          double* brow = &gb[p * n];
          for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
        }
      }
    }
  });
}

DiffArray transpose(const DiffArray& a) {
  if (a.rank() != 2) {
    throw DimensionError("transpose: expected a matrix, got " +
                         shape_to_string(a.shape()));
  }
  const std::size_t r = a.dim(0), c = a.dim(1);
  const auto x = a.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  return make_result({c, r}, std::move(out), {a}, [r, c](Node& self) {
    auto& g = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

// ---------------------------------------------------------------------------
// 4-D feature maps

namespace {

struct Dims4 {
  std::size_t b, c, n, t;
};

Dims4 dims4(const char* op, const DiffArray& x) {
  if (x.rank() != 4) {
    throw DimensionError(std::string(op) +
                         ": expected [batch, channel, node, time], got " +
                         shape_to_string(x.shape()));
  }
  return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
}

}  // namespace

DiffArray conv1d_dilated(const DiffArray& input, const DiffArray& kernel,
                         std::size_t dilation) {
  const Dims4 d = dims4("conv1d_dilated", input);
  if (kernel.rank() != 4 || kernel.dim(2) != 1 || kernel.dim(1) != d.c) {
    throw DimensionError("conv1d_dilated: kernel " +
                         shape_to_string(kernel.shape()) +
                         " does not match input " +
                         shape_to_string(input.shape()) +
                         " (expected [cout, " + std::to_string(d.c) +
                         ", 1, width])");
  }
  if (dilation == 0) throw ContractError("conv1d_dilated: dilation must be >= 1");
  const std::size_t cout = kernel.dim(0);
  const std::size_t width = kernel.dim(3);
  if (width == 0) throw DimensionError("conv1d_dilated: kernel width is 0");
  const std::size_t span = dilation * (width - 1);
  if (d.t < span + 1) {
    throw DimensionError("conv1d_dilated: input time length " +
                         std::to_string(d.t) + " is below the required minimum " +
                         std::to_string(span + 1));
  }
  const std::size_t tout = d.t - span;
  // im2col: rows (c, w), columns (b, n, t); the conv is one GEMM.
  const std::size_t rows = d.c * width;
  const std::size_t cols = d.b * d.n * tout;
  const auto in = input.values();
  auto col = std::make_shared<std::vector<double>>(rows * cols);
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t w = 0; w < width; ++w) {
      double* dst = col->data() + (c * width + w) * cols;
      const std::size_t shift = dilation * w;
      for (std::size_t b = 0; b < d.b; ++b) {
        for (std::size_t n = 0; n < d.n; ++n) {
          const double* src = &in[((b * d.c + c) * d.n + n) * d.t + shift];
          std::copy(src, src + tout, dst);
          dst += tout;
        }
      }
    }
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const std::size_t plane = d.n * tout;
  RowMat prod = Eigen::Map<const RowMat>(kernel.values().data(), cout, rows) *
                Eigen::Map<const RowMat>(col->data(), rows, cols);
  std::vector<double> out(d.b * cout * plane);
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t b = 0; b < d.b; ++b) {
      std::copy_n(prod.data() + o * cols + b * plane, plane, &out[(b * cout + o) * plane]);
    }
  }
  return make_result(
      {d.b, cout, d.n, tout}, std::move(out), {input, kernel},
      [d, cout, width, dilation, tout, rows, cols, plane, col](Node& self) {
        Node& pin = *self.parents[0];
        Node& pk = *self.parents[1];
        RowMat g(cout, cols);
        for (std::size_t o = 0; o < cout; ++o) {
          for (std::size_t b = 0; b < d.b; ++b) {
            std::copy_n(&self.grad[(b * cout + o) * plane], plane, g.data() + o * cols + b * plane);
          }
        }
        if (pk.requires_grad) {
          Eigen::Map<RowMat> gk(grad_of(pk).data(), cout, rows);
          gk.noalias() += g * Eigen::Map<const RowMat>(col->data(), rows, cols).transpose();
        }
        if (pin.requires_grad) {
          RowMat gcol = Eigen::Map<const RowMat>(pk.value.data(), cout, rows).transpose() * g;
          double* gin = grad_of(pin).data();
          for (std::size_t c = 0; c < d.c; ++c) {
            for (std::size_t w = 0; w < width; ++w) {
              const double* src = gcol.data() + (c * width + w) * cols;
              const std::size_t shift = dilation * w;
              for (std::size_t b = 0; b < d.b; ++b) {
                for (std::size_t n = 0; n < d.n; ++n) {
                  double* dst = gin + ((b * d.c + c) * d.n + n) * d.t + shift;
                  for (std::size_t t = 0; t < tout; ++t) dst[t] += src[t];
                  src += tout;
                }
              }
            }
          }
        }
      });
}

DiffArray add_channel_bias(const DiffArray& x, const DiffArray& bias) {
  const Dims4 d = dims4("add_channel_bias", x);
  if (bias.size() != d.c) {
    throw DimensionError("add_channel_bias: bias of size " +
                         std::to_string(bias.size()) + " for " +
                         std::to_string(d.c) + " channels");
  }
  const auto in = x.values();
  const auto bv = bias.values();
  const std::size_t plane = d.n * d.t;
  std::vector<double> out(in.begin(), in.end());
  for (std::size_t b = 0; b < d.b; ++b)
    for (std::size_t c = 0; c < d.c; ++c) {
      double* p = &out[(b * d.c + c) * plane];
      for (std::size_t i = 0; i < plane; ++i) p[i] += bv[c];
    }
  return make_result(x.shape(), std::move(out), {x, bias}, [d, plane](Node& self) {
    Node& px = *self.parents[0];
    Node& pb = *self.parents[1];
    if (px.requires_grad) {
      auto& g = grad_of(px);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = grad_of(pb);
      for (std::size_t b = 0; b < d.b; ++b)
        for (std::size_t c = 0; c < d.c; ++c) {
          const double* p = &self.grad[(b * d.c + c) * plane];
          double acc = 0.0;
          for (std::size_t i = 0; i < plane; ++i) acc += p[i];
          g[c] += acc;
        }
    }
  });
}

DiffArray truncate_time(const DiffArray& x, std::size_t length) {
  const Dims4 d = dims4("truncate_time", x);
  if (length > d.t) {
    throw DimensionError("truncate_time: cannot keep " + std::to_string(length) +
                         " of " + std::to_string(d.t) + " time steps");
  }
  const std::size_t rows = d.b * d.c * d.n;
  const std::size_t offset = d.t - length;
  const auto in = x.values();
  std::vector<double> out(rows * length);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(&in[r * d.t + offset], length, &out[r * length]);
  return make_result({d.b, d.c, d.n, length}, std::move(out), {x},
                     [rows, length, offset, t = d.t](Node& self) {
                       auto& g = grad_of(*self.parents[0]);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t i = 0; i < length; ++i)
                           g[r * t + offset + i] += self.grad[r * length + i];
                     });
}

DiffArray pad_time_left(const DiffArray& x, std::size_t length) {
  const Dims4 d = dims4("pad_time_left", x);
  if (length <= d.t) return x;
  const std::size_t rows = d.b * d.c * d.n;
  const std::size_t offset = length - d.t;
  const auto in = x.values();
  std::vector<double> out(rows * length, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(&in[r * d.t], d.t, &out[r * length + offset]);
  return make_result({d.b, d.c, d.n, length}, std::move(out), {x},
                     [rows, length, offset, t = d.t](Node& self) {
                       auto& g = grad_of(*self.parents[0]);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t i = 0; i < t; ++i)
                           g[r * t + i] += self.grad[r * length + offset + i];
                     });
}

DiffArray concat_channels(const std::vector<DiffArray>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  const Dims4 first = dims4("concat_channels", parts[0]);
  std::size_t channels = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const Dims4 d = dims4("concat_channels", p);
    if (d.b != first.b || d.n != first.n || d.t != first.t) {
      throw DimensionError("concat_channels: " + shape_to_string(p.shape()) +
                           " does not align with " +
                           shape_to_string(parts[0].shape()));
    }
    widths.push_back(d.c);
    channels += d.c;
  }
  const std::size_t plane = first.n * first.t;
  std::vector<double> out(first.b * channels * plane);
  for (std::size_t b = 0; b < first.b; ++b) {
    std::size_t c0 = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto in = parts[k].values();
      std::copy_n(&in[b * widths[k] * plane], widths[k] * plane,
                  &out[(b * channels + c0) * plane]);
      c0 += widths[k];
    }
  }
  return make_result(
      {first.b, channels, first.n, first.t}, std::move(out), parts,
      [widths, channels, plane, batch = first.b](Node& self) {
        for (std::size_t b = 0; b < batch; ++b) {
          std::size_t c0 = 0;
          for (std::size_t k = 0; k < widths.size(); ++k) {
            Node& p = *self.parents[k];
            if (p.requires_grad) {
              auto& g = grad_of(p);
              const double* src = &self.grad[(b * channels + c0) * plane];
              double* dst = &g[b * widths[k] * plane];
              for (std::size_t i = 0; i < widths[k] * plane; ++i) dst[i] += src[i];
            }
            c0 += widths[k];
          }
        }
      });
}

DiffArray slice_channels(const DiffArray& x, std::size_t begin, std::size_t count) {
  const Dims4 d = dims4("slice_channels", x);
  if (begin + count > d.c || count == 0) {
    throw DimensionError("slice_channels: channels [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") of " + shape_to_string(x.shape()));
  }
  const std::size_t plane = d.n * d.t;
  const auto in = x.values();
  std::vector<double> out(d.b * count * plane);
  for (std::size_t b = 0; b < d.b; ++b) {
    std::copy_n(&in[(b * d.c + begin) * plane], count * plane, &out[b * count * plane]);
  }
  return make_result({d.b, count, d.n, d.t}, std::move(out), {x},
                     [d, begin, count, plane](Node& self) {
                       auto& g = grad_of(*self.parents[0]);
                       for (std::size_t b = 0; b < d.b; ++b) {
                         const double* src = &self.grad[b * count * plane];
                         double* dst = &g[(b * d.c + begin) * plane];
                         for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
                       }
                     });
}

DiffArray stack_kernels(const std::vector<DiffArray>& kernels, std::size_t width) {
  if (kernels.empty()) throw DimensionError("stack_kernels: no kernels");
  const std::size_t cin = kernels[0].rank() == 4 ? kernels[0].dim(1) : 0;
  std::size_t cout = 0;
  for (const auto& k : kernels) {
    if (k.rank() != 4 || k.dim(1) != cin || k.dim(2) != 1 || k.dim(3) > width) {
      throw DimensionError("stack_kernels: kernel " + shape_to_string(k.shape()) +
                           " does not fit [*, " + std::to_string(cin) + ", 1, <=" +
                           std::to_string(width) + "]");
    }
    cout += k.dim(0);
  }
  std::vector<double> out(cout * cin * width, 0.0);
  std::size_t o0 = 0;
  for (const auto& k : kernels) {
    const auto v = k.values();
    const std::size_t w = k.dim(3);
    for (std::size_t r = 0; r < k.dim(0) * cin; ++r) {
      std::copy_n(&v[r * w], w, &out[(o0 * cin + r) * width + (width - w)]);
    }
    o0 += k.dim(0);
  }
  return make_result({cout, cin, 1, width}, std::move(out), kernels,
                     [cin, width](Node& self) {
                       std::size_t o0 = 0;
                       for (auto& parent : self.parents) {
                         Node& p = *parent;
                         const std::size_t rows = p.shape[0] * cin;
                         const std::size_t w = p.shape[3];
                         if (p.requires_grad) {
                           auto& g = grad_of(p);
                           for (std::size_t r = 0; r < rows; ++r) {
                             const double* src = &self.grad[(o0 * cin + r) * width + (width - w)];
                             for (std::size_t j = 0; j < w; ++j) g[r * w + j] += src[j];
                           }
                         }
                         o0 += p.shape[0];
                       }
                     });
}

DiffArray propagate_nodes(const DiffArray& adjacency, const DiffArray& x) {
  const Dims4 d = dims4("propagate_nodes", x);
  if (adjacency.rank() != 2 || adjacency.dim(0) != d.n || adjacency.dim(1) != d.n) {
    throw DimensionError("propagate_nodes: adjacency " +
                         shape_to_string(adjacency.shape()) + " for " +
                         std::to_string(d.n) + " nodes");
  }
  const auto a = adjacency.values();
  const auto in = x.values();
  const std::size_t blocks = d.b * d.c;
  std::vector<double> out(in.size(), 0.0);
  for (std::size_t bc = 0; bc < blocks; ++bc) {
    const double* xb = &in[bc * d.n * d.t];
    double* yb = &out[bc * d.n * d.t];
    for (std::size_t i = 0; i < d.n; ++i)
      for (std::size_t j = 0; j < d.n; ++j) {
        const double w = a[i * d.n + j];
        if (w == 0.0) continue;
        const double* xr = xb + j * d.t;
        double* yr = yb + i * d.t;
        for (std::size_t t = 0; t < d.t; ++t) yr[t] += w * xr[t];
      }
  }
  return make_result(x.shape(), std::move(out), {adjacency, x}, [d, blocks](Node& self) {
    Node& pa = *self.parents[0];
    Node& px = *self.parents[1];
    double* ga = pa.requires_grad ? grad_of(pa).data() : nullptr;
    double* gx = px.requires_grad ? grad_of(px).data() : nullptr;
    for (std::size_t bc = 0; bc < blocks; ++bc) {
      const double* gb = &self.grad[bc * d.n * d.t];
      const double* xb = &px.value[bc * d.n * d.t];
      for (std::size_t i = 0; i < d.n; ++i)
        for (std::size_t j = 0; j < d.n; ++j) {
          const double w = pa.value[i * d.n + j];
          const double* gr = gb + i * d.t;
          if (gx && w != 0.0) {
            double* gxr = gx + bc * d.n * d.t + j * d.t;
            for (std::size_t t = 0; t < d.t; ++t) gxr[t] += w * gr[t];
          }
          if (ga) {
            const double* xr = xb + j * d.t;
            double acc = 0.0;
            for (std::size_t t = 0; t < d.t; ++t) acc += gr[t] * xr[t];
            ga[i * d.n + j] += acc;
          }
        }
    }
  });
}

// ---------------------------------------------------------------------------
// backward

void backward(const DiffArray& loss) {
  if (!loss.defined()) throw ContractError("backward: undefined loss");
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward: loss is not connected to any trainable array");
  }

  // Post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* node : order) {
    if (node->backward) {
      node->grad.assign(node->value.size(), 0.0);
    } else {
      grad_of(*node);
    }
  }
  loss.node()->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward) continue;
    node->backward(*node);
    // Intermediate buffers are not needed once propagated.
    std::vector<double>().swap(node->grad);
  }
}

// ---------------------------------------------------------------------------
// optimizer

AdamState AdamState::for_params(std::span<const DiffArray> params,
                                AdamOptions options) {
  if (!(options.learning_rate > 0.0) || !(options.beta1 > 0.0 && options.beta1 < 1.0) ||
      !(options.beta2 > 0.0 && options.beta2 < 1.0) || !(options.epsilon > 0.0)) {
    throw ContractError("AdamState: invalid hyperparameters");
  }
  AdamState state;
  state.options = options;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.size(), 0.0);
    state.second_moment.emplace_back(p.size(), 0.0);
  }
  return state;
}

void adam_step(std::span<DiffArray> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ContractError("adam_step: state tracks " +
                        std::to_string(state.first_moment.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != state.first_moment[i].size()) {
      throw ContractError("adam_step: moment buffer " + std::to_string(i) +
                          " does not match parameter shape " +
                          shape_to_string(params[i].shape()));
    }
    for (double g : params[i].grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in parameter " +
                           std::to_string(i) + " " +
                           shape_to_string(params[i].shape()) +
                           "; update rejected");
      }
    }
  }
  state.step_count += 1;
  const auto& opt = state.options;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) continue;
    auto values = params[i].mutable_values();
    const auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = opt.beta1 * m[j] + (1.0 - opt.beta1) * g;
      v[j] = opt.beta2 * v[j] + (1.0 - opt.beta2) * g * g;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      values[j] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  }
}

double clip_grad_norm(std::span<DiffArray> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& p : params)
      for (double& g : p.mutable_grad()) g *= factor;
  }
  return norm;
}

}  // namespace cstgl
