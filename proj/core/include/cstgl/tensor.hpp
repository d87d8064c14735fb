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

#pragma once

// Dense float64 arrays with tape-based reverse-mode differentiation.
//
// Every op returns a fresh array; values are never mutated after an op writes
// them. When at least one operand requires a gradient, the result records its
// parents and a backward closure, and `backward(loss)` replays that record in
// reverse topological order. Leaf arrays marked trainable accumulate into
// their grad buffer across calls until `zero_grad()`; intermediate buffers are
// rebuilt on each call.
//
// Broadcasting is limited to scalar-with-array (`scale`, `add_scalar`); all
// other binary ops require identical shapes.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cstgl {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool trainable = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads `grad` of this node and accumulates into parents' grads.
  std::function<void(Node&)> backward;
};

}  // namespace detail

class DiffArray {
 public:
  DiffArray() = default;
  DiffArray(Shape shape, std::vector<double> values, bool trainable = false);

  static DiffArray zeros(Shape shape, bool trainable = false);
  static DiffArray filled(Shape shape, double value, bool trainable = false);
  static DiffArray scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> values() const;
  // Only leaves may be written (optimizer updates, perturbation probes).
  std::span<double> mutable_values();

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  bool trainable() const;
  bool requires_grad() const;
  bool is_leaf() const;

  // Value of a one-element array.
  double item() const;
  // Copy of the values without history; never requires grad.
  DiffArray detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  static DiffArray wrap(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

bool grad_enabled();

// Builds an op result. `backward` is recorded only when some parent requires
// a gradient and recording is enabled.
DiffArray make_result(Shape shape, std::vector<double> value,
                      std::vector<DiffArray> parents,
                      std::function<void(Node&)> backward);

// Grad buffer of a parent, allocated on first use.
std::vector<double>& grad_of(Node& node);

}  // namespace detail

// Disables recording on this thread for its lifetime (inference passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---- elementwise ----------------------------------------------------------

DiffArray add(const DiffArray& a, const DiffArray& b);
DiffArray sub(const DiffArray& a, const DiffArray& b);
DiffArray mul(const DiffArray& a, const DiffArray& b);
DiffArray scale(const DiffArray& a, double factor);
DiffArray add_scalar(const DiffArray& a, double offset);
DiffArray tanh(const DiffArray& a);
DiffArray sigmoid(const DiffArray& a);
// Subgradient at exactly 0 is 0.
DiffArray relu(const DiffArray& a);

// ---- reductions and shape -------------------------------------------------

DiffArray sum(const DiffArray& a);
DiffArray mean(const DiffArray& a);
DiffArray reshape(const DiffArray& a, Shape shape);

// ---- matrices -------------------------------------------------------------

DiffArray matmul(const DiffArray& a, const DiffArray& b);
DiffArray transpose(const DiffArray& a);

// ---- 4-D feature maps laid out as [batch, channel, node, time] -------------

// Valid (unpadded) dilated convolution along time with kernel
// [cout, cin, 1, width]: out[t] = sum_{c,w} k[w] * in[t + dilation * w].
DiffArray conv1d_dilated(const DiffArray& input, const DiffArray& kernel,
                         std::size_t dilation);
// x[b, c, n, t] + bias[c].
DiffArray add_channel_bias(const DiffArray& x, const DiffArray& bias);
// Keeps the last `length` time steps.
DiffArray truncate_time(const DiffArray& x, std::size_t length);
// Left-pads the time axis with zeros up to `length`; identity if already long.
DiffArray pad_time_left(const DiffArray& x, std::size_t length);
DiffArray concat_channels(const std::vector<DiffArray>& parts);
// Channels [begin, begin + count).
DiffArray slice_channels(const DiffArray& x, std::size_t begin, std::size_t count);
// Stacks conv kernels [cout_i, cin, 1, w_i] along cout, left-padding each to
// `width` taps. A conv with the result equals the per-kernel convs truncated
// to their common output length.
DiffArray stack_kernels(const std::vector<DiffArray>& kernels, std::size_t width);
// y[b, c, i, t] = sum_j adj[i, j] * x[b, c, j, t].
DiffArray propagate_nodes(const DiffArray& adjacency, const DiffArray& x);

// ---- differentiation ------------------------------------------------------

// Populates grads on every trainable leaf reachable from `loss`. Repeated
// calls without `zero_grad` accumulate.
void backward(const DiffArray& loss);

// ---- optimizer ------------------------------------------------------------

struct AdamOptions {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::size_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamState for_params(std::span<const DiffArray> params,
                              AdamOptions options = {});
};

// Bias-corrected Adam update using each parameter's accumulated grad.
// Parameters without a grad buffer are left untouched. Throws NumericError
// (and changes nothing) if any gradient entry is non-finite.
void adam_step(std::span<DiffArray> params, AdamState& state);

// Rescales all grads so their joint L2 norm is at most `max_norm`. Returns
// the norm before clipping.
double clip_grad_norm(std::span<DiffArray> params, double max_norm);

}  // namespace cstgl
