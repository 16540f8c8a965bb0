// Copyright 2026 The mcn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcn/error.hpp"

namespace mcn {

// Dimension sizes; images use (batch, channel, height, width).
using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

enum class Mode { kTrain, kEval };

// While alive, ops on this thread record nothing on the tape.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct TensorImpl;

// One recorded operation. The backward rule reads the gradient of the
// output it produced and accumulates into the gradients of `inputs`.
template <typename T>
struct Node {
  std::string op;
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  std::function<void(const TensorImpl<T>& out)> backward;
  bool consumed = false;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a backward pass reaches this tensor
  bool requires_grad = false;
  std::shared_ptr<Node<T>> grad_fn;

  // Zero-filled gradient buffer, allocated on first use.
  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

// Dense row-major tensor. Copies share storage (handle semantics), so an
// optimizer step on a parameter is visible through every handle.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor(Shape{}, std::vector<T>{value}, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape.at(static_cast<std::size_t>(i)); }
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

  std::span<const T> data() const { return impl_->data; }
  std::span<T> mutable_data() { return impl_->data; }
  T item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool is_leaf() const { return impl_->grad_fn == nullptr; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  // Same values, new storage, no tape history.
  Tensor clone() const;
  Tensor detach() const { return clone(); }

  // Reverse-mode pass from this scalar into every reachable leaf.
  void backward() const;

  std::shared_ptr<detail::TensorImpl<T>> impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl<T>> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

// Topologically ordered list of the tensors a backward pass visits.
template <typename T>
class Tape {
 public:
  static Tape collect(const Tensor<T>& root);

  const std::vector<std::shared_ptr<detail::TensorImpl<T>>>& order() const { return order_; }
  std::size_t size() const { return order_.size(); }

  // Runs every node's backward rule once, in reverse order.
  void run();

 private:
  std::vector<std::shared_ptr<detail::TensorImpl<T>>> order_;
};

namespace detail {

// Builds an op result and records it on the tape when any input needs a
// gradient. `backward` receives the output impl (with its grad filled).
template <typename T>
Tensor<T> record(Shape shape, std::vector<T> data, std::string_view op,
                 std::vector<Tensor<T>> inputs,
                 std::function<void(const TensorImpl<T>& out)> backward);

// When debug checks are enabled, throws NumericError if `t` holds NaN/Inf.
template <typename T>
void check_finite(std::string_view op, const Tensor<T>& t);

}  // namespace detail

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace mcn
