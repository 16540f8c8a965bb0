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

#include "mcn/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace mcn {

namespace {
thread_local bool t_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw InvalidArgument("negative dimension in shape " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  const auto n = shape_numel(shape);
  impl_->shape = std::move(shape);
  impl_->data.assign(static_cast<std::size_t>(n), fill);
  impl_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw InvalidArgument("data length " + std::to_string(data.size()) +
                          " does not match shape " + shape_to_string(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

template <typename T>
T Tensor<T>::item() const {
  if (impl_->data.size() != 1) {
    throw InvalidArgument("item() on tensor of shape " + shape_to_string(impl_->shape));
  }
  return impl_->data[0];
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor<T>(impl_->shape, impl_->data, impl_->requires_grad && is_leaf());
}

template <typename T>
void Tensor<T>::backward() const {
  if (!defined()) throw InvalidArgument("backward on undefined tensor");
  if (impl_->data.size() != 1) {
    throw InvalidArgument("backward requires a scalar, got shape " +
                          shape_to_string(impl_->shape));
  }
  if (impl_->grad_fn && impl_->grad_fn->consumed) {
    throw StaleTapeError("backward called twice on the same graph; rebuild the forward pass");
  }
  if (!impl_->grad_fn && !impl_->requires_grad) {
    throw InvalidArgument("backward on a tensor that is not connected to the tape");
  }
  Tape<T> tape = Tape<T>::collect(*this);
  impl_->grad_buffer()[0] += T(1);
  tape.run();
}

template <typename T>
Tape<T> Tape<T>::collect(const Tensor<T>& root) {
  // Iterative post-order DFS; every impl is emitted once, after its inputs.
  Tape<T> tape;
  std::unordered_set<const detail::TensorImpl<T>*> seen;
  struct Frame {
    std::shared_ptr<detail::TensorImpl<T>> impl;
    std::size_t next_input;
  };
  std::vector<Frame> stack;
  stack.push_back({root.impl(), 0});
  seen.insert(root.impl().get());
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& node = top.impl->grad_fn;
    if (node && node->consumed) {
      throw StaleTapeError("graph contains an operation whose tape was already consumed");
    }
    if (node && top.next_input < node->inputs.size()) {
      auto child = node->inputs[top.next_input++];
      if (seen.insert(child.get()).second) stack.push_back({std::move(child), 0});
      continue;
    }
    tape.order_.push_back(top.impl);
    stack.pop_back();
  }
  return tape;
}

template <typename T>
void Tape<T>::run() {
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    auto& impl = **it;
    if (!impl.grad_fn) continue;
    auto& node = *impl.grad_fn;
    if (!impl.grad.empty() && node.backward) node.backward(impl);
    node.consumed = true;
    node.backward = nullptr;
    node.inputs.clear();
    // Intermediate gradients are released; only leaves keep theirs.
    impl.grad.clear();
    impl.grad.shrink_to_fit();
  }
}

namespace detail {

template <typename T>
void check_finite(std::string_view op, const Tensor<T>& t) {
#ifdef MCN_DEBUG_CHECKS
  for (T v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + " produced a non-finite value");
    }
  }
#else
  (void)op;
  (void)t;
#endif
}

template <typename T>
Tensor<T> record(Shape shape, std::vector<T> data, std::string_view op,
                 std::vector<Tensor<T>> inputs,
                 std::function<void(const TensorImpl<T>& out)> backward) {
  Tensor<T> out(std::move(shape), std::move(data));
#ifdef MCN_DEBUG_CHECKS
  bool inputs_finite = true;
  for (const auto& in : inputs) {
    for (T v : in.data()) inputs_finite = inputs_finite && std::isfinite(v);
  }
  if (inputs_finite) check_finite(op, out);
#endif
  bool needs_grad = false;
  if (!t_grad_enabled) return out;
  for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  if (!needs_grad) return out;
  auto node = std::make_shared<Node<T>>();
  node->op = std::string(op);
  node->inputs.reserve(inputs.size());
  for (auto& in : inputs) node->inputs.push_back(in.impl());
  node->backward = std::move(backward);
  out.impl()->grad_fn = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

template Tensor<float> record(Shape, std::vector<float>, std::string_view,
                              std::vector<Tensor<float>>,
                              std::function<void(const TensorImpl<float>&)>);
template Tensor<double> record(Shape, std::vector<double>, std::string_view,
                               std::vector<Tensor<double>>,
                               std::function<void(const TensorImpl<double>&)>);
template void check_finite(std::string_view, const Tensor<float>&);
template void check_finite(std::string_view, const Tensor<double>&);

}  // namespace detail

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace mcn
