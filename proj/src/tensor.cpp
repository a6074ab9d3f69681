// Copyright 2026 The mimoe Authors.
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

#include "mimoe/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "mimoe/errors.hpp"

namespace mimoe {

namespace {

thread_local Tape* g_active_tape = nullptr;

void validate_shape(const Shape& shape) {
  if (shape.size() > 3) {
    throw ShapeError("tensor rank > 3: " + to_string(shape));
  }
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("zero-sized dimension in " + to_string(shape));
  }
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

void TensorImpl::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) {
  impl_->data.assign(1, 0.0);
}

Tensor::Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

Tensor make_tensor(std::shared_ptr<TensorImpl> impl) {
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  validate_shape(shape);
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(numel(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  validate_shape(shape);
  if (numel(shape) != values.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + to_string(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::set_requires_grad(bool value) { impl_->requires_grad = value; }

double Tensor::item() const {
  if (impl_->data.size() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(impl_->shape));
  }
  return impl_->data[0];
}

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(Entry entry) { entries_.push_back(std::move(entry)); }

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward() requires a scalar loss, got shape " +
                     to_string(loss.shape()));
  }
  const auto& root = loss.impl();
  if (!root->requires_grad) {
    throw DomainError("backward() on a tensor that is not on the tape");
  }
  for (auto& e : entries_) {
    if (!e.output->grad.empty()) {
      std::fill(e.output->grad.begin(), e.output->grad.end(), 0.0);
    }
  }
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not reachable from loss
    it->backward();
  }
}

void backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (tape == nullptr) throw DomainError("backward() with no active tape");
  tape->backward(loss);
}

NoGradGuard::NoGradGuard() : previous_(g_active_tape) { g_active_tape = nullptr; }

NoGradGuard::~NoGradGuard() { g_active_tape = previous_; }

}  // namespace mimoe
