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

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mimoe {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Storage behind a Tensor handle. Shared between handles and tape entries.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first written
  bool requires_grad = false;
  bool is_leaf = true;

  void ensure_grad();
};

/// Dense row-major array of doubles, rank 0..3, with optional gradient.
///
/// Copies are shallow: two Tensor values may refer to the same storage.
/// Parameters are leaf tensors with requires_grad set; op results are
/// recorded on the active Tape when any input requires a gradient.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t size() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  std::span<double> mutable_data() const { return impl_->data; }

  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient buffer; all zeros when nothing has been accumulated yet.
  std::vector<double> grad() const;
  void zero_grad();

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value);

  /// Value of a single-element tensor.
  double item() const;
  double operator[](std::size_t flat) const { return impl_->data[flat]; }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl);
  friend Tensor make_tensor(std::shared_ptr<TensorImpl> impl);

  std::shared_ptr<TensorImpl> impl_;
};

Tensor make_tensor(std::shared_ptr<TensorImpl> impl);

/// Ordered record of differentiable operations.
///
/// Entries are appended in execution order, so the recording order is a
/// topological order and backward() walks it once in reverse. A tape is
/// installed for the current thread with Tape::Scope; ops executed with no
/// active tape (or with no grad-requiring input) are not recorded.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  struct Entry {
    const char* op;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    BackwardFn backward;
  };

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active();

  void record(Entry entry);

  /// Seeds d(loss)/d(loss) = 1 and propagates in reverse recording order.
  /// Intermediate gradients are reset first; leaf gradients accumulate
  /// across calls until zero_grad().
  void backward(const Tensor& loss);

  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

/// backward() on the thread's active tape.
void backward(const Tensor& loss);

/// Disables recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* previous_;
};

}  // namespace mimoe
