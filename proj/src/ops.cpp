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

#include "mimoe/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mimoe/errors.hpp"

namespace mimoe {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

using Inputs = std::vector<TensorImpl*>;
using GradFn = std::function<void(const TensorImpl& out, const Inputs& in)>;

void check_finite(const char* op, const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericFault(op, "non-finite result");
  }
}

// Builds the result tensor and, when recording, appends the tape entry.
Tensor finish(const char* op, Shape shape, std::vector<double> values,
              std::vector<const Tensor*> inputs, GradFn grad_fn) {
  check_finite(op, values);
  auto out = std::make_shared<TensorImpl>();
  out->shape = std::move(shape);
  out->data = std::move(values);

  Tape* tape = Tape::active();
  bool needs = false;
  for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  if (tape != nullptr && needs) {
    out->requires_grad = true;
    out->is_leaf = false;
    Tape::Entry entry;
    entry.op = op;
    Inputs raw;
    for (const Tensor* t : inputs) {
      entry.inputs.push_back(t->impl());
      raw.push_back(t->impl().get());
    }
    entry.output = out;
    TensorImpl* out_raw = out.get();
    entry.backward = [grad_fn = std::move(grad_fn), out_raw, raw = std::move(raw)]() {
      grad_fn(*out_raw, raw);
    };
    tape->record(std::move(entry));
  }
  return make_tensor(std::move(out));
}

// Returns the gradient buffer of an input if it participates, else nullptr.
double* grad_of(TensorImpl* t) {
  if (!t->requires_grad) return nullptr;
  t->ensure_grad();
  return t->grad.data();
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
  std::size_t axis = 0;
};

AxisSplit split_axis(const Shape& shape, int axis, const char* op) {
  const int rank = static_cast<int>(shape.size());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw ShapeError(std::string(op) + ": axis out of range for shape " + to_string(shape));
  }
  AxisSplit s;
  s.axis = static_cast<std::size_t>(axis);
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (int i = axis + 1; i < rank; ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out = shape;
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  return out;
}

enum class Broadcast { kSame, kScalar, kTrailing };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.size() == 1) return Broadcast::kScalar;
  if (b.rank() == 1 && a.rank() >= 1 && b.dim(0) == a.shape().back()) {
    return Broadcast::kTrailing;
  }
  throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(b.shape()) +
                   " onto " + to_string(a.shape()));
}

// Index into b for flat index i of a.
inline std::size_t bindex(Broadcast kind, std::size_t i, std::size_t bsize) {
  switch (kind) {
    case Broadcast::kSame: return i;
    case Broadcast::kScalar: return 0;
    case Broadcast::kTrailing: return i % bsize;
  }
  return 0;
}

template <class F, class D>
Tensor unary(const char* op, const Tensor& x, F f, D dfdx) {
  std::vector<double> y(x.size());
  auto xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return finish(op, x.shape(), std::move(y), {&x},
                [dfdx](const TensorImpl& out, const Inputs& in) {
                  double* gx = grad_of(in[0]);
                  if (!gx) return;
                  const auto& xs = in[0]->data;
                  for (std::size_t i = 0; i < out.grad.size(); ++i) {
                    gx[i] += out.grad[i] * dfdx(xs[i], out.data[i]);
                  }
                });
}

inline double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (b.rank() != 2 || a.rank() < 1 || a.shape().back() != b.dim(0)) {
    throw ShapeError("matmul: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const std::size_t k = b.dim(0);
  const std::size_t n = b.dim(1);
  const std::size_t m = a.size() / k;
  Shape shape = a.shape();
  shape.back() = n;
  std::vector<double> out(m * n);
  MatMap(out.data(), m, n).noalias() =
      ConstMatMap(a.data().data(), m, k) * ConstMatMap(b.data().data(), k, n);
  return finish("matmul", std::move(shape), std::move(out), {&a, &b},
                [m, k, n](const TensorImpl& o, const Inputs& in) {
                  ConstMatMap g(o.grad.data(), m, n);
                  if (double* ga = grad_of(in[0])) {
                    MatMap(ga, m, k).noalias() +=
                        g * ConstMatMap(in[1]->data.data(), k, n).transpose();
                  }
                  if (double* gb = grad_of(in[1])) {
                    MatMap(gb, k, n).noalias() +=
                        ConstMatMap(in[0]->data.data(), m, k).transpose() * g;
                  }
                });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) ||
      a.dim(2) != (transpose_b ? b.dim(2) : b.dim(1))) {
    throw ShapeError("bmm: " + to_string(a.shape()) + " x " + to_string(b.shape()) +
                     (transpose_b ? " (transposed)" : ""));
  }
  const std::size_t batch = a.dim(0);
  const std::size_t m = a.dim(1);
  const std::size_t k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  std::vector<double> out(batch * m * n);
  for (std::size_t s = 0; s < batch; ++s) {
    ConstMatMap as(a.data().data() + s * m * k, m, k);
    MatMap os(out.data() + s * m * n, m, n);
    if (transpose_b) {
      os.noalias() = as * ConstMatMap(b.data().data() + s * n * k, n, k).transpose();
    } else {
      os.noalias() = as * ConstMatMap(b.data().data() + s * k * n, k, n);
    }
  }
  return finish("bmm", {batch, m, n}, std::move(out), {&a, &b},
                [batch, m, k, n, transpose_b](const TensorImpl& o, const Inputs& in) {
                  double* ga = grad_of(in[0]);
                  double* gb = grad_of(in[1]);
                  for (std::size_t s = 0; s < batch; ++s) {
                    ConstMatMap g(o.grad.data() + s * m * n, m, n);
                    ConstMatMap as(in[0]->data.data() + s * m * k, m, k);
                    if (transpose_b) {
                      ConstMatMap bs(in[1]->data.data() + s * n * k, n, k);
                      if (ga) MatMap(ga + s * m * k, m, k).noalias() += g * bs;
                      if (gb) MatMap(gb + s * n * k, n, k).noalias() += g.transpose() * as;
                    } else {
                      ConstMatMap bs(in[1]->data.data() + s * k * n, k, n);
                      if (ga) MatMap(ga + s * m * k, m, k).noalias() += g * bs.transpose();
                      if (gb) MatMap(gb + s * k * n, k, n).noalias() += as.transpose() * g;
                    }
                  }
                });
}

namespace {

template <class Fwd, class GradA, class GradB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd f, GradA da, GradB db) {
  const Broadcast kind = broadcast_kind(a, b, op);
  const std::size_t bsize = b.size();
  std::vector<double> out(a.size());
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[bindex(kind, i, bsize)]);
  return finish(op, a.shape(), std::move(out), {&a, &b},
                [kind, bsize, da, db](const TensorImpl& o, const Inputs& in) {
                  const auto& x = in[0]->data;
                  const auto& y = in[1]->data;
                  double* ga = grad_of(in[0]);
                  double* gb = grad_of(in[1]);
                  for (std::size_t i = 0; i < o.grad.size(); ++i) {
                    const std::size_t j = bindex(kind, i, bsize);
                    if (ga) ga[i] += o.grad[i] * da(x[i], y[j]);
                    if (gb) gb[j] += o.grad[i] * db(x[i], y[j]);
                  }
                });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      "add_scalar", a, [value](double x) { return x + value; },
      [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor mul_rows(const Tensor& x, const Tensor& w) {
  if (x.rank() < 1 || numel(w.shape()) * x.shape().back() != x.size() ||
      Shape(x.shape().begin(), x.shape().end() - 1) != w.shape()) {
    throw ShapeError("mul_rows: " + to_string(x.shape()) + " by " + to_string(w.shape()));
  }
  const std::size_t rows = w.size();
  const std::size_t d = x.shape().back();
  std::vector<double> out(x.size());
  auto xv = x.data();
  auto wv = w.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = xv[r * d + c] * wv[r];
  }
  return finish("mul_rows", x.shape(), std::move(out), {&x, &w},
                [rows, d](const TensorImpl& o, const Inputs& in) {
                  double* gx = grad_of(in[0]);
                  double* gw = grad_of(in[1]);
                  const auto& xs = in[0]->data;
                  const auto& ws = in[1]->data;
                  for (std::size_t r = 0; r < rows; ++r) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                      const double g = o.grad[r * d + c];
                      if (gx) gx[r * d + c] += g * ws[r];
                      acc += g * xs[r * d + c];
                    }
                    if (gw) gw[r] += acc;
                  }
                });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& x) {
  return unary(
      "silu", x, [](double v) { return v * sigmoid_scalar(v); },
      [](double v, double) {
        const double s = sigmoid_scalar(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor reciprocal(const Tensor& x) {
  return unary(
      "reciprocal", x, [](double v) { return 1.0 / v; },
      [](double, double y) { return -y * y; });
}

Tensor sum(const Tensor& x, int axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "sum");
  std::vector<double> out(s.outer * s.inner, 0.0);
  auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.n; ++j) {
      const double* row = xv.data() + (o * s.n + j) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += row[i];
    }
  }
  return finish("sum", drop_axis(x.shape(), s.axis), std::move(out), {&x},
                [s](const TensorImpl& o, const Inputs& in) {
                  double* gx = grad_of(in[0]);
                  if (!gx) return;
                  for (std::size_t a = 0; a < s.outer; ++a) {
                    for (std::size_t j = 0; j < s.n; ++j) {
                      double* dst = gx + (a * s.n + j) * s.inner;
                      const double* g = o.grad.data() + a * s.inner;
                      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += g[i];
                    }
                  }
                });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return finish("sum", {}, {total}, {&x}, [](const TensorImpl& o, const Inputs& in) {
    double* gx = grad_of(in[0]);
    if (!gx) return;
    for (std::size_t i = 0; i < in[0]->data.size(); ++i) gx[i] += o.grad[0];
  });
}

Tensor mean(const Tensor& x, int axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "mean");
  return scale(sum(x, axis), 1.0 / static_cast<double>(s.n));
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor softmax(const Tensor& x, int axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  std::vector<double> out(x.size());
  auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) mx = std::max(mx, xv[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) {
        const double e = std::exp(xv[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] /= z;
    }
  }
  return finish("softmax", x.shape(), std::move(out), {&x},
                [s](const TensorImpl& o, const Inputs& in) {
                  double* gx = grad_of(in[0]);
                  if (!gx) return;
                  for (std::size_t a = 0; a < s.outer; ++a) {
                    for (std::size_t i = 0; i < s.inner; ++i) {
                      const std::size_t base = a * s.n * s.inner + i;
                      double dot = 0.0;
                      for (std::size_t j = 0; j < s.n; ++j) {
                        const std::size_t p = base + j * s.inner;
                        dot += o.grad[p] * o.data[p];
                      }
                      for (std::size_t j = 0; j < s.n; ++j) {
                        const std::size_t p = base + j * s.inner;
                        gx[p] += o.data[p] * (o.grad[p] - dot);
                      }
                    }
                  }
                });
}

namespace {

// Stabilized log-sum-exp of n strided values.
double lse_strided(const double* x, std::size_t n, std::size_t stride) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[j * stride]);
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) z += std::exp(x[j * stride] - mx);
  return mx + std::log(z);
}

}  // namespace

Tensor log_softmax(const Tensor& x, int axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "log_softmax");
  std::vector<double> out(x.size());
  auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      const double lse = lse_strided(xv.data() + base, s.n, s.inner);
      for (std::size_t j = 0; j < s.n; ++j) {
        out[base + j * s.inner] = xv[base + j * s.inner] - lse;
      }
    }
  }
  return finish("log_softmax", x.shape(), std::move(out), {&x},
                [s](const TensorImpl& o, const Inputs& in) {
                  double* gx = grad_of(in[0]);
                  if (!gx) return;
                  for (std::size_t a = 0; a < s.outer; ++a) {
                    for (std::size_t i = 0; i < s.inner; ++i) {
                      const std::size_t base = a * s.n * s.inner + i;
                      double gsum = 0.0;
                      for (std::size_t j = 0; j < s.n; ++j) gsum += o.grad[base + j * s.inner];
                      for (std::size_t j = 0; j < s.n; ++j) {
                        const std::size_t p = base + j * s.inner;
                        gx[p] += o.grad[p] - std::exp(o.data[p]) * gsum;
                      }
                    }
                  }
                });
}

Tensor log_sum_exp(const Tensor& x, int axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "log_sum_exp");
  std::vector<double> out(s.outer * s.inner);
  auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      out[o * s.inner + i] = lse_strided(xv.data() + o * s.n * s.inner + i, s.n, s.inner);
    }
  }
  return finish("log_sum_exp", drop_axis(x.shape(), s.axis), std::move(out), {&x},
                [s](const TensorImpl& o, const Inputs& in) {
                  double* gx = grad_of(in[0]);
                  if (!gx) return;
                  const auto& xs = in[0]->data;
                  for (std::size_t a = 0; a < s.outer; ++a) {
                    for (std::size_t i = 0; i < s.inner; ++i) {
                      const double lse = o.data[a * s.inner + i];
                      const double g = o.grad[a * s.inner + i];
                      for (std::size_t j = 0; j < s.n; ++j) {
                        const std::size_t p = a * s.n * s.inner + j * s.inner + i;
                        gx[p] += g * std::exp(xs[p] - lse);
                      }
                    }
                  }
                });
}

Tensor standardize(const Tensor& x, double eps) {
  if (x.rank() < 1) throw ShapeError("standardize: scalar input");
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.size() / d;
  std::vector<double> out(x.size());
  std::vector<double> inv_scale(rows);
  std::vector<char> floored(rows);
  auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(d);
    const double sigma = std::sqrt(var);
    floored[r] = sigma <= eps;
    inv_scale[r] = 1.0 / std::max(sigma, eps);
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = (row[c] - mu) * inv_scale[r];
  }
  return finish(
      "standardize", x.shape(), std::move(out), {&x},
      [d, rows, inv_scale = std::move(inv_scale), floored = std::move(floored)](
          const TensorImpl& o, const Inputs& in) {
        double* gx = grad_of(in[0]);
        if (!gx) return;
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = o.grad.data() + r * d;
          const double* y = o.data.data() + r * d;
          double gmean = 0.0;
          double gy = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            gmean += g[c];
            gy += g[c] * y[c];
          }
          gmean *= inv_d;
          gy *= inv_d;
          if (floored[r]) gy = 0.0;  // scale is the constant eps
          for (std::size_t c = 0; c < d; ++c) {
            gx[r * d + c] += inv_scale[r] * (g[c] - gmean - y[c] * gy);
          }
        }
      });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const AxisSplit first = split_axis(parts[0].shape(), axis, "concat");
  std::size_t total_n = 0;
  std::vector<std::size_t> widths;
  for (const Tensor& p : parts) {
    if (p.rank() != parts[0].rank()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < p.rank(); ++i) {
      if (i != first.axis && p.dim(i) != parts[0].dim(i)) {
        throw ShapeError("concat: " + to_string(p.shape()) + " vs " +
                         to_string(parts[0].shape()));
      }
    }
    widths.push_back(p.dim(first.axis) * first.inner);
    total_n += p.dim(first.axis);
  }
  Shape shape = parts[0].shape();
  shape[first.axis] = total_n;
  const std::size_t row = total_n * first.inner;
  std::vector<double> out(first.outer * row);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto src = parts[p].data();
    for (std::size_t o = 0; o < first.outer; ++o) {
      std::copy_n(src.data() + o * widths[p], widths[p], out.data() + o * row + offset);
    }
    offset += widths[p];
  }
  std::vector<const Tensor*> inputs;
  for (const Tensor& p : parts) inputs.push_back(&p);
  const std::size_t outer = first.outer;
  return finish("concat", std::move(shape), std::move(out), std::move(inputs),
                [outer, row, widths](const TensorImpl& o, const Inputs& in) {
                  std::size_t offset = 0;
                  for (std::size_t p = 0; p < in.size(); ++p) {
                    if (double* g = grad_of(in[p])) {
                      for (std::size_t a = 0; a < outer; ++a) {
                        const double* src = o.grad.data() + a * row + offset;
                        double* dst = g + a * widths[p];
                        for (std::size_t i = 0; i < widths[p]; ++i) dst[i] += src[i];
                      }
                    }
                    offset += widths[p];
                  }
                });
}

Tensor concat(std::initializer_list<Tensor> parts, int axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor stack(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  const int rank = static_cast<int>(parts[0].rank());
  if (axis < 0) axis += rank + 1;
  if (axis < 0 || axis > rank) throw ShapeError("stack: axis out of range");
  std::vector<Tensor> lifted;
  lifted.reserve(parts.size());
  for (const Tensor& p : parts) {
    if (p.shape() != parts[0].shape()) throw ShapeError("stack: shape mismatch");
    Shape s = p.shape();
    s.insert(s.begin() + axis, 1);
    lifted.push_back(reshape(p, s));
  }
  return concat(std::span<const Tensor>(lifted), axis);
}

Tensor stack(std::initializer_list<Tensor> parts, int axis) {
  return stack(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& x, int axis, std::size_t begin, std::size_t end) {
  const AxisSplit s = split_axis(x.shape(), axis, "slice");
  if (begin >= end || end > s.n) {
    throw ShapeError("slice: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + to_string(x.shape()));
  }
  Shape shape = x.shape();
  shape[s.axis] = end - begin;
  const std::size_t width = (end - begin) * s.inner;
  const std::size_t row = s.n * s.inner;
  const std::size_t offset = begin * s.inner;
  std::vector<double> out(s.outer * width);
  auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.data() + o * row + offset, width, out.data() + o * width);
  }
  const std::size_t outer = s.outer;
  return finish("slice", std::move(shape), std::move(out), {&x},
                [outer, width, row, offset](const TensorImpl& o, const Inputs& in) {
                  double* gx = grad_of(in[0]);
                  if (!gx) return;
                  for (std::size_t a = 0; a < outer; ++a) {
                    const double* src = o.grad.data() + a * width;
                    double* dst = gx + a * row + offset;
                    for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
                  }
                });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size() || shape.size() > 3) {
    throw ShapeError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return finish("reshape", std::move(shape), std::move(out), {&x},
                [](const TensorImpl& o, const Inputs& in) {
                  double* gx = grad_of(in[0]);
                  if (!gx) return;
                  for (std::size_t i = 0; i < o.grad.size(); ++i) gx[i] += o.grad[i];
                });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  if (x.rank() < 1 || index.empty()) throw ShapeError("gather_rows: empty selection");
  const std::size_t rows = x.dim(0);
  const std::size_t width = x.size() / rows;
  for (std::size_t r : index) {
    if (r >= rows) throw DomainError("gather_rows: index out of range");
  }
  Shape shape = x.shape();
  shape[0] = index.size();
  std::vector<double> out(index.size() * width);
  auto xv = x.data();
  for (std::size_t i = 0; i < index.size(); ++i) {
    std::copy_n(xv.data() + index[i] * width, width, out.data() + i * width);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return finish("gather_rows", std::move(shape), std::move(out), {&x},
                [idx = std::move(idx), width](const TensorImpl& o, const Inputs& in) {
                  double* gx = grad_of(in[0]);
                  if (!gx) return;
                  for (std::size_t i = 0; i < idx.size(); ++i) {
                    const double* src = o.grad.data() + i * width;
                    double* dst = gx + idx[i] * width;
                    for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
                  }
                });
}

Tensor pick(const Tensor& x, std::span<const std::size_t> index) {
  if (x.rank() != 2 || index.size() != x.dim(0)) {
    throw ShapeError("pick: " + to_string(x.shape()) + " with " +
                     std::to_string(index.size()) + " indices");
  }
  const std::size_t cols = x.dim(1);
  std::vector<double> out(index.size());
  for (std::size_t b = 0; b < index.size(); ++b) {
    if (index[b] >= cols) throw DomainError("pick: index out of range");
    out[b] = x[b * cols + index[b]];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return finish("pick", {index.size()}, std::move(out), {&x},
                [idx = std::move(idx), cols](const TensorImpl& o, const Inputs& in) {
                  double* gx = grad_of(in[0]);
                  if (!gx) return;
                  for (std::size_t b = 0; b < idx.size(); ++b) gx[b * cols + idx[b]] += o.grad[b];
                });
}

Tensor detach(const Tensor& x) {
  return Tensor::from(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
}

Tensor cross_entropy_logits(const Tensor& logits, std::span<const std::size_t> targets) {
  if (logits.rank() != 2 || logits.dim(1) < 2 || targets.size() != logits.dim(0)) {
    throw ShapeError("cross_entropy_logits: logits " + to_string(logits.shape()) + " with " +
                     std::to_string(targets.size()) + " targets");
  }
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  auto x = logits.data();
  double total = 0.0;
  std::vector<double> lse(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    if (targets[b] >= classes) {
      throw DomainError("cross_entropy_logits: target " + std::to_string(targets[b]) +
                        " out of range");
    }
    lse[b] = lse_strided(x.data() + b * classes, classes, 1);
    total += lse[b] - x[b * classes + targets[b]];
  }
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return finish(
      "cross_entropy", {}, {total / static_cast<double>(batch)}, {&logits},
      [batch, classes, lse = std::move(lse), tgt = std::move(tgt)](const TensorImpl& o,
                                                                   const Inputs& in) {
        double* gx = grad_of(in[0]);
        if (!gx) return;
        const double g = o.grad[0] / static_cast<double>(batch);
        const auto& xs = in[0]->data;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < classes; ++c) {
            const double p = std::exp(xs[b * classes + c] - lse[b]);
            gx[b * classes + c] += g * (p - (c == tgt[b] ? 1.0 : 0.0));
          }
        }
      });
}

Tensor cross_entropy_logits(const Tensor& logits, const Tensor& targets) {
  if (logits.rank() != 2 || logits.dim(1) < 2 || targets.shape() != logits.shape()) {
    throw ShapeError("cross_entropy_logits: logits " + to_string(logits.shape()) +
                     " with targets " + to_string(targets.shape()));
  }
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  auto x = logits.data();
  auto t = targets.data();
  double total = 0.0;
  std::vector<double> lse(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    lse[b] = lse_strided(x.data() + b * classes, classes, 1);
    for (std::size_t c = 0; c < classes; ++c) {
      total -= t[b * classes + c] * (x[b * classes + c] - lse[b]);
    }
  }
  return finish(
      "cross_entropy", {}, {total / static_cast<double>(batch)}, {&logits, &targets},
      [batch, classes, lse = std::move(lse)](const TensorImpl& o, const Inputs& in) {
        const double g = o.grad[0] / static_cast<double>(batch);
        const auto& xs = in[0]->data;
        const auto& ts = in[1]->data;
        double* gx = grad_of(in[0]);
        double* gt = grad_of(in[1]);
        for (std::size_t b = 0; b < batch; ++b) {
          double tsum = 0.0;
          for (std::size_t c = 0; c < classes; ++c) tsum += ts[b * classes + c];
          for (std::size_t c = 0; c < classes; ++c) {
            const std::size_t p = b * classes + c;
            const double logp = xs[p] - lse[b];
            if (gx) gx[p] += g * (std::exp(logp) * tsum - ts[p]);
            if (gt) gt[p] -= g * logp;
          }
        }
      });
}

}  // namespace mimoe
