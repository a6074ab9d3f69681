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

#include "mimoe/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mimoe/errors.hpp"
#include "mimoe/imoe.hpp"
#include "mimoe/interaction.hpp"
#include "mimoe/model.hpp"
#include "mimoe/nn.hpp"
#include "mimoe/ops.hpp"

namespace mimoe {

namespace {

double evaluate(const std::function<Tensor()>& loss) {
  NoGradGuard guard;
  return loss().item();
}

std::vector<std::size_t> entries_to_check(std::size_t size, const GradCheckOptions& o,
                                          std::mt19937_64& rng) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (o.max_entries > 0 && o.max_entries < size) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(o.max_entries);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

}  // namespace

GradCheckResult check_gradients(const std::string& name, const std::function<Tensor()>& loss,
                                std::span<Tensor> inputs, const GradCheckOptions& options,
                                const std::function<std::vector<std::size_t>()>& decisions) {
  GradCheckResult result;
  result.name = name;
  result.tolerance = options.tolerance;

  for (Tensor& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor l = loss();
    if (l.size() != 1) throw ShapeError("check_gradients: loss must have one element");
    tape.backward(l);
  }
  std::vector<std::vector<double>> analytic;
  for (Tensor& t : inputs) analytic.push_back(t.grad());

  std::vector<std::size_t> baseline;
  if (decisions) {
    NoGradGuard guard;
    baseline = decisions();
  }
  auto unchanged = [&] {
    if (!decisions) return true;
    NoGradGuard guard;
    return decisions() == baseline;
  };

  std::mt19937_64 rng(options.seed);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::span<double> values = inputs[i].mutable_data();
    for (std::size_t j : entries_to_check(values.size(), options, rng)) {
      const double original = values[j];
      values[j] = original + options.step;
      const double plus = evaluate(loss);
      bool stable = unchanged();
      values[j] = original - options.step;
      const double minus = evaluate(loss);
      stable = stable && unchanged();
      values[j] = original;
      if (!stable) {
        ++result.skipped;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[i][j];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), options.floor});
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      result.max_rel_error = std::max(result.max_rel_error, rel);
      ++result.checked;
    }
  }
  for (Tensor& t : inputs) t.zero_grad();
  return result;
}

namespace {

class SuiteBuilder {
 public:
  explicit SuiteBuilder(const GradientSuiteOptions& o) : options_(o), rng_(o.seed) {}

  Tensor random(Shape shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(numel(shape));
    for (double& x : v) x = u(rng_);
    return Tensor::from(std::move(shape), std::move(v));
  }

  /// Weighted sum with fixed random weights, so every output entry matters.
  std::function<Tensor()> reduce(std::function<Tensor()> f) {
    Tensor probe;
    {
      NoGradGuard guard;
      probe = f();
    }
    Tensor w = random(probe.shape());
    return [f = std::move(f), w] { return sum(mul(f(), w)); };
  }

  void primitive(const std::string& name, std::function<Tensor()> f, std::vector<Tensor> inputs) {
    run(name, reduce(std::move(f)), inputs, options_.primitive_tolerance, {}, false);
  }

  void composite(const std::string& name, std::function<Tensor()> f, std::vector<Tensor> inputs,
                 std::function<std::vector<std::size_t>()> decisions = {}, bool reduce_out = true) {
    run(name, reduce_out ? reduce(std::move(f)) : std::move(f), inputs,
        options_.composite_tolerance, std::move(decisions), true);
  }

  std::vector<Tensor> params(const ParameterList& list) {
    std::vector<Tensor> out;
    for (const NamedParameter& p : list) out.push_back(p.tensor);
    return out;
  }

  Rng& rng() { return rng_; }
  std::vector<GradCheckResult>& results() { return results_; }

 private:
  void run(const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor>& inputs,
           double tolerance, const std::function<std::vector<std::size_t>()>& decisions,
           bool composite) {
    GradCheckOptions o;
    o.tolerance = tolerance;
    GradCheckResult r = check_gradients((composite ? "block/" : "op/") + name, f, inputs, o,
                                        decisions);
    results_.push_back(std::move(r));
  }

  GradientSuiteOptions options_;
  Rng rng_;
  std::vector<GradCheckResult> results_;
};

void primitive_checks(SuiteBuilder& s) {
  Tensor a = s.random({3, 4});
  Tensor b = s.random({4, 5});
  s.primitive("matmul", [=] { return matmul(a, b); }, {a, b});

  Tensor x3 = s.random({2, 3, 4});
  Tensor y3 = s.random({2, 4, 5});
  Tensor z3 = s.random({2, 5, 4});
  s.primitive("bmm", [=] { return bmm(x3, y3); }, {x3, y3});
  s.primitive("bmm_transposed", [=] { return bmm(x3, z3, true); }, {x3, z3});

  Tensor p = s.random({3, 4});
  Tensor q = s.random({3, 4});
  Tensor row = s.random({4});
  Tensor c = s.random({});
  s.primitive("add", [=] { return add(p, q); }, {p, q});
  s.primitive("add_row_broadcast", [=] { return add(x3, row); }, {x3, row});
  s.primitive("add_scalar_broadcast", [=] { return add(p, c); }, {p, c});
  s.primitive("sub", [=] { return sub(p, row); }, {p, row});
  s.primitive("mul", [=] { return mul(p, q); }, {p, q});
  s.primitive("mul_row_broadcast", [=] { return mul(x3, row); }, {x3, row});
  s.primitive("scale", [=] { return scale(p, -1.7); }, {p});
  s.primitive("add_scalar", [=] { return add_scalar(p, 0.3); }, {p});
  s.primitive("neg", [=] { return neg(p); }, {p});
  Tensor w = s.random({3});
  s.primitive("mul_rows", [=] { return mul_rows(p, w); }, {p, w});

  s.primitive("sigmoid", [=] { return sigmoid(p); }, {p});
  s.primitive("silu", [=] { return silu(p); }, {p});
  s.primitive("exp", [=] { return exp(p); }, {p});
  Tensor pos = s.random({3, 4}, 0.5, 2.0);
  s.primitive("log", [=] { return log(pos); }, {pos});
  s.primitive("square", [=] { return square(p); }, {p});
  s.primitive("reciprocal", [=] { return reciprocal(pos); }, {pos});

  for (int axis : {0, 1, 2, -1}) {
    const std::string sfx = "_axis" + std::to_string(axis);
    s.primitive("sum" + sfx, [=] { return sum(x3, axis); }, {x3});
    s.primitive("mean" + sfx, [=] { return mean(x3, axis); }, {x3});
    s.primitive("softmax" + sfx, [=] { return softmax(x3, axis); }, {x3});
    s.primitive("log_softmax" + sfx, [=] { return log_softmax(x3, axis); }, {x3});
    s.primitive("log_sum_exp" + sfx, [=] { return log_sum_exp(x3, axis); }, {x3});
  }
  s.primitive("sum_all", [=] { return sum(x3); }, {x3});
  s.primitive("mean_all", [=] { return mean(x3); }, {x3});
  s.primitive("standardize", [=] { return standardize(x3, kNormEps); }, {x3});

  Tensor r1 = s.random({2, 2, 4});
  s.primitive("concat_axis1", [=] { return concat({x3, r1}, 1); }, {x3, r1});
  Tensor r0 = s.random({1, 3, 4});
  s.primitive("concat_axis0", [=] { return concat({x3, r0}, 0); }, {x3, r0});
  s.primitive("stack", [=] { return stack({p, q}, 1); }, {p, q});
  s.primitive("slice", [=] { return slice(x3, 2, 1, 3); }, {x3});
  s.primitive("reshape", [=] { return reshape(x3, {6, 4}); }, {x3});
  const std::vector<std::size_t> rows{2, 0, 2};
  s.primitive("gather_rows", [=] { return gather_rows(p, rows); }, {p});
  s.primitive("pick", [=] { return pick(p, rows); }, {p});

  Tensor logits = s.random({4, 3}, -2.0, 2.0);
  const std::vector<std::size_t> targets{0, 2, 1, 2};
  s.primitive("cross_entropy", [=] { return cross_entropy_logits(logits, targets); }, {logits});
  Tensor soft = softmax(s.random({4, 3}), -1);
  s.primitive("cross_entropy_soft", [=] { return cross_entropy_logits(logits, soft); }, {logits});
}

ModelConfig tiny_model() {
  ModelConfig c;
  c.text_tokens = 3;
  c.text_dim = 5;
  c.image_tokens = 2;
  c.image_dim = 4;
  c.clip_raw_dim = 6;
  c.dim = 8;
  c.clip_dim = 4;
  c.hidden = 8;
  c.experts = 2;
  c.heads = 4;
  c.ff_ratio = 4;
  c.seed = 5;
  return c;
}

void composite_checks(SuiteBuilder& s) {
  Rng& rng = s.rng();
  Tensor x = s.random({2, 5, 8});

  Linear lin(8, 6, rng);
  {
    std::vector<Tensor> in = s.params([&] { ParameterList l; lin.collect(l, "lin"); return l; }());
    in.push_back(x);
    s.composite("linear", [=] { return lin.forward(x); }, in);
  }
  Mlp mlp(8, 7, 3, rng);
  {
    std::vector<Tensor> in = s.params([&] { ParameterList l; mlp.collect(l, "mlp"); return l; }());
    in.push_back(x);
    s.composite("mlp", [=] { return mlp.forward(x); }, in);
  }
  AdaptiveNorm norm(8);
  {
    // Move the affine parameters off their identity initialization.
    for (double& v : norm.gain.mutable_data()) v += 0.3 * std::uniform_real_distribution<>(-1, 1)(rng);
    for (double& v : norm.shift.mutable_data()) v += 0.3 * std::uniform_real_distribution<>(-1, 1)(rng);
    std::vector<Tensor> in = s.params([&] { ParameterList l; norm.collect(l, "n"); return l; }());
    in.push_back(x);
    s.composite("adaptive_norm", [=] { return norm.forward(x); }, in);
  }
  TransformerBlock block({8, 4, 4}, rng);
  {
    std::vector<Tensor> in = s.params([&] { ParameterList l; block.collect(l, "t"); return l; }());
    in.push_back(x);
    s.composite("transformer_block", [=] { return block.forward(x); }, in);
  }
  IMoeOptions io;
  io.dim = 8;
  io.hidden = 8;
  io.experts = 2;
  io.transformer = {8, 4, 4};
  IMoeBlock imoe(io, rng);
  {
    std::vector<Tensor> in = s.params([&] { ParameterList l; imoe.collect(l, "m"); return l; }());
    in.push_back(x);
    s.composite("imoe_block", [=] { return imoe.forward(x).o; }, in);
  }
  {
    Tensor weights = s.random({2, 5}, 0.1, 1.0);
    s.composite("weighted_pool", [=] { return weighted_pool(x, weights, IMoeBlock::kPoolEps); },
                {x, weights});
  }

  InteractionGate gate({8, 4, 8}, rng);
  Tensor e_t = s.random({5, 8});
  Tensor e_i = s.random({5, 8});
  Tensor m_t = s.random({5, 4});
  Tensor m_i = s.random({5, 4});
  {
    std::vector<Tensor> in = s.params([&] { ParameterList l; gate.collect(l, "g"); return l; }());
    for (const Tensor& t : {e_t, e_i, m_t, m_i}) in.push_back(t);
    s.composite("interaction_gate", [=] { return gate.forward(e_t, e_i, m_t, m_i).dispatch; }, in);
  }

  Tensor o_d = s.random({6, 4}, -2.0, 2.0);
  const std::vector<std::size_t> y_int{0, 1, 2, 3, 3, 1};
  auto routed_of = [o_d] { return argmax_rows(o_d); };
  s.composite("router_z_loss", [=] { return router_z_loss(o_d); }, {o_d}, {}, false);
  for (BalanceMode mode : {BalanceMode::kStMoe, BalanceMode::kPaperLiteral}) {
    const std::string n = mode == BalanceMode::kStMoe ? "balance_loss_st_moe"
                                                      : "balance_loss_paper_literal";
    s.composite(n, [=] { return balance_loss(softmax(o_d, -1), routed_of(), mode); }, {o_d},
                routed_of, false);
  }
  s.composite("interaction_loss",
              [=] {
                return interaction_loss(o_d, softmax(o_d, -1), y_int, routed_of(), {}).total;
              },
              {o_d}, routed_of, false);

  // Full model at d = 8 on a random batch, every parameter entry.
  const ModelConfig mc = tiny_model();
  auto model = std::make_shared<MimoeModel>(mc);
  auto batch = std::make_shared<Batch>();
  const std::size_t B = 4;
  batch->text = s.random({B, mc.text_tokens, mc.text_dim});
  batch->image = s.random({B, mc.image_tokens, mc.image_dim});
  batch->clip_text = s.random({B, mc.clip_raw_dim});
  batch->clip_image = s.random({B, mc.clip_raw_dim});
  batch->labels = {0, 1, 1, 0};
  batch->truth = {-1, -1, -1, -1};
  const LossConfig loss;
  std::vector<Tensor> in = s.params(model->parameters());
  s.composite("full_model",
              [=] { return model->forward_loss(*batch, loss).total; }, in,
              [=] {
                ForwardOutput out = model->forward_loss(*batch, loss);
                std::vector<std::size_t> d = out.routed;
                d.insert(d.end(), out.targets.begin(), out.targets.end());
                return d;
              },
              false);
}

}  // namespace

std::vector<GradCheckResult> gradient_suite(const GradientSuiteOptions& options) {
  SuiteBuilder s(options);
  primitive_checks(s);
  composite_checks(s);
  return std::move(s.results());
}

}  // namespace mimoe
