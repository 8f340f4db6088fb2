#pragma once

// Finite-difference cases for every differentiable primitive, shared by the
// unit tests and the acceptance run.

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "emd/nn/gradcheck.hpp"
#include "emd/nn/ops.hpp"

namespace emd::nn::cases {

using V = Var<double>;

enum class Domain { any, positive, away_from_zero };

struct Input {
  Shape shape;
  Domain domain = Domain::any;
};

struct PrimitiveCase {
  std::string name;
  std::vector<Input> inputs;
  std::function<V(Tape<double>&, const std::vector<V>&)> fn;
  std::size_t max_coords = 0;
};

inline std::vector<std::unique_ptr<Parameter<double>>> make_inputs(const std::vector<Input>& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::unique_ptr<Parameter<double>>> out;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    auto p = std::make_unique<Parameter<double>>("in" + std::to_string(i), spec[i].shape);
    for (double& v : p->value) {
      v = u(rng);
      if (spec[i].domain == Domain::positive) v = 0.2 + std::abs(v);
      if (spec[i].domain == Domain::away_from_zero) v = (v < 0 ? -0.1 : 0.1) + v;
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline GradCheckResult check_case(const PrimitiveCase& c, std::uint64_t seed) {
  auto inputs = make_inputs(c.inputs, seed * 7919 + 1);
  std::vector<Parameter<double>*> wrt;
  for (auto& p : inputs) wrt.push_back(p.get());
  const LossBuilder loss = [&](Tape<double>& tape) {
    std::vector<V> vars;
    for (auto* p : wrt) vars.push_back(tape.param(*p));
    return random_projection(c.fn(tape, vars), seed + 101);
  };
  return grad_check(loss, wrt, 1e-5, c.max_coords, seed);
}

inline std::vector<PrimitiveCase> primitive_cases() {
  using D = Domain;
  const Shape m{4, 5};
  std::vector<PrimitiveCase> cases = {
      {"add", {{m}, {m}}, [](auto&, auto& v) { return add(v[0], v[1]); }},
      {"sub", {{m}, {m}}, [](auto&, auto& v) { return sub(v[0], v[1]); }},
      {"mul", {{m}, {m}}, [](auto&, auto& v) { return mul(v[0], v[1]); }},
      {"scale", {{m}}, [](auto&, auto& v) { return scale(v[0], -1.7); }},
      {"add_scalar", {{m}}, [](auto&, auto& v) { return add_scalar(v[0], 0.3); }},
      {"neg", {{m}}, [](auto&, auto& v) { return neg(v[0]); }},
      {"square", {{m}}, [](auto&, auto& v) { return square(v[0]); }},
      {"sqrt", {{m, D::positive}}, [](auto&, auto& v) { return sqrt(v[0]); }},
      {"abs", {{m, D::away_from_zero}}, [](auto&, auto& v) { return abs(v[0]); }},
      {"exp", {{m}}, [](auto&, auto& v) { return exp(v[0]); }},
      {"log", {{m, D::positive}}, [](auto&, auto& v) { return log(v[0]); }},
      {"cos", {{m}}, [](auto&, auto& v) { return cos(v[0]); }},
      {"sin", {{m}}, [](auto&, auto& v) { return sin(v[0]); }},
      {"tanh", {{m}}, [](auto&, auto& v) { return tanh(v[0]); }},
      {"sigmoid", {{m}}, [](auto&, auto& v) { return sigmoid(v[0]); }},
      {"relu", {{m, D::away_from_zero}}, [](auto&, auto& v) { return relu(v[0]); }},
      {"leaky_relu", {{m, D::away_from_zero}}, [](auto&, auto& v) { return leaky_relu(v[0], 0.1); }},
      {"gelu", {{m}}, [](auto&, auto& v) { return gelu(v[0]); }},
      {"clamp_min", {{m, D::away_from_zero}}, [](auto&, auto& v) { return clamp_min(v[0], 0.0); }},
      {"clamp_max", {{m, D::away_from_zero}}, [](auto&, auto& v) { return clamp_max(v[0], 0.0); }},
      {"add_row", {{m}, {{5}}}, [](auto&, auto& v) { return add_row(v[0], v[1]); }},
      {"mul_row", {{m}, {{5}}}, [](auto&, auto& v) { return mul_row(v[0], v[1]); }},
      {"sum", {{m}}, [](auto&, auto& v) { return sum(v[0]); }},
      {"mean", {{m}}, [](auto&, auto& v) { return mean(v[0]); }},
      {"mse", {{m}, {m}}, [](auto&, auto& v) { return mse(v[0], v[1]); }},
      {"l1", {{m}, {m}}, [](auto&, auto& v) { return l1(v[0], v[1]); }},
      {"matmul", {{{3, 4}}, {{4, 6}}}, [](auto&, auto& v) { return matmul(v[0], v[1]); }},
      {"linear", {{{3, 4}}, {{4, 6}}, {{6}}}, [](auto&, auto& v) { return linear(v[0], v[1], v[2]); }},
      {"layer_norm", {{{3, 8}}, {{8}}, {{8}}}, [](auto&, auto& v) { return layer_norm(v[0], v[1], v[2]); }},
      {"softmax_rows", {{m}}, [](auto&, auto& v) { return softmax_rows(v[0]); }},
      {"attention_1head", {{{3, 4}}, {{3, 4}}, {{3, 4}}},
       [](auto&, auto& v) { return attention(v[0], v[1], v[2], 1); }},
      {"attention_2head", {{{5, 8}}, {{5, 8}}, {{5, 8}}},
       [](auto&, auto& v) { return attention(v[0], v[1], v[2], 2); }},
      {"lstm", {{{6, 3}}, {{3, 16}}, {{4, 16}}, {{16}}, {{16}}},
       [](auto&, auto& v) { return lstm(v[0], v[1], v[2], v[3], v[4], false); }},
      {"lstm_reverse", {{{6, 3}}, {{3, 16}}, {{4, 16}}, {{16}}, {{16}}},
       [](auto&, auto& v) { return lstm(v[0], v[1], v[2], v[3], v[4], true); }},
      {"conv1d", {{{11, 3}}, {{5, 3, 4}}, {{4}}}, [](auto&, auto& v) { return conv1d(v[0], v[1], v[2], 2, 2); }},
      {"depthwise_conv1d_k7", {{{12, 3}}, {{7, 3}}, {{3}}},
       [](auto&, auto& v) { return depthwise_conv1d(v[0], v[1], v[2], 3); }},
      {"conv2d", {{{2, 7, 6}}, {{3, 2, 3, 2}}, {{3}}},
       [](auto&, auto& v) { return conv2d(v[0], v[1], v[2], Conv2dGeometry{2, 1, 1, 1}); }},
      {"upsample_nearest", {{{3, 4}}}, [](auto&, auto& v) { return upsample_nearest(v[0], 8); }},
      {"reshape", {{m}}, [](auto&, auto& v) { return reshape(v[0], Shape{2, 10}); }},
      {"transpose", {{m}}, [](auto&, auto& v) { return transpose(v[0]); }},
      {"slice_cols", {{m}}, [](auto&, auto& v) { return slice_cols(v[0], 1, 4); }},
      {"slice_rows", {{m}}, [](auto&, auto& v) { return slice_rows(v[0], 1, 3); }},
      {"concat_cols", {{m}, {{4, 2}}}, [](auto&, auto& v) { return concat_cols(v[0], v[1]); }},
      {"reflect_pad", {{{9}}}, [](auto&, auto& v) { return reflect_pad(v[0], 3, 4); }},
      {"stft", {{{64}}}, [](auto&, auto& v) { return stft(v[0], 16, 4, true); }},
      {"istft", {{{9, 18}}}, [](auto&, auto& v) { return istft(v[0], 16, 4, 32, true); }},
  };
  return cases;
}

}  // namespace emd::nn::cases
