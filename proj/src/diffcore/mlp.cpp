#include "infocnf/mlp.hpp"

#include <cmath>

#include <fmt/format.h>

#include "infocnf/errors.hpp"

namespace infocnf {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::softplus: return "softplus";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "softplus") return Activation::softplus;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + name + "'");
}

Mlp::Mlp(ParamStore& store, const std::string& prefix, std::vector<std::size_t> widths, Activation act)
    : widths_(std::move(widths)), act_(act) {
  if (widths_.size() < 2) throw UsageError("Mlp needs at least input and output widths");
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    weights_.push_back(store.add(fmt::format("{}.w{}", prefix, l), {widths_[l], widths_[l + 1]}));
    biases_.push_back(store.add(fmt::format("{}.b{}", prefix, l), {1, widths_[l + 1]}));
  }
}

void Mlp::init_random(ParamStore& store, Rng& rng, double gain) const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double fan_in = static_cast<double>(widths_[l]);
    const double fan_out = static_cast<double>(widths_[l + 1]);
    const double stddev = gain * std::sqrt(2.0 / (fan_in + fan_out));
    for (auto& w : store.values(weights_[l])) w = rng.normal(0.0, stddev);
    for (auto& b : store.values(biases_[l])) b = 0.0;
  }
}

void Mlp::zero_output(ParamStore& store) const {
  for (auto& w : store.values(weights_.back())) w = 0.0;
  for (auto& b : store.values(biases_.back())) b = 0.0;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) n += widths_[l] * widths_[l + 1] + widths_[l + 1];
  return n;
}

namespace {

Var activate(Activation act, const Var& a) {
  switch (act) {
    case Activation::softplus: return softplus(a);
    case Activation::tanh: return tanh(a);
    case Activation::identity: return a;
  }
  return a;
}

}  // namespace

Var Mlp::forward(Tape& tape, const Var& x) const {
  if (x.cols() != in_width()) {
    throw ShapeError(fmt::format("Mlp input width {} does not match {}", shape_string(x.shape()), in_width()));
  }
  Var h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = add_bias(matmul(h, tape.param(weights_[l])), tape.param(biases_[l]));
    if (l + 1 < weights_.size()) h = activate(act_, h);
  }
  return h;
}

Mlp::TangentResult Mlp::forward_with_tangents(Tape& tape, const Var& x, std::span<const Var> tangents) const {
  if (x.cols() != in_width()) {
    throw ShapeError(fmt::format("Mlp input width {} does not match {}", shape_string(x.shape()), in_width()));
  }
  for (const auto& v : tangents) {
    if (v.shape() != x.shape()) {
      throw ShapeError(fmt::format("tangent shape {} does not match input {}", shape_string(v.shape()),
                                   shape_string(x.shape())));
    }
  }
  TangentResult res;
  res.tangents.assign(tangents.begin(), tangents.end());
  Var h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Var w = tape.param(weights_[l]);
    const Var pre = add_bias(matmul(h, w), tape.param(biases_[l]));
    for (auto& t : res.tangents) t = matmul(t, w);
    if (l + 1 == weights_.size()) {
      h = pre;
      break;
    }
    switch (act_) {
      case Activation::softplus: {
        h = softplus(pre);
        const Var slope = sigmoid(pre);
        for (auto& t : res.tangents) t = mul(slope, t);
        break;
      }
      case Activation::tanh: {
        h = tanh(pre);
        const Var slope = add_scalar(scale(square(h), -1.0), 1.0);
        for (auto& t : res.tangents) t = mul(slope, t);
        break;
      }
      case Activation::identity:
        h = pre;
        break;
    }
  }
  res.out = h;
  return res;
}

Var with_time_column(Tape& tape, const Var& z, double t) {
  const Var tcol = tape.constant(Tensor::filled(z.rows(), 1, t));
  return concat_cols(z, tcol);
}

Var jvp(Tape& tape, const Mlp& f, const Var& z, double t, const Var& v) {
  if (v.shape() != z.shape()) {
    throw UsageError(fmt::format("jvp: tangent shape {} does not match state {}", shape_string(v.shape()),
                                 shape_string(z.shape())));
  }
  const Var input = with_time_column(tape, z, t);
  const Var tangent = concat_cols(v, tape.constant(Tensor::zeros(z.rows(), 1)));
  const Var tangents[1] = {tangent};
  return f.forward_with_tangents(tape, input, tangents).tangents[0];
}

Tensor vjp(const ParamStore& store, const Mlp& f, const Tensor& z, double t, const Tensor& u) {
  Tape tape(&store);
  const Var zv = tape.variable(z);
  const Var out = f.forward(tape, with_time_column(tape, zv, t));
  if (out.shape() != u.shape()) {
    throw UsageError(fmt::format("vjp: cotangent shape {} does not match output {}", shape_string(u.shape()),
                                 shape_string(out.shape())));
  }
  const Var root = sum(mul(out, tape.constant(u)));
  tape.backward(root);
  return tape.grad(zv);
}

}  // namespace infocnf
