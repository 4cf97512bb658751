#pragma once

#include <span>
#include <string>
#include <vector>

#include "infocnf/rng.hpp"
#include "infocnf/tape.hpp"

namespace infocnf {

enum class Activation { softplus, tanh, identity };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

/// Fully connected network. Hidden layers apply the activation, the output
/// layer is affine.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& store, const std::string& prefix, std::vector<std::size_t> widths, Activation act);

  /// Glorot-normal weights, zero biases.
  void init_random(ParamStore& store, Rng& rng, double gain = 1.0) const;
  /// Zero the output layer so the network starts as the zero map.
  void zero_output(ParamStore& store) const;

  Var forward(Tape& tape, const Var& x) const;

  struct TangentResult {
    Var out;
    std::vector<Var> tangents;
  };
  /// Forward pass together with the directional derivatives (d out / d x) v
  /// for each v in `tangents`, recorded as ordinary primitives.
  TangentResult forward_with_tangents(Tape& tape, const Var& x, std::span<const Var> tangents) const;

  std::size_t in_width() const { return widths_.front(); }
  std::size_t out_width() const { return widths_.back(); }
  const std::vector<std::size_t>& widths() const { return widths_; }
  Activation activation() const { return act_; }
  std::size_t layer_count() const { return weights_.size(); }
  ParamId weight(std::size_t layer) const { return weights_.at(layer); }
  ParamId bias(std::size_t layer) const { return biases_.at(layer); }
  std::size_t parameter_count() const;

 private:
  std::vector<std::size_t> widths_;
  std::vector<ParamId> weights_;
  std::vector<ParamId> biases_;
  Activation act_ = Activation::softplus;
};

/// Jacobian-vector product of a time-dependent network f(z, t), where the
/// network input is [z, t]. The result is on the tape and differentiable.
Var jvp(Tape& tape, const Mlp& f, const Var& z, double t, const Var& v);

/// Vector-Jacobian product u^T (df/dz), computed by a reverse sweep on a
/// private tape. Used as the independent route in duality checks.
Tensor vjp(const ParamStore& store, const Mlp& f, const Tensor& z, double t, const Tensor& u);

/// [z, t] with t as a constant column.
Var with_time_column(Tape& tape, const Var& z, double t);

}  // namespace infocnf
