#pragma once

#include <functional>
#include <vector>

#include "infocnf/mlp.hpp"
#include "infocnf/odesolve.hpp"

namespace infocnf {

enum class TraceMode { exact, hutchinson };

const char* trace_mode_name(TraceMode m);
TraceMode parse_trace_mode(const std::string& name);

/// Largest state width for which the exact trace is allowed.
inline constexpr std::size_t kMaxExactTraceDim = 16;

struct FlowLayer {
  Mlp dynamics;  // [z, t] (width d + 1) -> dz/dt (width d)
  std::size_t index = 0;
};

/// K continuous flows sharing one state width. Data is x = z_0, the latent
/// code is z = z_K; each layer integrates t from 0 to 1.
class FlowStack {
 public:
  FlowStack() = default;
  FlowStack(ParamStore& store, std::size_t dim, std::size_t num_layers, const std::vector<std::size_t>& hidden,
            Activation act = Activation::softplus, const std::string& prefix = "flow");

  void init_random(ParamStore& store, Rng& rng, double gain = 1.0) const;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return layers_.size(); }
  const std::vector<FlowLayer>& layers() const { return layers_; }
  const FlowLayer& layer(std::size_t k) const { return layers_.at(k); }
  std::size_t parameter_count() const;

 private:
  std::size_t dim_ = 0;
  std::vector<FlowLayer> layers_;
};

/// Per-item Jacobian trace, sum_j e_j . (J e_j); [B, 1].
Var trace_exact(Tape& tape, const Mlp& f, const Var& z, double t);
/// Per-item Hutchinson estimate eps . (J eps); [B, 1].
Var trace_hutchinson(Tape& tape, const Mlp& f, const Var& z, double t, const Var& eps);

/// Rademacher probe matrix of the given shape.
Tensor rademacher_probe(std::size_t rows, std::size_t cols, Rng& rng);

/// Picks the solver for layer k given the layer input values (gates hook in here).
using LayerSolverChooser = std::function<SolverConfig(std::size_t layer, const Tensor& layer_input)>;

struct FlowOptions {
  SolverConfig solver;
  LayerSolverChooser choose_solver;  // overrides `solver` when set
  TraceMode trace = TraceMode::exact;
  Rng* probe_rng = nullptr;  // required for hutchinson mode
};

struct LayerResult {
  Var z;
  Var delta_logp;  // -integral of the trace, [B, 1]
  SolveStats stats;
};

/// One layer's augmented solve of [dz/dt = f(z, t), d(delta)/dt = -Tr(df/dz)] over [0, 1].
LayerResult forward_layer(Tape& tape, const FlowLayer& layer, const Var& z_in, const SolverConfig& solver,
                          TraceMode trace, Rng* probe_rng);

struct DensityResult {
  Var z;
  Var delta_logp;  // summed over layers, [B, 1]
  std::vector<SolveStats> stats;
  std::vector<double> layer_tolerances;
};

/// Data to latent. log p(x) = log p_prior(z) - delta_logp.
DensityResult forward_density(Tape& tape, const FlowStack& stack, const Var& x, const FlowOptions& opts);

/// log N(z; 0, I) per row; [B, 1].
Var standard_normal_log_density(const Var& z);

/// Latent to data: layers K..1, each integrated from t = 1 back to t = 0.
Tensor sample_flow(const ParamStore& store, const FlowStack& stack, const Tensor& z, const SolverConfig& solver,
                   SolveStats* stats = nullptr);

}  // namespace infocnf
