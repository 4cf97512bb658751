#pragma once

#include <optional>
#include <span>
#include <vector>

#include "infocnf/flow.hpp"
#include "infocnf/tolgate.hpp"

namespace infocnf {

/// z = [z_y, z_u] with z_y the first d_y coordinates.
struct LatentPartition {
  std::size_t d_total = 0;
  std::size_t d_y = 0;

  std::size_t d_u() const { return d_total - d_y; }
  bool is_full() const { return d_y == d_total; }
  /// 0 < d_y <= d_total; d_y == d_total is the CCNF (unpartitioned) case.
  void validate() const;
};

/// Single affine layer x W + b.
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out);
  Var apply(Tape& tape, const Var& x) const;
  std::size_t in_width() const { return in_; }
  std::size_t out_width() const { return out_; }
  std::size_t parameter_count() const { return in_ * out_ + out_; }
  ParamId weight() const { return w_; }
  ParamId bias() const { return b_; }

 private:
  ParamId w_, b_;
  std::size_t in_ = 0, out_ = 0;
};

/// q_phi: one-hot label -> (mu, log sigma) for z_y. Zero-initialized, so every
/// class starts at the standard normal.
class ConditionalPrior {
 public:
  ConditionalPrior() = default;
  ConditionalPrior(ParamStore& store, std::size_t num_classes, std::size_t d_y);

  struct Params {
    Var mu;
    Var log_sigma;
  };
  Params params(Tape& tape, const Tensor& one_hot) const;

  std::size_t num_classes() const { return map_.in_width(); }
  std::size_t d_y() const { return map_.out_width() / 2; }
  std::size_t parameter_count() const { return map_.parameter_count(); }
  const Linear& map() const { return map_; }

 private:
  Linear map_;
};

/// q_theta: linear classifier on z_y with inverted dropout at training time.
class Classifier {
 public:
  Classifier() = default;
  Classifier(ParamStore& store, std::size_t in, std::size_t num_classes, double dropout = 0.5);

  Var logits(Tape& tape, const Var& z_y, bool training, Rng* rng) const;

  double dropout() const { return dropout_; }
  std::size_t parameter_count() const { return map_.parameter_count(); }
  const Linear& map() const { return map_; }

 private:
  Linear map_;
  double dropout_ = 0.5;
};

Tensor one_hot(std::span<const int> labels, std::size_t num_classes);

/// Diagonal Gaussian log density per row; [B, 1].
Var diagonal_gaussian_log_density(const Var& z, const Var& mu, const Var& log_sigma);

/// Sum of per-block diagonal Gaussian log densities over disjoint column
/// blocks of z, one block per label factor.
Var factored_log_prior(const Var& z_y, std::span<const std::size_t> block_widths, std::span<const Var> mus,
                       std::span<const Var> log_sigmas);

/// log N(z_y; mu(y), sigma(y)^2) + log N(z_u; 0, I) per row; [B, 1].
Var conditional_log_prior(Tape& tape, const Var& z, std::span<const int> labels, const LatentPartition& partition,
                          const ConditionalPrior& prior);

/// Per-row softmax cross-entropy against one-hot targets; [B, 1].
Var cross_entropy(const Var& logits, const Tensor& targets);

struct CnfSpec {
  std::size_t dim = 2;
  std::size_t num_layers = 2;
  std::vector<std::size_t> hidden{32, 32};
  Activation activation = Activation::softplus;
  std::size_t num_classes = 0;  // 0: unconditional density model
  std::size_t d_y = 0;          // supervised width; == dim for CCNF
  double dropout = 0.5;
  bool gated = false;
  GateConfig gate;
  double init_gain = 1.0;
};

/// A flow stack with its prior, optional label conditioning and optional
/// tolerance gates. All parameters live in `params`.
struct CnfModel {
  CnfSpec spec;
  ParamStore params;
  FlowStack flow;
  LatentPartition partition;
  ConditionalPrior prior;
  Classifier classifier;
  std::optional<GatePolicy> gate;

  bool conditional() const { return spec.num_classes > 0; }
  std::size_t num_classes() const { return spec.num_classes; }
  /// Parameters of q_phi and q_theta.
  std::size_t conditioning_parameter_count() const;
};

CnfModel build_cnf_model(const CnfSpec& spec, Rng& rng);
/// Architecture only, all parameters zero (checkpoint loading fills them).
CnfModel build_cnf_skeleton(const CnfSpec& spec);

struct LossOptions {
  double beta = 1.0;
  bool training = false;
  FlowOptions flow;
  Rng* dropout_rng = nullptr;
};

struct CnfLoss {
  Var objective;  // J = nll + beta * xent
  Var nll;        // mean -log p(x | y)
  Var xent;       // mean cross-entropy (zero scalar when unconditional)
  Var log_px;     // per-row log p(x | y), [B, 1]
  Var logits;     // [B, L] when conditional
  DensityResult density;
};

/// InfoCNF objective: flow NLL with the partitioned conditional prior plus
/// beta-weighted cross-entropy of the classifier on z_y. With an
/// unconditional model this is the plain CNF NLL.
CnfLoss infocnf_loss(Tape& tape, const CnfModel& model, const Tensor& x, std::span<const int> labels,
                     const LossOptions& opts);

/// CCNF baseline: the same objective with the full code conditioned and classified.
CnfLoss ccnf_loss(Tape& tape, const CnfModel& model, const Tensor& x, std::span<const int> labels,
                  const LossOptions& opts);

/// -log sum_y p(x | y) p(y), per row; [B, 1]. Empty class_prior means uniform.
Var marginal_nll(Tape& tape, const CnfModel& model, const Tensor& x, std::span<const double> class_prior,
                 const FlowOptions& flow);

/// z_y ~ N(mu(y), sigma(y)^2), z_u ~ N(0, I), x = flow^{-1}(z).
Tensor conditional_sample(const CnfModel& model, int label, std::size_t n, Rng& rng, const SolverConfig& solver);

/// Predicted labels from eval-mode logits.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace infocnf
