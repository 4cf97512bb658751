#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "infocnf/adam.hpp"
#include "infocnf/condition.hpp"
#include "infocnf/config.hpp"
#include "infocnf/latentode.hpp"
#include "infocnf/metrics.hpp"
#include "infocnf/synthdata.hpp"

namespace infocnf {

/// Train or test split of the configured flow dataset.
Dataset make_dataset(const DataConfig& data, bool test);
SpiralCorpus make_spiral_corpus(const DataConfig& data, bool test);

/// Model architecture for a flow task on data of the given width and class count.
CnfSpec cnf_spec_for(const TrainConfig& cfg, std::size_t dim, std::size_t num_classes);

enum class EvalMode { fixed, learned };

struct EvalOptions {
  EvalMode mode = EvalMode::fixed;
  double tolerance = 1e-5;
  std::size_t batch_size = 256;
  TraceMode trace = TraceMode::exact;
  SolverMethod method = SolverMethod::dopri5;
  long max_steps = 10000;
  std::uint64_t probe_seed = 0;  // hutchinson evaluation only
};

EvalOptions eval_options(const TrainConfig& cfg);

struct EvalMetrics {
  double nll = 0.0;           // mean -log p(x | y), or -log p(x) without labels
  double marginal_nll = 0.0;  // mean -log sum_y p(x | y) p(y) with uniform p(y)
  double err = 0.0;           // classification error; NaN for unconditional models
  double mean_nfe = 0.0;      // mean NFE per solve
  long solves = 0;
  std::size_t n = 0;
  std::vector<double> mean_tolerance;  // per layer, averaged over batches
};

/// Deterministic in fixed mode. Learned mode takes each layer's tolerance
/// from the gate mean on every evaluation batch.
EvalMetrics evaluate(const CnfModel& model, const Dataset& data, const EvalOptions& opts);

/// Sum of exp(log p(x_i)) * step over x_i = lo + (i + 1/2) step on [lo, hi]; 1D models only.
double riemann_normalization(const CnfModel& model, double lo, double hi, double step, const SolverConfig& solver,
                             std::size_t batch_size = 512);

/// Per-point log p(x) of a 1D or 2D unconditional model (or log p(x | y) with labels).
std::vector<double> log_density(const CnfModel& model, const Tensor& x, const SolverConfig& solver,
                                std::span<const int> labels = {}, std::size_t batch_size = 512);

/// Called after every epoch; returning false stops training.
using EpochHook = std::function<bool(const EpochMetrics&)>;

struct CnfRun {
  TrainConfig config;
  CnfModel model;
  Dataset train;
  Dataset test;
  std::vector<EpochMetrics> metrics;
  std::vector<GateLogRow> gates;
  double alpha = 0.0;  // REINFORCE weight actually used
};

/// density, infocnf and ccnf tasks.
CnfRun train_cnf(const TrainConfig& cfg, const EpochHook& hook = {});

struct LatentEval {
  double loss = 0.0;  // negative ELBO at the posterior mean
  double mse = 0.0;   // extrapolation MSE over the horizon, prefix-only conditioning
  double label_mse = 0.0;  // same with z_y taken from the true labels (equals mse for the baseline)
  double mean_nfe = 0.0;
  long solves = 0;
};

LatentEval evaluate_latentode(const LatentOdeModel& model, const SpiralCorpus& corpus, std::size_t horizon,
                              const SolverConfig& solver, std::size_t batch_size);

struct LatentRun {
  TrainConfig config;
  LatentOdeModel model;
  SpiralCorpus train;
  SpiralCorpus test;
  std::vector<EpochMetrics> metrics;
  LatentEval final_eval;
};

LatentRun train_latentode(const TrainConfig& cfg, const EpochHook& hook = {});

}  // namespace infocnf
