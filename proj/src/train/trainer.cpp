#include "infocnf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "infocnf/errors.hpp"

namespace infocnf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool conditional_task(Task t) { return t == Task::infocnf || t == Task::ccnf; }

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
}

std::vector<std::size_t> range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> out(end - begin);
  std::iota(out.begin(), out.end(), begin);
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Dataset make_dataset(const DataConfig& data, bool test) {
  const std::size_t n = test ? data.n_test : data.n_train;
  const std::uint64_t seed = test ? data.test_seed : data.seed;
  if (data.dataset == "mix1d") return gen_1d_mixture(data.mixture, n, seed);
  if (data.dataset == "labeled2d") {
    Labeled2dSpec spec = data.labeled;
    spec.samples_per_class = n;
    return gen_2d_labeled(spec, seed);
  }
  throw ConfigError(fmt::format("dataset '{}' is not a point dataset", data.dataset));
}

SpiralCorpus make_spiral_corpus(const DataConfig& data, bool test) {
  SpiralSpec spec = data.spirals;
  spec.n_curves = test ? data.n_test : data.n_train;
  spec.reserve = data.horizon;
  return gen_spiral_corpus(spec, test ? data.test_seed : data.seed);
}

CnfSpec cnf_spec_for(const TrainConfig& cfg, std::size_t dim, std::size_t num_classes) {
  CnfSpec s;
  s.dim = dim;
  s.num_layers = cfg.model.num_layers;
  s.hidden = cfg.model.hidden;
  s.activation = cfg.model.activation;
  s.dropout = cfg.model.dropout;
  s.init_gain = cfg.model.init_gain;
  s.gated = cfg.tolerance_mode == ToleranceMode::gated;
  s.gate = cfg.gate;
  if (conditional_task(cfg.task)) {
    s.num_classes = num_classes;
    s.d_y = cfg.task == Task::ccnf ? dim : (cfg.model.d_y ? cfg.model.d_y : std::max<std::size_t>(1, dim / 2));
  }
  return s;
}

EvalOptions eval_options(const TrainConfig& cfg) {
  EvalOptions o;
  o.tolerance = cfg.eval_tolerance;
  o.batch_size = cfg.eval_batch_size;
  o.trace = cfg.trace;
  o.method = cfg.method;
  o.max_steps = cfg.max_steps;
  o.probe_seed = Rng(cfg.seed).split("eval-probe").stream();
  return o;
}

EvalMetrics evaluate(const CnfModel& model, const Dataset& data, const EvalOptions& opts) {
  if (data.size() == 0) throw UsageError("evaluate: empty dataset");
  if (opts.mode == EvalMode::learned && !model.gate) throw UsageError("learned-tolerance evaluation needs a gated model");
  const bool cond = model.conditional();
  if (cond && data.labels.size() != data.size()) throw UsageError("evaluate: conditional model needs labels");
  const std::size_t K = model.flow.size();

  SolverConfig base = SolverConfig::with_tolerance(opts.tolerance);
  base.method = opts.method;
  base.max_steps = opts.max_steps;
  Rng probe(opts.probe_seed, 1);

  EvalMetrics m;
  m.n = data.size();
  m.mean_tolerance.assign(K, 0.0);
  double nll_sum = 0.0, marg_sum = 0.0;
  long wrong = 0, nfe = 0;
  std::size_t batches = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += opts.batch_size) {
    const auto rows = range(begin, std::min(data.size(), begin + opts.batch_size));
    const Dataset batch = data.subset(rows);
    Tape tape(&model.params);
    FlowOptions fo;
    fo.trace = opts.trace;
    fo.probe_rng = &probe;
    fo.solver = base;
    if (opts.mode == EvalMode::learned) {
      fo.choose_solver = [&](std::size_t layer, const Tensor& input) {
        const GateDraw d = model.gate->mean(tape, layer, gate_feature_summary(input));
        SolverConfig s = base;
        s.rtol = s.atol = d.tolerance;
        return s;
      };
    }
    const DensityResult dens = forward_density(tape, model.flow, tape.constant(batch.x), fo);
    for (std::size_t k = 0; k < K; ++k) {
      nfe += dens.stats[k].nfe;
      m.mean_tolerance[k] += dens.layer_tolerances[k];
    }
    ++batches;

    if (!cond) {
      const Var lp = sub(standard_normal_log_density(dens.z), dens.delta_logp);
      for (double v : lp.value().data()) nll_sum -= v;
      continue;
    }
    const Var lp = sub(conditional_log_prior(tape, dens.z, batch.labels, model.partition, model.prior), dens.delta_logp);
    for (double v : lp.value().data()) nll_sum -= v;

    std::vector<Var> per_class;
    std::vector<int> fill(batch.size());
    const double log_py = -std::log(static_cast<double>(model.num_classes()));
    for (std::size_t y = 0; y < model.num_classes(); ++y) {
      std::fill(fill.begin(), fill.end(), static_cast<int>(y));
      const Var lpy = conditional_log_prior(tape, dens.z, fill, model.partition, model.prior);
      per_class.push_back(add_scalar(sub(lpy, dens.delta_logp), log_py));
    }
    for (double v : logsumexp_rows(concat_cols(per_class)).value().data()) marg_sum -= v;

    const Var logits = model.classifier.logits(tape, slice_cols(dens.z, 0, model.partition.d_y), false, nullptr);
    const auto pred = argmax_rows(logits.value());
    for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != batch.labels[i];
  }
  const double n = static_cast<double>(data.size());
  m.nll = nll_sum / n;
  m.marginal_nll = cond ? marg_sum / n : m.nll;
  m.err = cond ? static_cast<double>(wrong) / n : kNaN;
  m.solves = static_cast<long>(batches * K);
  m.mean_nfe = static_cast<double>(nfe) / static_cast<double>(m.solves);
  for (auto& t : m.mean_tolerance) t /= static_cast<double>(batches);
  return m;
}

std::vector<double> log_density(const CnfModel& model, const Tensor& x, const SolverConfig& solver,
                                std::span<const int> labels, std::size_t batch_size) {
  const bool cond = model.conditional() && !labels.empty();
  if (cond && labels.size() != x.rows()) throw UsageError("log_density: one label per point is required");
  std::vector<double> out;
  out.reserve(x.rows());
  for (std::size_t begin = 0; begin < x.rows(); begin += batch_size) {
    const std::size_t end = std::min(x.rows(), begin + batch_size);
    Tape tape(&model.params);
    FlowOptions fo;
    fo.solver = solver;
    const DensityResult dens = forward_density(tape, model.flow, tape.constant(x.slice_rows(begin, end)), fo);
    Var prior;
    if (cond) {
      prior = conditional_log_prior(tape, dens.z, labels.subspan(begin, end - begin), model.partition, model.prior);
    } else if (model.conditional()) {
      throw UsageError("log_density: conditional model needs labels");
    } else {
      prior = standard_normal_log_density(dens.z);
    }
    const Var lp = sub(prior, dens.delta_logp);
    out.insert(out.end(), lp.value().data().begin(), lp.value().data().end());
  }
  return out;
}

double riemann_normalization(const CnfModel& model, double lo, double hi, double step, const SolverConfig& solver,
                             std::size_t batch_size) {
  if (model.spec.dim != 1) throw UsageError("riemann_normalization needs a 1D model");
  if (!(hi > lo) || !(step > 0.0)) throw UsageError("riemann_normalization: need lo < hi and step > 0");
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
  Tensor grid = Tensor::zeros(n, 1);
  for (std::size_t i = 0; i < n; ++i) grid[i] = lo + (static_cast<double>(i) + 0.5) * step;
  const auto lp = log_density(model, grid, solver, {}, batch_size);
  double area = 0.0;
  for (double v : lp) area += std::exp(v) * step;
  return area;
}

CnfRun train_cnf(const TrainConfig& cfg, const EpochHook& hook) {
  cfg.validate();
  if (cfg.task == Task::latentode) throw ConfigError("train_cnf does not handle the latentode task");
  CnfRun run;
  run.config = cfg;
  run.train = make_dataset(cfg.data, false);
  run.test = make_dataset(cfg.data, true);
  const bool cond = conditional_task(cfg.task);
  if (cond && run.train.num_classes < 2) throw ConfigError("conditional tasks need a labeled dataset");

  Rng root(cfg.seed);
  Rng init_rng = root.split("init");
  run.model = build_cnf_model(cnf_spec_for(cfg, run.train.dim(), run.train.num_classes), init_rng);
  CnfModel& model = run.model;
  Rng shuffle_rng = root.split("shuffle");
  Rng dropout_rng = root.split("dropout");
  Rng probe_rng = root.split("probe");
  Rng gate_rng = root.split("gate");

  const std::size_t K = model.flow.size();
  const bool gated = model.gate.has_value();
  Adam adam(model.params.size());
  const LrSchedule schedule(cfg.lr, cfg.lr_schedule);
  ReturnBaseline baseline(K, cfg.gate.baseline_decay, cfg.gate.baseline);
  std::optional<double> alpha = cfg.alpha;
  const EvalOptions eval = eval_options(cfg);
  const SolverConfig fixed_solver = cfg.solver(cfg.tolerance);

  std::vector<std::size_t> order = range(0, run.train.size());
  const std::size_t n_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
  long iteration = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochMetrics em;
    em.epoch = epoch;
    em.lr = schedule.at(epoch);
    shuffle(order, shuffle_rng);
    double nll_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < n_batches; ++b, ++iteration) {
      const std::span<const std::size_t> idx(order.data() + b * cfg.batch_size,
                                             std::min(cfg.batch_size, order.size() - b * cfg.batch_size));
      const Dataset batch = run.train.subset(idx);
      Tape tape(&model.params);
      std::vector<GateDraw> draws;
      LossOptions lo;
      lo.beta = cfg.beta;
      lo.training = true;
      lo.dropout_rng = &dropout_rng;
      lo.flow.trace = cfg.trace;
      lo.flow.probe_rng = &probe_rng;
      lo.flow.solver = fixed_solver;
      if (gated) {
        lo.flow.choose_solver = [&](std::size_t layer, const Tensor& input) {
          draws.push_back(model.gate->sample(tape, layer, gate_feature_summary(input), gate_rng));
          return cfg.solver(draws.back().tolerance);
        };
      }
      CnfLoss loss;
      try {
        const std::span<const int> labels = cond ? std::span<const int>(batch.labels) : std::span<const int>();
        loss = cfg.task == Task::ccnf ? ccnf_loss(tape, model, batch.x, labels, lo)
                                      : infocnf_loss(tape, model, batch.x, labels, lo);
      } catch (const DivergenceError&) {
        ++em.skipped_batches;
        continue;
      } catch (const NumericError&) {
        ++em.skipped_batches;
        continue;
      }

      std::vector<double> rewards(K);
      for (std::size_t k = 0; k < K; ++k) {
        em.total_nfe += loss.density.stats[k].nfe;
        rewards[k] = -static_cast<double>(loss.density.stats[k].nfe);
      }
      em.solves += static_cast<long>(K);
      nll_sum += loss.nll.value().item() * static_cast<double>(batch.size());
      seen += batch.size();

      Var root_var = loss.objective;
      if (gated) {
        const double L = loss.objective.value().item();
        if (!alpha) alpha = calibrate_alpha(L, rewards);
        const auto returns = compute_returns(L, rewards, *alpha);
        const auto b_values = baseline.values();
        root_var = reinforce_surrogate(loss.objective, draws, returns, b_values);
        baseline.update(returns);
        for (std::size_t k = 0; k < K; ++k) {
          run.gates.push_back(GateLogRow{epoch, iteration, k, draws[k].mu, draws[k].sigma, draws[k].tolerance,
                                         loss.density.stats[k].nfe});
        }
      }
      const auto grads = tape.backward(root_var);
      adam.step(model.params.flat(), grads, em.lr, &model.params);
    }
    if (static_cast<double>(em.skipped_batches) > cfg.max_skip_fraction * static_cast<double>(n_batches)) {
      throw TrainingError(fmt::format("epoch {}: {} of {} batches skipped after solver divergence (limit {:g}%)", epoch,
                                      em.skipped_batches, n_batches, 100.0 * cfg.max_skip_fraction));
    }
    em.train_nll = seen ? nll_sum / static_cast<double>(seen) : kNaN;
    em.mean_nfe = em.solves ? static_cast<double>(em.total_nfe) / static_cast<double>(em.solves) : kNaN;
    em.test_nll = em.test_err = kNaN;
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      const EvalMetrics m = evaluate(model, run.test, eval);
      em.test_nll = m.nll;
      em.test_err = m.err;
    }
    em.wall_seconds = seconds_since(t0);
    run.metrics.push_back(em);
    if (hook && !hook(em)) break;
  }
  run.alpha = alpha.value_or(0.0);
  return run;
}

LatentEval evaluate_latentode(const LatentOdeModel& model, const SpiralCorpus& corpus, std::size_t horizon,
                              const SolverConfig& solver, std::size_t batch_size) {
  const std::size_t n = corpus.curves.size();
  if (n == 0) throw UsageError("evaluate_latentode: empty corpus");
  LatentEval out;
  long nfe = 0;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const auto idx = range(begin, std::min(n, begin + batch_size));
    const SequenceBatch window = window_batch(corpus, idx);
    const double w = static_cast<double>(idx.size());
    {
      Tape tape(&model.params());
      const ElboResult e = elbo(tape, model, window, solver, nullptr);
      out.loss += e.loss.value().item() * w;
      nfe += e.stats.nfe;
    }
    const SequenceBatch future = future_batch(corpus, idx, horizon);
    const Extrapolation ex = extrapolate(model, window, future.times, solver, &future);
    out.mse += ex.mse * w;
    nfe += ex.stats.nfe;
    out.solves += 2;
    if (model.spec().partitioned) {
      const Extrapolation lx =
          extrapolate(model, window, future.times, solver, &future, ExtrapolationSource::labels);
      out.label_mse += lx.mse * w;
      nfe += lx.stats.nfe;
      ++out.solves;
    } else {
      out.label_mse += ex.mse * w;
    }
  }
  out.loss /= static_cast<double>(n);
  out.mse /= static_cast<double>(n);
  out.label_mse /= static_cast<double>(n);
  out.mean_nfe = static_cast<double>(nfe) / static_cast<double>(out.solves);
  return out;
}

LatentRun train_latentode(const TrainConfig& cfg, const EpochHook& hook) {
  cfg.validate();
  if (cfg.task != Task::latentode) throw ConfigError("train_latentode needs the latentode task");
  LatentRun run;
  run.config = cfg;
  run.train = make_spiral_corpus(cfg.data, false);
  run.test = make_spiral_corpus(cfg.data, true);

  Rng root(cfg.seed);
  Rng init_rng = root.split("init");
  run.model = LatentOdeModel(cfg.model.latent);
  run.model.init_random(init_rng);
  LatentOdeModel& model = run.model;
  Rng shuffle_rng = root.split("shuffle");
  Rng sample_rng = root.split("posterior");

  Adam adam(model.params().size());
  const LrSchedule schedule(cfg.lr, cfg.lr_schedule);
  const SolverConfig solver = cfg.solver(cfg.tolerance);
  const SolverConfig eval_solver = cfg.solver(cfg.eval_tolerance);

  std::vector<std::size_t> order = range(0, run.train.curves.size());
  const std::size_t n_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochMetrics em;
    em.epoch = epoch;
    em.lr = schedule.at(epoch);
    shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::span<const std::size_t> idx(order.data() + b * cfg.batch_size,
                                             std::min(cfg.batch_size, order.size() - b * cfg.batch_size));
      const SequenceBatch batch = window_batch(run.train, idx);
      Tape tape(&model.params());
      ElboResult e;
      try {
        e = elbo(tape, model, batch, solver, &sample_rng);
      } catch (const DivergenceError&) {
        ++em.skipped_batches;
        continue;
      } catch (const NumericError&) {
        ++em.skipped_batches;
        continue;
      }
      em.total_nfe += e.stats.nfe;
      em.solves += 1;
      loss_sum += e.loss.value().item() * static_cast<double>(idx.size());
      seen += idx.size();
      const auto grads = tape.backward(e.loss);
      adam.step(model.params().flat(), grads, em.lr, &model.params());
    }
    if (static_cast<double>(em.skipped_batches) > cfg.max_skip_fraction * static_cast<double>(n_batches)) {
      throw TrainingError(fmt::format("epoch {}: {} of {} batches skipped after solver divergence", epoch,
                                      em.skipped_batches, n_batches));
    }
    em.train_nll = seen ? loss_sum / static_cast<double>(seen) : kNaN;
    em.mean_nfe = em.solves ? static_cast<double>(em.total_nfe) / static_cast<double>(em.solves) : kNaN;
    em.test_nll = em.test_err = kNaN;
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      run.final_eval = evaluate_latentode(model, run.test, cfg.data.horizon, eval_solver, cfg.eval_batch_size);
      em.test_nll = run.final_eval.loss;
      em.test_err = run.final_eval.mse;
    }
    em.wall_seconds = seconds_since(t0);
    run.metrics.push_back(em);
    if (hook && !hook(em)) {
      if (std::isnan(em.test_nll)) {
        run.final_eval = evaluate_latentode(model, run.test, cfg.data.horizon, eval_solver, cfg.eval_batch_size);
      }
      break;
    }
  }
  return run;
}

}  // namespace infocnf
