#include "infocnf/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "infocnf/checkpoint.hpp"
#include "infocnf/oracles.hpp"
#include "infocnf/svg.hpp"
#include "infocnf/trainer.hpp"

#ifndef INFOCNF_GIT_DESCRIBE
#define INFOCNF_GIT_DESCRIBE "unknown"
#endif

namespace infocnf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string timestamp() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                  std::chrono::system_clock::now())));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Every run directory gets exactly one manifest, written when the command finishes.
struct RunManifest {
  json body;

  RunManifest(const std::string& command, const std::vector<std::string>& argv) {
    body["command"] = command;
    body["argv"] = argv;
    body["git_describe"] = INFOCNF_GIT_DESCRIBE;
    body["started"] = timestamp();
    body["outputs"] = json::array();
  }

  void output(const fs::path& p) { body["outputs"].push_back(p.filename().string()); }

  void finish(const fs::path& dir) {
    body["finished"] = timestamp();
    write_text(dir / "manifest.json", body.dump(2) + "\n");
  }
};

fs::path resolve_out(const std::string& out, const std::string& fallback) {
  return out.empty() ? default_out_root() / fallback : fs::path(out);
}

// --- gen-data ---------------------------------------------------------------

struct GenDataArgs {
  std::string dataset;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<std::size_t> n, samples_per_class, n_curves;
};

int cmd_gen_data(const GenDataArgs& a, const std::vector<std::string>& argv) {
  RunManifest manifest("gen-data", argv);
  json spec;
  // Validate and generate before touching the file system so bad specs leave nothing behind.
  std::optional<Dataset> points;
  std::optional<SpiralCorpus> corpus;
  if (a.dataset == "mix1d") {
    const MixtureSpec mix;
    const std::size_t n = a.n.value_or(2000);
    points = gen_1d_mixture(mix, n, a.seed);
    spec = {{"n", n}, {"weights", mix.weights}, {"means", mix.means}, {"stddevs", mix.stddevs}};
  } else if (a.dataset == "labeled2d") {
    Labeled2dSpec lab;
    if (a.samples_per_class) lab.samples_per_class = *a.samples_per_class;
    points = gen_2d_labeled(lab, a.seed);
    spec = {{"samples_per_class", lab.samples_per_class}, {"means", lab.means}, {"stddevs", lab.stddevs}};
  } else if (a.dataset == "spirals") {
    SpiralSpec sp;
    if (a.n_curves) sp.n_curves = *a.n_curves;
    corpus = gen_spiral_corpus(sp, a.seed);
    spec = {{"n_curves", sp.n_curves}, {"n_points", sp.n_points}, {"window", sp.window}, {"reserve", sp.reserve},
            {"t_lo", sp.t_lo},         {"t_hi", sp.t_hi},         {"noise", sp.noise},   {"a_mean", sp.a_mean},
            {"a_sd", sp.a_sd},         {"b_mean", sp.b_mean},     {"b_sd", sp.b_sd}};
  } else {
    throw UsageError(fmt::format("unknown dataset '{}' (expected mix1d, labeled2d or spirals)", a.dataset));
  }

  const fs::path dir = resolve_out(a.out, fmt::format("{}-seed{}", a.dataset, a.seed));
  claim_run_dir(dir);
  manifest.body["config"] = {{"dataset", a.dataset}, {"spec", spec}};
  manifest.body["seed"] = a.seed;
  if (points) {
    write_points_csv(dir / "data.csv", *points);
    manifest.output(dir / "data.csv");
  } else {
    write_spiral_windows_csv(dir / "windows.csv", *corpus);
    write_spiral_truth_csv(dir / "truth.csv", *corpus);
    manifest.output(dir / "windows.csv");
    manifest.output(dir / "truth.csv");
    std::size_t cw = 0;
    for (const auto& c : corpus->curves) cw += c.system.direction == SpiralDirection::clockwise;
    manifest.body["clockwise_curves"] = cw;
    manifest.body["counter_clockwise_curves"] = corpus->curves.size() - cw;
  }
  manifest.finish(dir);
  fmt::print("wrote {} dataset to {}\n", a.dataset, dir.string());
  return kExitOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string task;
  std::string config;
  std::string out;
  std::string tolerance_mode;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  bool full_corpus = false;
  bool quiet = false;
};

void write_density_grid(const fs::path& path, const CnfModel& model, const TrainConfig& cfg) {
  std::vector<double> xs;
  for (int i = 0; i <= 1200; ++i) xs.push_back(-6.0 + 0.01 * i);
  const auto lp = log_density(model, Tensor::column(xs), cfg.solver(cfg.eval_tolerance));
  std::string text = "x,model_density,true_density\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    text += fmt::format("{},{},{}\n", format_double(xs[i]), format_double(std::exp(lp[i])),
                        format_double(cfg.data.mixture.density(xs[i])));
  }
  write_text(path, text);
}

void write_predictions(const fs::path& path, const LatentRun& run, std::size_t count) {
  const auto& cfg = run.config;
  count = std::min(count, run.test.curves.size());
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  const SequenceBatch window = window_batch(run.test, idx);
  const SequenceBatch future = future_batch(run.test, idx, cfg.data.horizon);
  std::vector<double> times = window.times;
  times.insert(times.end(), future.times.begin(), future.times.end());
  const Extrapolation ex = extrapolate(run.model, window, times, cfg.solver(cfg.eval_tolerance));

  std::string text = "sequence_id,kind,t,x,y\n";
  auto rows = [&](const char* kind, std::span<const double> ts, std::span<const Tensor> pts) {
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t k = 0; k < ts.size(); ++k) {
        text += fmt::format("{},{},{},{},{}\n", i, kind, format_double(ts[k]), format_double(pts[k].at(i, 0)),
                            format_double(pts[k].at(i, 1)));
      }
    }
  };
  rows("observed", window.times, window.steps);
  rows("truth", future.times, future.steps);
  rows("predicted", times, ex.points);
  write_text(path, text);
}

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  const Task task = parse_task(a.task);
  TrainConfig cfg = a.config.empty() ? default_config(task) : load_config_file(a.config, task);
  if (!a.tolerance_mode.empty()) cfg.tolerance_mode = parse_tolerance_mode(a.tolerance_mode);
  if (a.seed) cfg.seed = *a.seed;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.full_corpus) {
    if (task != Task::latentode) throw UsageError("--full-corpus applies to the latentode task only");
    cfg.data.n_train = 5000;
  }
  cfg.validate();

  const fs::path dir = resolve_out(a.out, fmt::format("{}-{}-seed{}", a.task, tolerance_mode_name(cfg.tolerance_mode),
                                                     cfg.seed));
  claim_run_dir(dir);
  RunManifest manifest("train", argv);
  manifest.body["config"] = config_to_json(cfg);
  manifest.body["seed"] = cfg.seed;

  const auto hook = [&](const EpochMetrics& m) {
    if (!a.quiet) {
      fmt::print(stderr, "epoch {:4d}  train {:.5f}  test {}  err {}  nfe {:.1f}  {:.2f}s\n", m.epoch, m.train_nll,
                 format_double(m.test_nll), format_double(m.test_err), m.mean_nfe, m.wall_seconds);
    }
    return true;
  };

  std::vector<EpochMetrics> metrics;
  if (task == Task::latentode) {
    const LatentRun run = train_latentode(cfg, hook);
    metrics = run.metrics;
    save_latentode(dir / "model.json", run.model, cfg);
    write_predictions(dir / "predictions.csv", run, 5);
    manifest.output(dir / "predictions.csv");
    manifest.body["conditioning_parameter_count"] = run.model.conditioning_parameter_count();
    manifest.body["parameter_count"] = run.model.params().size();
    manifest.body["final"] = {{"test_loss", json_number(run.final_eval.loss)},
                              {"extrapolation_mse", json_number(run.final_eval.mse)},
                              {"extrapolation_mse_true_labels", json_number(run.final_eval.label_mse)},
                              {"mean_nfe", json_number(run.final_eval.mean_nfe)}};
  } else {
    const CnfRun run = train_cnf(cfg, hook);
    metrics = run.metrics;
    save_cnf(dir / "model.json", run.model, cfg);
    if (!run.gates.empty()) {
      write_gates_csv(dir / "gates.csv", run.gates);
      manifest.output(dir / "gates.csv");
      manifest.body["alpha"] = run.alpha;
    }
    if (run.model.spec.dim == 1 && !run.model.conditional()) {
      write_density_grid(dir / "density_1d.csv", run.model, cfg);
      manifest.output(dir / "density_1d.csv");
    }
    manifest.body["conditioning_parameter_count"] = run.model.conditioning_parameter_count();
    manifest.body["parameter_count"] = run.model.params.size();
  }
  write_metrics_csv(dir / "metrics.csv", metrics);
  write_timing_csv(dir / "timing.csv", metrics);
  for (const char* f : {"metrics.csv", "timing.csv", "model.json", "model.bin"}) manifest.output(dir / f);
  manifest.finish(dir);
  fmt::print("wrote run to {}\n", dir.string());
  return kExitOk;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string mode = "fixed:1e-5";
  std::vector<std::size_t> batch_sizes;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  const fs::path ckpt_path(a.checkpoint);
  const Checkpoint ckpt = read_checkpoint(ckpt_path);
  const bool latent = checkpoint_kind(ckpt) == "latentode";

  EvalMode mode = EvalMode::fixed;
  double tol = 1e-5;
  if (a.mode == "learned") {
    mode = EvalMode::learned;
  } else if (a.mode.rfind("fixed:", 0) == 0) {
    try {
      std::size_t used = 0;
      tol = std::stod(a.mode.substr(6), &used);
      if (used != a.mode.size() - 6) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw UsageError(fmt::format("--mode: cannot parse tolerance in '{}'", a.mode));
    }
    if (!(tol > 0.0)) throw UsageError("--mode: tolerance must be positive");
  } else {
    throw UsageError(fmt::format("--mode must be fixed:VALUE or learned, not '{}'", a.mode));
  }

  TrainConfig cfg;
  std::string text = "mode,tolerance,batch_size,test_nll,marginal_nll,test_err,mean_nfe,solves\n";
  std::vector<std::size_t> sizes = a.batch_sizes;
  if (latent) {
    if (mode == EvalMode::learned) throw UsageError("learned-tolerance evaluation applies to gated flow checkpoints");
    const LatentOdeModel model = load_latentode(ckpt_path, &cfg);
    if (sizes.empty()) sizes.push_back(cfg.eval_batch_size);
    const SpiralCorpus test = make_spiral_corpus(cfg.data, true);
    for (std::size_t bs : sizes) {
      const LatentEval e = evaluate_latentode(model, test, cfg.data.horizon, cfg.solver(tol), bs);
      text += fmt::format("{},{},{},{},nan,{},{},{}\n", a.mode, format_double(tol), bs, format_double(e.loss),
                          format_double(e.mse), format_double(e.mean_nfe), e.solves);
    }
  } else {
    const CnfModel model = load_cnf(ckpt_path, &cfg);
    if (sizes.empty()) sizes.push_back(cfg.eval_batch_size);
    const Dataset test = make_dataset(cfg.data, true);
    EvalOptions opts = eval_options(cfg);
    opts.mode = mode;
    opts.tolerance = tol;
    for (std::size_t bs : sizes) {
      opts.batch_size = bs;
      const EvalMetrics m = evaluate(model, test, opts);
      std::string tol_text = format_double(tol);
      if (mode == EvalMode::learned) {
        tol_text.clear();
        for (std::size_t k = 0; k < m.mean_tolerance.size(); ++k) {
          tol_text += (k ? ";" : "") + format_double(m.mean_tolerance[k]);
        }
      }
      text += fmt::format("{},{},{},{},{},{},{},{}\n", a.mode, tol_text, bs, format_double(m.nll),
                          format_double(m.marginal_nll), format_double(m.err), format_double(m.mean_nfe), m.solves);
    }
  }
  std::cout << text;
  if (!a.out.empty()) write_text(a.out, text);
  return kExitOk;
}

// --- normalize --------------------------------------------------------------

struct NormalizeArgs {
  std::string checkpoint;
  double lo = -8.0, hi = 8.0, step = 1e-3, tolerance = 1e-5;
};

int cmd_normalize(const NormalizeArgs& a) {
  TrainConfig cfg;
  const CnfModel model = load_cnf(a.checkpoint, &cfg);
  const double area = riemann_normalization(model, a.lo, a.hi, a.step, cfg.solver(a.tolerance));
  fmt::print("area,abs_error\n{},{}\n", format_double(area), format_double(std::abs(area - 1.0)));
  return kExitOk;
}

// --- report -----------------------------------------------------------------

struct ReportArgs {
  std::string run;
  std::vector<std::string> plots;
};

std::vector<double> finite_pairs(const std::vector<double>& x, const std::vector<double>& y, std::vector<double>& xo) {
  std::vector<double> yo;
  xo.clear();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isfinite(y[i])) {
      xo.push_back(x[i]);
      yo.push_back(y[i]);
    }
  }
  return yo;
}

int cmd_report(const ReportArgs& a) {
  const fs::path run(a.run);
  if (!fs::is_directory(run)) throw IoError(fmt::format("run directory '{}' does not exist", run.string()));
  const CsvTable metrics = read_csv(run / "metrics.csv");
  std::vector<std::string> plots = a.plots;
  if (plots.empty()) {
    plots = {"nll_curve", "nfe_curve"};
    if (fs::exists(run / "gates.csv")) plots.push_back("tol_hist");
    if (fs::exists(run / "density_1d.csv")) plots.push_back("density_1d");
    if (fs::exists(run / "predictions.csv")) plots.push_back("spiral_traj");
  }
  const fs::path out = run / "report";
  fs::create_directories(out);

  const auto epochs = metrics.column("epoch");
  for (const auto& plot : plots) {
    std::string svg;
    if (plot == "nll_curve") {
      std::vector<double> ex;
      const auto test = finite_pairs(epochs, metrics.column("test_nll"), ex);
      svg = svg_line_plot({"Negative log-likelihood", "epoch", "nats"},
                          {{"train", epochs, metrics.column("train_nll"), false}, {"test", ex, test, false}});
    } else if (plot == "nfe_curve") {
      svg = svg_line_plot({"Mean NFE per solve", "epoch", "NFE"}, {{"train", epochs, metrics.column("mean_nfe"), false}});
    } else if (plot == "tol_hist") {
      const CsvTable gates = read_csv(run / "gates.csv");
      const auto layer = gates.column("layer");
      const auto tol = gates.column("tolerance");
      std::map<int, std::vector<double>> by_layer;
      for (std::size_t i = 0; i < layer.size(); ++i) by_layer[static_cast<int>(layer[i])].push_back(std::log10(tol[i]));
      std::vector<HistogramGroup> groups;
      for (auto& [k, v] : by_layer) groups.push_back({fmt::format("layer {}", k), std::move(v)});
      svg = svg_histogram({"Learned error tolerances", "log10 tolerance", "count"}, groups, -8.0, -1.0, 56);
    } else if (plot == "density_1d") {
      const CsvTable d = read_csv(run / "density_1d.csv");
      svg = svg_line_plot({"Density", "x", "p(x)"}, {{"model", d.column("x"), d.column("model_density"), false},
                                                      {"exact", d.column("x"), d.column("true_density"), false}});
    } else if (plot == "spiral_traj") {
      const CsvTable p = read_csv(run / "predictions.csv");
      const auto id = p.column("sequence_id");
      const auto x = p.column("x");
      const auto y = p.column("y");
      const std::size_t kind = p.column_index("kind");
      std::vector<Series> series;
      for (const char* k : {"observed", "truth", "predicted"}) {
        Series s{k, {}, {}, std::string(k) == "observed"};
        for (std::size_t i = 0; i < id.size(); ++i) {
          if (id[i] != 0.0 || p.rows[i][kind] != k) continue;
          s.x.push_back(x[i]);
          s.y.push_back(y[i]);
        }
        series.push_back(std::move(s));
      }
      svg = svg_line_plot({"Spiral extrapolation (test sequence 0)", "x", "y"}, series, true);
    } else {
      throw UsageError(fmt::format("unknown plot '{}'", plot));
    }
    write_text(out / (plot + ".svg"), svg);
  }

  const auto test_nll = metrics.column("test_nll");
  const auto test_err = metrics.column("test_err");
  const auto nfe = metrics.column("mean_nfe");
  double best = kNaN, nfe_mean = 0.0;
  for (double v : test_nll) {
    if (std::isfinite(v) && !(v >= best)) best = v;
  }
  for (double v : nfe) nfe_mean += v / static_cast<double>(nfe.size());
  const std::size_t last = epochs.size() - 1;
  std::string summary = "quantity,value\n";
  summary += fmt::format("epochs,{}\n", epochs.empty() ? 0 : static_cast<long>(epochs[last]));
  summary += fmt::format("final_train_nll,{}\n", format_double(metrics.column("train_nll")[last]));
  summary += fmt::format("final_test_nll,{}\n", format_double(test_nll[last]));
  summary += fmt::format("best_test_nll,{}\n", format_double(best));
  summary += fmt::format("final_test_err,{}\n", format_double(test_err[last]));
  summary += fmt::format("epoch_mean_nfe,{}\n", format_double(nfe_mean));
  write_text(out / "summary.csv", summary);
  std::cout << summary;
  return kExitOk;
}

// --- oracles ----------------------------------------------------------------

struct OracleArgs {
  std::string filter;
  std::string report = "oracle_report.json";
};

int cmd_oracles(const OracleArgs& a) {
  const auto selected = select_oracles(a.filter);
  if (selected.empty()) throw UsageError(fmt::format("no oracle matches '{}'", a.filter));
  std::vector<OracleReport> reports;
  bool ok = true;
  for (const Oracle* o : selected) {
    reports.push_back(run_oracle(*o));
    ok = ok && reports.back().pass;
    fmt::print("{}\n", format_oracle_line(reports.back()));
    std::fflush(stdout);
  }
  if (!a.report.empty()) write_text(a.report, oracle_report_json(reports).dump(2) + "\n");
  return ok ? kExitOk : kExitIo;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Conditional continuous normalizing flows with learned solver tolerances", "infocnf"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--dataset", gen.dataset, "mix1d, labeled2d or spirals")->required();
  gen_cmd->add_option("--seed", gen.seed, "Root seed");
  gen_cmd->add_option("--out", gen.out, "Output directory");
  gen_cmd->add_option("--n", gen.n, "mix1d: number of points");
  gen_cmd->add_option("--samples-per-class", gen.samples_per_class, "labeled2d: points per class");
  gen_cmd->add_option("--n-curves", gen.n_curves, "spirals: number of curves (even)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a run directory");
  train_cmd->add_option("--task", tr.task, "density, infocnf, ccnf or latentode")->required();
  train_cmd->add_option("--config", tr.config, "JSON config overlaid on the task defaults");
  train_cmd->add_option("--out", tr.out, "Run directory");
  train_cmd->add_option("--tolerance-mode", tr.tolerance_mode, "fixed or gated");
  train_cmd->add_option("--seed", tr.seed, "Override the config seed");
  train_cmd->add_option("--epochs", tr.epochs, "Override the epoch count");
  train_cmd->add_flag("--full-corpus", tr.full_corpus, "latentode: train on 5000 curves");
  train_cmd->add_flag("--quiet", tr.quiet, "No per-epoch progress on stderr");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on its test split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint manifest (model.json)")->required();
  eval_cmd->add_option("--mode", ev.mode, "fixed:VALUE or learned");
  eval_cmd->add_option("--batch-size", ev.batch_sizes, "Evaluation batch size; repeat for a sensitivity table");
  eval_cmd->add_option("--out", ev.out, "Also write the table to this CSV file");

  NormalizeArgs nm;
  auto* norm_cmd = app.add_subcommand("normalize", "Riemann-sum normalization check of a 1D density model");
  norm_cmd->add_option("--checkpoint", nm.checkpoint, "Checkpoint manifest")->required();
  norm_cmd->add_option("--lo", nm.lo, "Grid start");
  norm_cmd->add_option("--hi", nm.hi, "Grid end");
  norm_cmd->add_option("--step", nm.step, "Grid spacing");
  norm_cmd->add_option("--tolerance", nm.tolerance, "Solver tolerance");

  ReportArgs rp;
  auto* report_cmd = app.add_subcommand("report", "Plot a run directory from its CSV files");
  report_cmd->add_option("--run", rp.run, "Run directory")->required();
  report_cmd->add_option("--plots", rp.plots, "nll_curve, nfe_curve, tol_hist, density_1d, spiral_traj")
      ->delimiter(',');

  OracleArgs orc;
  auto* oracle_cmd = app.add_subcommand("oracles", "Run the verification oracles");
  oracle_cmd->add_option("--filter", orc.filter, "Regex over oracle names");
  oracle_cmd->add_option("--report", orc.report, "JSON report path (empty to skip)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (gen_cmd->parsed()) return cmd_gen_data(gen, args);
  if (train_cmd->parsed()) return cmd_train(tr, args);
  if (eval_cmd->parsed()) return cmd_eval(ev);
  if (norm_cmd->parsed()) return cmd_normalize(nm);
  if (report_cmd->parsed()) return cmd_report(rp);
  return cmd_oracles(orc);
}

}  // namespace

fs::path default_out_root() {
  if (const char* env = std::getenv("INFOCNF_OUT_ROOT"); env && *env) return env;
  return "runs";
}

void claim_run_dir(const fs::path& dir) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec) || !fs::is_empty(dir, ec)) {
      throw IoError(fmt::format("refusing to overwrite '{}': it exists and is not empty", dir.string()));
    }
    return;
  }
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
}

int run_cli(int argc, const char* const* argv) {
  try {
    return dispatch(argc, argv);
  } catch (const VersionError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitVersion;
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const UsageError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return kExitConfig;
  } catch (const DomainError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitIo;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"infocnf"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace infocnf
