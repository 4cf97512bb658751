#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "infocnf/flow.hpp"
#include "infocnf/latentode.hpp"
#include "infocnf/synthdata.hpp"
#include "infocnf/tolgate.hpp"

namespace infocnf {

enum class Task { density, infocnf, ccnf, latentode };
enum class ToleranceMode { fixed, gated };

const char* task_name(Task t);
Task parse_task(const std::string& name);
const char* tolerance_mode_name(ToleranceMode m);
ToleranceMode parse_tolerance_mode(const std::string& name);

struct DataConfig {
  std::string dataset;  // mix1d | labeled2d | spirals
  std::uint64_t seed = 11;
  std::uint64_t test_seed = 12;  // must differ from seed
  /// mix1d: points; labeled2d: points per class; spirals: curves.
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  MixtureSpec mixture;
  Labeled2dSpec labeled;
  SpiralSpec spirals;
  std::size_t horizon = 100;  // spirals: future ground-truth points scored in extrapolation
};

struct ModelConfig {
  std::size_t num_layers = 2;
  std::vector<std::size_t> hidden{32, 32};
  Activation activation = Activation::softplus;
  std::size_t d_y = 0;  // 0: half the width (InfoCNF) or the full width (CCNF)
  double dropout = 0.5;
  double init_gain = 1.0;
  LatentOdeSpec latent;
};

struct TrainConfig {
  Task task = Task::density;
  std::uint64_t seed = 0;
  int epochs = 200;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  std::vector<std::pair<int, double>> lr_schedule;
  double beta = 1.0;
  std::optional<double> alpha;  // empty: calibrate on the first batch
  TraceMode trace = TraceMode::exact;
  ToleranceMode tolerance_mode = ToleranceMode::fixed;
  double tolerance = 1e-5;       // training tolerance in fixed mode
  double eval_tolerance = 1e-5;  // evaluation tolerance
  int eval_every = 1;
  std::size_t eval_batch_size = 256;
  SolverMethod method = SolverMethod::dopri5;
  long max_steps = 10000;
  long rk4_steps = 0;  // steps per unit interval when method is rk4_fixed
  double max_skip_fraction = 0.05;
  GateConfig gate;
  DataConfig data;
  ModelConfig model;

  /// Solver for a given tolerance under this config's method and limits.
  SolverConfig solver(double tol) const;
  void validate() const;
};

TrainConfig default_config(Task task);
/// Task defaults overlaid with `j`. Unknown keys and type mismatches raise
/// ConfigError naming the offending field.
TrainConfig parse_config(const nlohmann::json& j, Task task);
TrainConfig load_config_file(const std::filesystem::path& path, Task task);
nlohmann::json config_to_json(const TrainConfig& cfg);

}  // namespace infocnf
