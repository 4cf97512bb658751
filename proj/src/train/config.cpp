#include "infocnf/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "infocnf/adam.hpp"
#include "infocnf/errors.hpp"

namespace infocnf {

using nlohmann::json;

const char* task_name(Task t) {
  switch (t) {
    case Task::density: return "density";
    case Task::infocnf: return "infocnf";
    case Task::ccnf: return "ccnf";
    case Task::latentode: return "latentode";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  if (name == "density") return Task::density;
  if (name == "infocnf") return Task::infocnf;
  if (name == "ccnf") return Task::ccnf;
  if (name == "latentode") return Task::latentode;
  throw ConfigError("unknown task '" + name + "' (expected density, infocnf, ccnf or latentode)");
}

const char* tolerance_mode_name(ToleranceMode m) { return m == ToleranceMode::fixed ? "fixed" : "gated"; }

ToleranceMode parse_tolerance_mode(const std::string& name) {
  if (name == "fixed") return ToleranceMode::fixed;
  if (name == "gated") return ToleranceMode::gated;
  throw ConfigError("unknown tolerance mode '" + name + "' (expected fixed or gated)");
}

SolverConfig TrainConfig::solver(double tol) const {
  SolverConfig s = SolverConfig::with_tolerance(tol);
  s.method = method;
  s.max_steps = max_steps;
  if (method == SolverMethod::rk4_fixed) s.fixed_step_count = rk4_steps;
  return s;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size == 0 || eval_batch_size == 0) throw ConfigError("batch sizes must be positive");
  if (eval_every < 1) throw ConfigError("eval_every must be at least 1");
  if (beta < 0.0) throw ConfigError("beta must be nonnegative");
  if (alpha && *alpha < 0.0) throw ConfigError("alpha must be nonnegative");
  if (!(tolerance >= kMinGateTolerance && tolerance <= kMaxGateTolerance)) {
    throw ConfigError(fmt::format("tolerance must lie in [{:g}, {:g}]", kMinGateTolerance, kMaxGateTolerance));
  }
  if (!(eval_tolerance >= kMinGateTolerance && eval_tolerance <= kMaxGateTolerance)) {
    throw ConfigError(fmt::format("eval_tolerance must lie in [{:g}, {:g}]", kMinGateTolerance, kMaxGateTolerance));
  }
  if (!(max_skip_fraction >= 0.0 && max_skip_fraction <= 1.0)) throw ConfigError("max_skip_fraction must lie in [0, 1]");
  if (data.seed == data.test_seed) throw ConfigError("data.seed and data.test_seed must differ");
  if (data.n_train == 0 || data.n_test == 0) throw ConfigError("data.n_train and data.n_test must be positive");
  solver(tolerance).validate();
  (void)LrSchedule(lr, lr_schedule);
  const bool labeled = task == Task::infocnf || task == Task::ccnf;
  if (task == Task::density && data.dataset != "mix1d" && data.dataset != "labeled2d") {
    throw ConfigError("density task needs dataset mix1d or labeled2d");
  }
  if (labeled && data.dataset != "labeled2d") throw ConfigError("conditional tasks need dataset labeled2d");
  if (task == Task::latentode && data.dataset != "spirals") throw ConfigError("latentode task needs dataset spirals");
  if (task == Task::latentode && tolerance_mode == ToleranceMode::gated) {
    throw ConfigError("gated tolerances apply to flow tasks only");
  }
  if (model.num_layers == 0) throw ConfigError("model.num_layers must be positive");
}

TrainConfig default_config(Task task) {
  TrainConfig c;
  c.task = task;
  switch (task) {
    case Task::density:
      c.data.dataset = "mix1d";
      c.data.n_train = 2000;
      c.data.n_test = 1000;
      c.lr = 3e-3;
      break;
    case Task::infocnf:
    case Task::ccnf:
      c.data.dataset = "labeled2d";
      c.data.n_train = 500;
      c.data.n_test = 250;
      c.epochs = 150;
      c.batch_size = 200;
      c.lr = 1e-2;
      c.lr_schedule = {{130, 1e-3}};
      break;
    case Task::latentode:
      c.data.dataset = "spirals";
      c.data.n_train = 500;
      c.data.n_test = 200;
      c.epochs = 100;
      c.batch_size = 50;
      c.lr = 1e-2;
      c.lr_schedule = {{80, 1e-3}};
      c.tolerance = 1e-3;
      c.eval_tolerance = 1e-3;
      c.eval_every = 10;
      break;
  }
  return c;
}

namespace {

// Reads one JSON object, remembering which keys were consumed so anything
// left over can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(fmt::format("'{}' must be an object", path_.empty() ? "<root>" : path_));
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(fmt::format("'{}' has the wrong type ({})", field(key), it->type_name()));
    }
  }

  template <typename F>
  void with(const char* key, F&& f) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it != j_.end()) f(*it, field(key));
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(fmt::format("unknown key '{}'", field(it.key().c_str())));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename T>
T as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("'{}' has the wrong type ({})", path, j.type_name()));
  }
}

void read_gate(const json& j, const std::string& path, GateConfig& g) {
  ObjectReader r(j, path);
  r.get("hidden", g.hidden);
  r.get("init_log10_tol", g.init_log10_tol);
  r.get("init_sigma", g.init_sigma);
  r.get("min_log10", g.min_log10);
  r.get("max_log10", g.max_log10);
  r.get("baseline", g.baseline);
  r.get("baseline_decay", g.baseline_decay);
  r.finish();
  if (g.min_log10 < -8.0 || g.max_log10 > -1.0 || !(g.min_log10 < g.max_log10)) {
    throw ConfigError(fmt::format("'{}' clamp range must be a nonempty subrange of [-8, -1]", path));
  }
  if (!(g.init_sigma > 0.0)) throw ConfigError(fmt::format("'{}.init_sigma' must be positive", path));
  if (!(g.baseline_decay >= 0.0 && g.baseline_decay < 1.0)) {
    throw ConfigError(fmt::format("'{}.baseline_decay' must lie in [0, 1)", path));
  }
}

void read_pairs(const json& j, const std::string& path, std::vector<std::array<double, 2>>& out) {
  out = as<std::vector<std::array<double, 2>>>(j, path);
}

void read_data(const json& j, const std::string& path, DataConfig& d) {
  ObjectReader r(j, path);
  r.get("dataset", d.dataset);
  r.get("seed", d.seed);
  r.get("test_seed", d.test_seed);
  r.get("n_train", d.n_train);
  r.get("n_test", d.n_test);
  r.get("horizon", d.horizon);
  r.with("mixture", [&](const json& m, const std::string& p) {
    ObjectReader mr(m, p);
    mr.get("weights", d.mixture.weights);
    mr.get("means", d.mixture.means);
    mr.get("stddevs", d.mixture.stddevs);
    mr.finish();
    try {
      d.mixture.validate();
    } catch (const UsageError& e) {
      throw ConfigError(fmt::format("'{}': {}", p, e.what()));
    }
  });
  r.with("labeled", [&](const json& m, const std::string& p) {
    ObjectReader mr(m, p);
    mr.with("means", [&](const json& v, const std::string& q) { read_pairs(v, q, d.labeled.means); });
    mr.with("stddevs", [&](const json& v, const std::string& q) { read_pairs(v, q, d.labeled.stddevs); });
    mr.finish();
  });
  r.with("spirals", [&](const json& m, const std::string& p) {
    ObjectReader mr(m, p);
    mr.get("n_points", d.spirals.n_points);
    mr.get("window", d.spirals.window);
    mr.get("t_lo", d.spirals.t_lo);
    mr.get("t_hi", d.spirals.t_hi);
    mr.get("noise", d.spirals.noise);
    mr.get("a_mean", d.spirals.a_mean);
    mr.get("a_sd", d.spirals.a_sd);
    mr.get("b_mean", d.spirals.b_mean);
    mr.get("b_sd", d.spirals.b_sd);
    mr.finish();
  });
  r.finish();
}

void read_latent(const json& j, const std::string& path, LatentOdeSpec& s) {
  ObjectReader r(j, path);
  r.get("latent_dim", s.latent_dim);
  r.get("d_y", s.d_y);
  r.get("rnn_hidden", s.rnn_hidden);
  r.get("dyn_hidden", s.dyn_hidden);
  r.get("dec_hidden", s.dec_hidden);
  r.get("partitioned", s.partitioned);
  r.get("sigma_obs", s.sigma_obs);
  r.get("beta_sup", s.beta_sup);
  r.finish();
}

void read_model(const json& j, const std::string& path, ModelConfig& m) {
  ObjectReader r(j, path);
  r.get("num_layers", m.num_layers);
  r.get("hidden", m.hidden);
  r.with("activation", [&](const json& v, const std::string& p) {
    try {
      m.activation = parse_activation(as<std::string>(v, p));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(fmt::format("'{}': {}", p, e.what()));
    }
  });
  r.get("d_y", m.d_y);
  r.get("dropout", m.dropout);
  r.get("init_gain", m.init_gain);
  r.with("latent", [&](const json& v, const std::string& p) { read_latent(v, p, m.latent); });
  r.finish();
  if (!(m.dropout >= 0.0 && m.dropout < 1.0)) throw ConfigError(fmt::format("'{}.dropout' must lie in [0, 1)", path));
}

template <typename Parse>
auto parse_enum(const json& v, const std::string& path, Parse parse) {
  try {
    return parse(as<std::string>(v, path));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(fmt::format("'{}': {}", path, e.what()));
  }
}

}  // namespace

TrainConfig parse_config(const json& j, Task task) {
  TrainConfig c = default_config(task);
  ObjectReader r(j, "");
  r.with("task", [&](const json& v, const std::string& p) {
    const Task t = parse_task(as<std::string>(v, p));
    if (t != task) {
      throw ConfigError(fmt::format("'task' is '{}' but '{}' was requested", task_name(t), task_name(task)));
    }
  });
  r.get("seed", c.seed);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("lr", c.lr);
  r.with("lr_schedule", [&](const json& v, const std::string& p) {
    c.lr_schedule = as<std::vector<std::pair<int, double>>>(v, p);
  });
  r.get("beta", c.beta);
  r.with("alpha", [&](const json& v, const std::string& p) {
    if (v.is_string() && v.get<std::string>() == "auto") {
      c.alpha.reset();
    } else {
      c.alpha = as<double>(v, p);
    }
  });
  r.with("trace", [&](const json& v, const std::string& p) { c.trace = parse_enum(v, p, parse_trace_mode); });
  r.with("tolerance_mode",
         [&](const json& v, const std::string& p) { c.tolerance_mode = parse_enum(v, p, parse_tolerance_mode); });
  r.get("tolerance", c.tolerance);
  r.get("eval_tolerance", c.eval_tolerance);
  r.get("eval_every", c.eval_every);
  r.get("eval_batch_size", c.eval_batch_size);
  r.get("max_skip_fraction", c.max_skip_fraction);
  r.with("solver", [&](const json& v, const std::string& p) {
    ObjectReader sr(v, p);
    sr.with("method", [&](const json& m, const std::string& q) { c.method = parse_enum(m, q, parse_solver_method); });
    sr.get("max_steps", c.max_steps);
    sr.get("rk4_steps", c.rk4_steps);
    sr.finish();
  });
  r.with("gate", [&](const json& v, const std::string& p) { read_gate(v, p, c.gate); });
  r.with("data", [&](const json& v, const std::string& p) { read_data(v, p, c.data); });
  r.with("model", [&](const json& v, const std::string& p) { read_model(v, p, c.model); });
  r.finish();
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

TrainConfig load_config_file(const std::filesystem::path& path, Task task) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read config '{}'", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
  }
  return parse_config(j, task);
}

json config_to_json(const TrainConfig& c) {
  json j;
  j["task"] = task_name(c.task);
  j["seed"] = c.seed;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["lr_schedule"] = c.lr_schedule;
  j["beta"] = c.beta;
  if (c.alpha) {
    j["alpha"] = *c.alpha;
  } else {
    j["alpha"] = "auto";
  }
  j["trace"] = trace_mode_name(c.trace);
  j["tolerance_mode"] = tolerance_mode_name(c.tolerance_mode);
  j["tolerance"] = c.tolerance;
  j["eval_tolerance"] = c.eval_tolerance;
  j["eval_every"] = c.eval_every;
  j["eval_batch_size"] = c.eval_batch_size;
  j["max_skip_fraction"] = c.max_skip_fraction;
  j["solver"] = {{"method", solver_method_name(c.method)}, {"max_steps", c.max_steps}, {"rk4_steps", c.rk4_steps}};
  j["gate"] = {{"hidden", c.gate.hidden},
               {"init_log10_tol", c.gate.init_log10_tol},
               {"init_sigma", c.gate.init_sigma},
               {"min_log10", c.gate.min_log10},
               {"max_log10", c.gate.max_log10},
               {"baseline", c.gate.baseline},
               {"baseline_decay", c.gate.baseline_decay}};
  const auto& d = c.data;
  j["data"] = {{"dataset", d.dataset},
               {"seed", d.seed},
               {"test_seed", d.test_seed},
               {"n_train", d.n_train},
               {"n_test", d.n_test},
               {"horizon", d.horizon},
               {"mixture", {{"weights", d.mixture.weights}, {"means", d.mixture.means}, {"stddevs", d.mixture.stddevs}}},
               {"labeled", {{"means", d.labeled.means}, {"stddevs", d.labeled.stddevs}}},
               {"spirals",
                {{"n_points", d.spirals.n_points},
                 {"window", d.spirals.window},
                 {"t_lo", d.spirals.t_lo},
                 {"t_hi", d.spirals.t_hi},
                 {"noise", d.spirals.noise},
                 {"a_mean", d.spirals.a_mean},
                 {"a_sd", d.spirals.a_sd},
                 {"b_mean", d.spirals.b_mean},
                 {"b_sd", d.spirals.b_sd}}}};
  const auto& m = c.model;
  const auto& l = m.latent;
  j["model"] = {{"num_layers", m.num_layers},
                {"hidden", m.hidden},
                {"activation", activation_name(m.activation)},
                {"d_y", m.d_y},
                {"dropout", m.dropout},
                {"init_gain", m.init_gain},
                {"latent",
                 {{"latent_dim", l.latent_dim},
                  {"d_y", l.d_y},
                  {"rnn_hidden", l.rnn_hidden},
                  {"dyn_hidden", l.dyn_hidden},
                  {"dec_hidden", l.dec_hidden},
                  {"partitioned", l.partitioned},
                  {"sigma_obs", l.sigma_obs},
                  {"beta_sup", l.beta_sup}}}};
  return j;
}

}  // namespace infocnf
