#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "infocnf/checkpoint.hpp"
#include "infocnf/trainer.hpp"

using namespace infocnf;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("infocnf-unit-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TrainConfig tiny_infocnf(double beta = 1.0) {
  TrainConfig cfg = default_config(Task::infocnf);
  cfg.epochs = 2;
  cfg.batch_size = 40;
  cfg.beta = beta;
  cfg.data.n_train = 20;
  cfg.data.n_test = 20;
  cfg.model.hidden = {8};
  cfg.model.num_layers = 1;
  return cfg;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("adam first step moves by about lr") {
    Adam opt(1);
    std::vector<double> theta{1.0};
    const std::vector<double> g{2.0};
    opt.step(theta, g, 0.1);
    CHECK(theta[0] == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(opt.steps() == 1);
  }

  TEST_CASE("adam leaves parameters alone under a zero gradient") {
    Adam opt(3);
    std::vector<double> theta{1.0, -2.0, 0.5};
    const std::vector<double> before = theta, g(3, 0.0);
    opt.step(theta, g, 0.1);
    CHECK(theta == before);
  }

  TEST_CASE("adam converges on a convex quadratic") {
    Adam opt(1);
    std::vector<double> theta{1.0};
    for (int i = 0; i < 200; ++i) {
      const std::vector<double> g{2.0 * theta[0]};
      opt.step(theta, g, 0.1);
    }
    CHECK(std::abs(theta[0]) < 1e-3);
  }

  TEST_CASE("non-finite gradients name the parameter") {
    ParamStore store;
    store.add("flow.a", {1, 2});
    Adam opt(store.size());
    const std::vector<double> g{0.0, std::nan("")};
    const std::vector<double> before = store.flat();
    CHECK_THROWS_WITH_AS(opt.step(store.flat(), g, 0.1, &store), doctest::Contains("flow.a"), TrainingError);
    CHECK(store.flat() == before);
  }

  TEST_CASE("learning rate schedule") {
    const LrSchedule s(1e-3, {{250, 1e-4}});
    CHECK(s.at(1) == 1e-3);
    CHECK(s.at(249) == 1e-3);
    CHECK(s.at(250) == 1e-4);
    CHECK(s.at(400) == 1e-4);
  }

  TEST_CASE("config overlay and strictness") {
    const TrainConfig c = parse_config(nlohmann::json{{"epochs", 3}, {"data", {{"n_train", 10}}}}, Task::infocnf);
    CHECK(c.epochs == 3);
    CHECK(c.data.n_train == 10);
    CHECK(c.data.dataset == "labeled2d");
    CHECK_THROWS_WITH_AS(parse_config(nlohmann::json{{"bogus", 1}}, Task::infocnf), doctest::Contains("bogus"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config(nlohmann::json{{"data", {{"nope", 1}}}}, Task::infocnf),
                         doctest::Contains("data.nope"), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json{{"epochs", "many"}}, Task::infocnf), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json{{"lr", -1.0}}, Task::infocnf), ConfigError);
  }

  TEST_CASE("config json round trip") {
    for (Task t : {Task::density, Task::infocnf, Task::ccnf, Task::latentode}) {
      const nlohmann::json j = config_to_json(default_config(t));
      CHECK(config_to_json(parse_config(j, t)) == j);
    }
  }

  TEST_CASE("metrics csv columns") {
    const fs::path dir = scratch_dir("csv");
    EpochMetrics m;
    m.epoch = 1;
    m.test_nll = std::nan("");
    write_metrics_csv(dir / "metrics.csv", {m});
    const CsvTable t = read_csv(dir / "metrics.csv");
    CHECK(t.header == std::vector<std::string>{"epoch", "train_nll", "test_nll", "test_err", "mean_nfe", "lr"});
    CHECK(std::isnan(t.column("test_nll")[0]));
    CHECK_THROWS_AS(read_csv(dir / "missing.csv"), IoError);
  }

  TEST_CASE("checkpoint round trip and versioning") {
    const fs::path dir = scratch_dir("ckpt");
    TrainConfig cfg = tiny_infocnf();
    Rng rng(1);
    const CnfModel m = build_cnf_model(cnf_spec_for(cfg, 2, 4), rng);
    save_cnf(dir / "model.json", m, cfg);
    TrainConfig loaded_cfg;
    const CnfModel back = load_cnf(dir / "model.json", &loaded_cfg);
    CHECK(back.params.flat() == m.params.flat());
    CHECK(config_to_json(loaded_cfg) == config_to_json(cfg));

    nlohmann::json manifest;
    std::ifstream(dir / "model.json") >> manifest;
    manifest["format_version"] = kCheckpointVersion + 1;
    std::ofstream(dir / "model.json") << manifest.dump();
    CHECK_THROWS_AS(load_cnf(dir / "model.json"), VersionError);
    CHECK_THROWS_WITH_AS(load_cnf(dir / "absent.json"), doctest::Contains("absent.json"), IoError);
  }

  TEST_CASE("density of an identity flow integrates to one") {
    const CnfModel m = build_cnf_skeleton(CnfSpec{1, 1, {4}});
    CHECK(std::abs(riemann_normalization(m, -8, 8, 1e-3, SolverConfig{}) - 1.0) < 1e-9);
  }

  TEST_CASE("without supervision the classifier stays at chance") {
    const CnfRun run = train_cnf(tiny_infocnf(0.0));
    CHECK(std::abs(run.metrics.back().test_err - 0.75) <= 0.05);
  }

  TEST_CASE("fixed-tolerance training is deterministic") {
    const CnfRun a = train_cnf(tiny_infocnf());
    const CnfRun b = train_cnf(tiny_infocnf());
    CHECK(a.model.params.flat() == b.model.params.flat());
    REQUIRE(a.metrics.size() == b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
      CHECK(a.metrics[i].train_nll == b.metrics[i].train_nll);
      CHECK(a.metrics[i].mean_nfe == b.metrics[i].mean_nfe);
    }
  }

  TEST_CASE("gated training logs one gate row per layer and batch") {
    TrainConfig cfg = tiny_infocnf();
    cfg.tolerance_mode = ToleranceMode::gated;
    cfg.model.num_layers = 2;
    const CnfRun run = train_cnf(cfg);
    CHECK(run.gates.size() == 2u * 2u * 2u);  // epochs x batches x layers
    for (const auto& g : run.gates) {
      CHECK(g.tolerance >= kMinGateTolerance);
      CHECK(g.tolerance <= kMaxGateTolerance);
    }
    CHECK(run.alpha > 0.0);
  }
}
