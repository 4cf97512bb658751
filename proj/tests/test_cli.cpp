#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <json.hpp>

#include "infocnf/checkpoint.hpp"
#include "infocnf/cli.hpp"
#include "infocnf/metrics.hpp"

using namespace infocnf;
namespace fs = std::filesystem;

namespace {

const fs::path& root() {
  static const fs::path p = [] {
    const fs::path r = fs::temp_directory_path() / ("infocnf-cli-" + std::to_string(::getpid()));
    fs::remove_all(r);
    fs::create_directories(r);
    return r;
  }();
  return p;
}

std::string at(const std::string& name) { return (root() / name).string(); }

nlohmann::json read_json(const fs::path& p) {
  nlohmann::json j;
  std::ifstream(p) >> j;
  return j;
}

// Small enough for a unit test: 20 points per class, one flow layer.
const std::string& tiny_config() {
  static const std::string path = [] {
    const std::string p = at("tiny.json");
    std::ofstream(p) << R"({"epochs": 2, "batch_size": 40, "data": {"n_train": 20, "n_test": 20},
                           "model": {"num_layers": 1, "hidden": [8]}})";
    return p;
  }();
  return path;
}

// Shared gated run, trained once.
const std::string& gated_run() {
  static const std::string dir = [] {
    const std::string d = at("gated");
    REQUIRE(run_cli({"train", "--task", "infocnf", "--config", tiny_config(), "--tolerance-mode", "gated", "--out", d,
                     "--quiet"}) == kExitOk);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen-data refuses to overwrite a run") {
    const std::string out = at("spirals");
    CHECK(run_cli({"gen-data", "--dataset", "spirals", "--n-curves", "100", "--out", out}) == kExitOk);
    const auto m = read_json(fs::path(out) / "manifest.json");
    CHECK(m["clockwise_curves"] == 50);
    CHECK(m["counter_clockwise_curves"] == 50);
    CHECK(fs::exists(fs::path(out) / "windows.csv"));
    CHECK(fs::exists(fs::path(out) / "truth.csv"));
    CHECK(run_cli({"gen-data", "--dataset", "spirals", "--n-curves", "100", "--out", out}) == kExitIo);
  }

  TEST_CASE("gen-data rejects bad specs without leaving files") {
    CHECK(run_cli({"gen-data", "--dataset", "spirals", "--n-curves", "7", "--out", at("odd")}) == kExitConfig);
    CHECK(!fs::exists(at("odd")));
    CHECK(run_cli({"gen-data", "--dataset", "moons", "--out", at("moons")}) == kExitConfig);
    CHECK(run_cli({"gen-data"}) == kExitConfig);
  }

  TEST_CASE("gen-data uses the output root") {
    ::setenv("INFOCNF_OUT_ROOT", at("root").c_str(), 1);
    CHECK(run_cli({"gen-data", "--dataset", "mix1d", "--n", "50", "--seed", "4"}) == kExitOk);
    ::unsetenv("INFOCNF_OUT_ROOT");
    CHECK(read_csv(root() / "root" / "mix1d-seed4" / "data.csv").rows.size() == 50);
  }

  TEST_CASE("train writes metrics and a manifest") {
    const std::string info = at("info"), ccnf = at("ccnf");
    REQUIRE(run_cli({"train", "--task", "infocnf", "--config", tiny_config(), "--out", info, "--quiet"}) == kExitOk);
    REQUIRE(run_cli({"train", "--task", "ccnf", "--config", tiny_config(), "--out", ccnf, "--quiet"}) == kExitOk);
    const CsvTable t = read_csv(fs::path(info) / "metrics.csv");
    CHECK(t.header == std::vector<std::string>{"epoch", "train_nll", "test_nll", "test_err", "mean_nfe", "lr"});
    CHECK(t.rows.size() == 2);
    CHECK(!fs::exists(fs::path(info) / "gates.csv"));
    const auto mi = read_json(fs::path(info) / "manifest.json");
    const auto mc = read_json(fs::path(ccnf) / "manifest.json");
    CHECK(mi["conditioning_parameter_count"].get<long>() < mc["conditioning_parameter_count"].get<long>());
    CHECK(mi.contains("git_describe"));
  }

  TEST_CASE("gated training writes gate logs") {
    const CsvTable g = read_csv(fs::path(gated_run()) / "gates.csv");
    CHECK(g.header ==
          std::vector<std::string>{"epoch", "iteration", "layer", "mu", "sigma", "tolerance", "nfe"});
    CHECK(!g.rows.empty());
  }

  TEST_CASE("unknown config keys are a config error") {
    const std::string cfg = at("bad.json");
    std::ofstream(cfg) << R"({"epochs": 1, "optimiser": "sgd"})";
    CHECK(run_cli({"train", "--task", "infocnf", "--config", cfg, "--out", at("bad"), "--quiet"}) == kExitConfig);
  }

  TEST_CASE("eval with several batch sizes") {
    const std::string out = at("eval.csv");
    CHECK(run_cli({"eval", "--checkpoint", (fs::path(gated_run()) / "model.json").string(), "--mode", "learned",
                   "--batch-size", "1", "--batch-size", "16", "--batch-size", "80", "--out", out}) == kExitOk);
    const CsvTable t = read_csv(out);
    CHECK(t.rows.size() == 3);
    CHECK(t.column("batch_size") == std::vector<double>{1, 16, 80});
  }

  TEST_CASE("eval failure modes") {
    CHECK(run_cli({"eval", "--checkpoint", at("nowhere/model.json")}) == kExitIo);
    const fs::path src = fs::path(gated_run());
    const fs::path copy = root() / "versioned";
    fs::create_directories(copy);
    fs::copy_file(src / "model.bin", copy / "model.bin");
    auto m = read_json(src / "model.json");
    m["format_version"] = kCheckpointVersion + 7;
    std::ofstream(copy / "model.json") << m.dump();
    CHECK(run_cli({"eval", "--checkpoint", (copy / "model.json").string()}) == kExitVersion);
    CHECK(run_cli({"eval", "--checkpoint", (src / "model.json").string(), "--mode", "adaptive"}) == kExitConfig);
  }

  TEST_CASE("report reproduces the logged NFE") {
    const fs::path run = gated_run();
    REQUIRE(run_cli({"report", "--run", run.string()}) == kExitOk);
    CHECK(fs::exists(run / "report" / "nfe_curve.svg"));
    CHECK(fs::exists(run / "report" / "tol_hist.svg"));
    const auto nfe = read_csv(run / "metrics.csv").column("mean_nfe");
    double mean = 0.0;
    for (double v : nfe) mean += v / static_cast<double>(nfe.size());
    const CsvTable s = read_csv(run / "report" / "summary.csv");
    for (const auto& row : s.rows) {
      if (row[0] == "epoch_mean_nfe") CHECK(std::stod(row[1]) == doctest::Approx(mean).epsilon(1e-12));
    }
  }

  TEST_CASE("report needs its CSV files") {
    const fs::path empty = root() / "empty-run";
    fs::create_directories(empty);
    CHECK(run_cli({"report", "--run", empty.string()}) == kExitIo);
  }

  TEST_CASE("oracle filter") {
    const std::string report = at("oracles.json");
    CHECK(run_cli({"oracles", "--filter", "^solver/", "--report", report}) == kExitOk);
    const auto j = read_json(report);
    CHECK(!j["oracles"].empty());
    for (const auto& o : j["oracles"]) CHECK(o["name"].get<std::string>().rfind("solver/", 0) == 0);
  }
}
