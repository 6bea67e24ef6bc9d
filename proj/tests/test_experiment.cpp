#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fisher/experiment.hpp"

using namespace fisher;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fisher-test-" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("model names") {
    for (const char* name : {"standard-ann", "wave-ann", "standard-pinn", "wave-pinn"})
      CHECK(model_name(parse_model(name)) == name);
    CHECK_THROWS_AS(parse_model("wave"), ConfigError);
  }

  TEST_CASE("empty config takes every default") {
    const ExperimentConfig c = ExperimentConfig::from_json(json::object());
    CHECK(c.model.architecture == Architecture::wave);
    CHECK(c.model.method == Method::pinn);
    CHECK(c.problem.mu == 10.0);
    CHECK(c.training.epochs == 50000);
    CHECK(c.training.lr0 == 0.001);
    CHECK(c.network.hidden_layers == 2);
    CHECK(c.network.neurons == 20);
    CHECK(c.seeds == std::vector<std::uint64_t>{0});
  }

  TEST_CASE("generalizing configs get the deeper network and longer schedule") {
    const ExperimentConfig c = ExperimentConfig::from_json(json{{"problem", {{"rho_range", {100, 10000}}}}});
    CHECK(c.problem.domain.generalizing());
    CHECK(c.network.hidden_layers == 3);
    CHECK(c.training.epochs == 100000);
    CHECK(c.label() == "wave-pinn-lambda0-rho100-10000");
  }

  TEST_CASE("unknown keys are rejected at every level") {
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"epochs", 3}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"problem", {{"kappa", 1}}}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"network", {{"depth", 1}}}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"training", {{"adam", {{"beta3", 0.5}}}}}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"evaluation", {{"grid", 5}}}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"seeds", json::array()}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"problem", {{"rho", "big"}}}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"problem", {{"lambda", -1}}}}), ConfigError);
  }

  TEST_CASE("round trip through JSON") {
    const json in{{"model", "standard-pinn"},
                  {"problem", {{"rho", 100}, {"lambda", 0.1}, {"weight_gradient", "stop"}}},
                  {"network", {{"neurons", 10}, {"activation", "swish"}, {"wave_init", "glorot"}}},
                  {"training", {{"epochs", 7}, {"n_col", 512}}},
                  {"seeds", {3, 4}},
                  {"out", "somewhere"}};
    const ExperimentConfig c = ExperimentConfig::from_json(in);
    const json full = c.to_json();
    const ExperimentConfig d = ExperimentConfig::from_json(full);
    CHECK(d.to_json() == full);
    CHECK(d.hash() == c.hash());
    CHECK(d.problem.weight_gradient == WeightGradient::stop);
    CHECK(d.network.activation == Elementary::swish);
    CHECK(d.network.wave_init == WaveInit::glorot);
    CHECK(d.training.n_col == 512);
    CHECK(d.label() == "standard-pinn-lambda0.1-rho100");
  }

  TEST_CASE("hash covers the run but not seeds or output directory") {
    ExperimentConfig a = ExperimentConfig::defaults({Architecture::wave, Method::pinn}, 1e3, 1.0);
    ExperimentConfig b = a;
    b.seeds = {7, 8};
    b.out = "/elsewhere";
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.training.epochs = 10;
    CHECK(a.hash() != b.hash());
    b = a;
    b.problem.weight_gradient = WeightGradient::stop;
    CHECK(a.hash() != b.hash());
  }

  TEST_CASE("missing or malformed config files name the path") {
    const fs::path dir = scratch_dir("config");
    fs::create_directories(dir);
    const fs::path missing = dir / "nope.json";
    try {
      load_config(missing);
      FAIL("expected an error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(missing.string()) != std::string::npos);
    }
    const fs::path bad = dir / "bad.json";
    std::ofstream(bad) << "{ not json";
    CHECK_THROWS_AS(load_config(bad), ConfigError);
    fs::remove_all(dir);
  }

  TEST_CASE("preset matrices") {
    PresetOptions o;
    o.out = scratch_dir("preset-dry");
    CHECK(expand_preset("table2", o).size() == 300);
    CHECK(expand_preset("table3", o).size() == 240);
    CHECK(expand_preset("table4", o).size() == 120);
    CHECK(expand_preset("fig3", o).size() == 1);
    CHECK(expand_preset("fig4", o).size() == 40);
    CHECK(expand_preset("fig5", o).size() == 40);
    CHECK(expand_preset("fig6", o).size() == 2);
    CHECK_THROWS_AS(expand_preset("table9", o), ConfigError);
    o.epochs = 12;
    for (const PresetJob& j : expand_preset("table4", o)) CHECK(j.config.training.epochs == 12);
    CHECK_FALSE(fs::exists(o.out));

    const auto fig3 = expand_preset("fig3", o).front().config;
    CHECK(fig3.problem.domain.rho == 1e4);
    CHECK(fig3.problem.lambda == 1.0);
  }

  TEST_CASE("runs are written, cached and reloadable") {
    ExperimentConfig c = ExperimentConfig::defaults({Architecture::wave, Method::pinn}, 1e3, 1.0);
    c.training.epochs = 5;
    c.training.n_data = 32;
    c.training.n_col = 32;
    c.training.test_points = 32;
    c.training.stride = 2;
    c.out = scratch_dir("runs");
    c.seeds = {0, 1};

    const auto runs = run_experiment(c, 2, true);
    REQUIRE(runs.size() == 2);
    for (const RunSummary& r : runs) {
      CHECK_FALSE(r.cached);
      CHECK(fs::exists(r.paths.checkpoint));
      CHECK(fs::exists(r.paths.history));
      CHECK(fs::exists(r.paths.sidecar));
    }
    CHECK(fs::exists(c.run_dir() / "aggregate.json"));

    const json side = json::parse(slurp(runs[0].paths.sidecar));
    CHECK(side["config"] == c.to_json());
    CHECK(side["config_hash"] == c.hash());
    CHECK(side["seed"] == 0);
    CHECK(side.contains("wall_seconds"));
    CHECK(side["final_l2"].get<double>() == runs[0].final_l2);

    const RunSummary again = run_seed(c, 0, true);
    CHECK(again.cached);
    CHECK(again.final_l2 == runs[0].final_l2);

    const std::string body = slurp(runs[0].paths.history);
    const RunSummary fresh = run_seed(c, 0, false);
    CHECK_FALSE(fresh.cached);
    CHECK(slurp(fresh.paths.history) == body);

    const LoadedRun loaded = load_run(runs[1].paths.checkpoint);
    CHECK(loaded.seed == 1);
    CHECK(loaded.config.hash() == c.hash());
    CHECK(l2_error(loaded.surrogate(), loaded.config.problem) == runs[1].final_l2);

    const json agg = json::parse(slurp(c.run_dir() / "aggregate.json"));
    CHECK(agg["runs"].size() == 2);
    CHECK(agg["diverged"] == 0);
    CHECK(agg["stats"]["count"] == 2);
    fs::remove_all(c.out);
  }

  TEST_CASE("worker pool runs every job and rethrows failures") {
    std::atomic<int> sum{0};
    parallel_for(100, 4, [&](std::size_t i) { sum += static_cast<int>(i); });
    CHECK(sum == 4950);
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](std::size_t i) {
                                   if (i == 6) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
  }

  TEST_CASE("gradient suite covers every variant") {
    const double lambdas[] = {0.0, 1.0};
    const auto cases = gradient_suite(FisherProblem{}, lambdas, 1);
    CHECK(cases.size() == 16);
    for (const GradcheckCase& k : cases) {
      CHECK(k.result.compared > 0);
      CHECK(k.result.max_rel_error <= 1e-5);
    }
  }
}
