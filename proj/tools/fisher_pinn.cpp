// fisher-pinn: train, evaluate, gradient-check and reproduce the study presets.
//
// Exit codes: 0 success, 1 check failure or runtime error, 2 usage/config error.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fisher/experiment.hpp"

namespace {

using namespace fisher;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;

// "3", "0-9" or "0,2,5-7".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (item.empty()) throw ConfigError("bad seed list '" + text + "'");
    try {
      const std::size_t dash = item.find('-');
      std::size_t used = 0;
      if (dash == std::string::npos) {
        out.push_back(std::stoull(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } else {
        const std::uint64_t lo = std::stoull(item.substr(0, dash), &used);
        const std::uint64_t hi = std::stoull(item.substr(dash + 1));
        if (lo > hi) throw std::invalid_argument(item);
        for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad seed list '" + text + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

struct Common {
  std::string config;
  std::string seeds;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::string out;
  int workers = 1;
};

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig config = c.config.empty() ? ExperimentConfig::from_json(json::object()) : load_config(c.config);
  if (c.seed) config.seeds = {*c.seed};
  if (!c.seeds.empty()) config.seeds = parse_seeds(c.seeds);
  if (c.epochs) config.training.epochs = *c.epochs;
  if (!c.out.empty()) config.out = c.out;
  config.validate();
  return config;
}

int cmd_train(const Common& c, bool fresh) {
  const ExperimentConfig config = resolve(c);
  std::cerr << "training " << config.label() << " (" << config.seeds.size() << " seed"
            << (config.seeds.size() == 1 ? "" : "s") << ") into " << config.run_dir().string() << '\n';
  const auto runs = run_experiment(config, c.workers, !fresh, &std::cerr);
  std::cout << aggregate_json(config, runs).dump(2) << '\n';
  return kOk;
}

json sweep_json(const std::vector<SweepPoint>& sweep) {
  json a = json::array();
  for (const SweepPoint& s : sweep) a.push_back({{"rho", s.rho}, {"l2", s.l2}});
  return a;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint, const std::vector<double>& rhos) {
  std::string path = checkpoint;
  if (path.empty()) {
    const ExperimentConfig config = resolve(c);
    path = run_paths(config, config.seeds.front()).checkpoint.string();
  }
  if (!std::filesystem::exists(path)) throw ConfigError("no checkpoint at " + path);
  const LoadedRun run = load_run(path);
  const Surrogate model = run.surrogate();
  json out;
  out["checkpoint"] = path;
  out["model"] = run.config.label();
  out["seed"] = run.seed;
  if (run.config.problem.domain.generalizing()) {
    out["interior_l2"] = interior_l2(model, run.config.problem, run.config.interior_rhos);
    const std::vector<double> sweep_rhos = rhos.empty() ? default_sweep_rhos() : rhos;
    out["sweep"] = sweep_json(rho_sweep(model, run.config.problem, sweep_rhos));
  } else {
    if (!rhos.empty()) throw ConfigError("--rho needs a generalizing model");
    out["l2"] = l2_error(model, run.config.problem);
  }
  std::cout << out.dump(2) << '\n';
  return kOk;
}

int cmd_gradcheck(const Common& c, std::size_t draws, double tolerance, bool corrupt) {
  FisherProblem base;
  if (!c.config.empty()) base = load_config(c.config).problem;
  GradientTamper tamper;
  if (corrupt)
    tamper = [](std::vector<double>& g) {
      for (double& v : g) v *= 1.01;
    };
  const double lambdas[] = {0.0, 1.0};
  const auto cases = gradient_suite(base, lambdas, draws, tamper);
  double worst = 0.0;
  for (const GradcheckCase& k : cases) {
    worst = std::max(worst, k.result.max_rel_error);
    std::printf("%-13s %-12s lambda=%-3g draw=%llu  max_rel=%.3e  (%zu components)\n", model_name(k.model).c_str(),
                k.generalizing ? "generalizing" : "discrete", k.lambda, static_cast<unsigned long long>(k.draw),
                k.result.max_rel_error, k.result.compared);
  }
  const bool ok = worst <= tolerance;
  std::printf("max relative error %.3e (tolerance %.1e): %s\n", worst, tolerance, ok ? "PASS" : "FAIL");
  return ok ? kOk : kCheckFailed;
}

int cmd_preset(const Common& c, const std::string& name, bool dry_run) {
  PresetOptions options;
  options.epochs = c.epochs;
  if (c.seed) options.seeds = {*c.seed};
  if (!c.seeds.empty()) options.seeds = parse_seeds(c.seeds);
  if (!c.out.empty()) options.out = c.out;
  options.workers = c.workers;
  const auto jobs = expand_preset(name, options);
  if (dry_run) {
    for (const PresetJob& j : jobs)
      std::cout << j.row << "\tseed " << j.seed << "\t" << j.config.run_dir().string() << '\n';
    std::cout << jobs.size() << " runs\n";
    return kOk;
  }
  const auto path = run_preset(name, options, &std::cerr);
  std::cout << path.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural solvers for Fisher's equation with large reaction rates"};
  app.require_subcommand(1);
  Common common;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON experiment config");
    sub->add_option("--seed", common.seed, "single seed");
    sub->add_option("--seeds", common.seeds, "seed list, e.g. 0-9 or 0,3,5");
    sub->add_option("--epochs", common.epochs, "override the epoch count");
    sub->add_option("--out", common.out, "output directory (default $FISHER_PINN_OUT or fisher-pinn-out)");
    sub->add_option("--workers", common.workers, "parallel runs")->check(CLI::PositiveNumber);
  };

  bool fresh = false;
  CLI::App* train = app.add_subcommand("train", "train every seed of a config");
  add_common(train);
  train->add_flag("--fresh", fresh, "retrain even if a finished run exists");

  std::string checkpoint;
  std::vector<double> rhos;
  CLI::App* evaluate = app.add_subcommand("evaluate", "L2 error of a trained run");
  add_common(evaluate);
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint file (otherwise --config and --seed)");
  evaluate->add_option("--rho", rhos, "rho values for the sweep of a generalizing model");

  std::size_t draws = 5;
  double tolerance = 1e-5;
  bool corrupt = false;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "tape gradients against finite differences");
  add_common(gradcheck);
  gradcheck->add_option("--draws", draws, "random draws per variant");
  gradcheck->add_option("--tolerance", tolerance, "maximum relative error");
  gradcheck->add_flag("--corrupt-gradient", corrupt)->group("");

  std::string preset_name;
  bool dry_run = false;
  CLI::App* preset = app.add_subcommand("preset", "reproduce a table or figure");
  add_common(preset);
  preset->add_option("name", preset_name, "table2 table3 table4 fig3 fig4 fig5 fig6")->required();
  preset->add_flag("--dry-run", dry_run, "list the run matrix without training");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train) return cmd_train(common, fresh);
    if (*evaluate) return cmd_evaluate(common, checkpoint, rhos);
    if (*gradcheck) return cmd_gradcheck(common, draws, tolerance, corrupt);
    return cmd_preset(common, preset_name, dry_run);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckFailed;
  }
}
