#pragma once

// Config-driven runs, on-disk run records and the table/figure presets.
//
// Layout under the output directory:
//   runs/<label>-<hash>/seed-<n>.ckpt   parameters (see model.hpp)
//   runs/<label>-<hash>/seed-<n>.csv    learning curve
//   runs/<label>-<hash>/seed-<n>.json   sidecar: config echo, L2, wall time
//   runs/<label>-<hash>/aggregate.json  per-config statistics
//   <preset>.csv                        preset tables

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fisher/evaluation.hpp"
#include "fisher/model.hpp"
#include "fisher/physics.hpp"
#include "fisher/training.hpp"

namespace fisher {

struct ModelKind {
  Architecture architecture = Architecture::wave;
  Method method = Method::pinn;
};

/// "standard-ann", "wave-ann", "standard-pinn", "wave-pinn".
ModelKind parse_model(std::string_view name);
std::string model_name(const ModelKind& kind);

/// FISHER_PINN_OUT if set, otherwise "fisher-pinn-out".
std::filesystem::path default_output_dir();

struct ExperimentConfig {
  ModelKind model;
  FisherProblem problem;
  NetworkConfig network;
  TrainConfig training;
  std::size_t interior_rhos = 20;  // continuous-rho test protocol
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out = default_output_dir();

  /// Defaults for a model on a fixed rho or on a rho range.
  static ExperimentConfig defaults(const ModelKind& model, double rho, double lambda);
  static ExperimentConfig defaults(const ModelKind& model, Interval rho_range, double lambda);

  /// Unknown keys are rejected; omitted keys take the defaults.
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Complete document, every field spelled out.
  nlohmann::json to_json() const;
  void validate() const;

  /// Human-readable run family name, e.g. "wave-pinn-lambda1-rho1000".
  std::string label() const;
  /// Hash of everything that influences a run (seeds and out excluded).
  std::string hash() const;
  std::filesystem::path run_dir() const;
};

/// Throws ConfigError naming the path when it cannot be read or parsed.
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunPaths {
  std::filesystem::path checkpoint;
  std::filesystem::path history;
  std::filesystem::path sidecar;
};

RunPaths run_paths(const ExperimentConfig& config, std::uint64_t seed);

struct RunSummary {
  std::uint64_t seed = 0;
  double final_l2 = 0.0;
  bool diverged = false;
  int diverged_epoch = -1;
  int epochs_completed = 0;
  double wall_seconds = 0.0;
  bool cached = false;
  RunPaths paths;
};

/// Trains one seed and writes checkpoint, history and sidecar. With `reuse`,
/// a finished run with the same config hash is loaded instead.
RunSummary run_seed(const ExperimentConfig& config, std::uint64_t seed, bool reuse = true);

struct LoadedRun {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  Network net;
  ParameterVector params;

  Surrogate surrogate() const { return network_surrogate(net, params); }
};

LoadedRun load_run(const std::filesystem::path& checkpoint);

/// Runs `job(i)` for i in [0, n) on up to `workers` threads. The first
/// exception thrown by a job is rethrown after all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& job);

/// All seeds of one config, then aggregate.json next to the runs.
std::vector<RunSummary> run_experiment(const ExperimentConfig& config, int workers, bool reuse = true,
                                       std::ostream* log = nullptr);

nlohmann::json aggregate_json(const ExperimentConfig& config, const std::vector<RunSummary>& runs);

// Gradient check over every model variant.

struct GradcheckCase {
  ModelKind model;
  bool generalizing = false;
  double lambda = 0.0;
  std::uint64_t draw = 0;
  GradientCheck result;
};

/// 4 models x {discrete, generalizing} x `lambdas` x `draws` random
/// parameter/point draws on small batches. Discrete cases use base.domain.rho,
/// generalizing ones base.domain.rho_range (or [1e2, 1e4]).
std::vector<GradcheckCase> gradient_suite(const FisherProblem& base, std::span<const double> lambdas,
                                          std::size_t draws, const GradientTamper& tamper = {});

// Presets.

struct PresetOptions {
  std::optional<int> epochs;  // applied to every run
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::filesystem::path out = default_output_dir();
  int workers = 1;
};

struct PresetJob {
  std::string row;  // table row / curve the run contributes to
  ExperimentConfig config;
  std::uint64_t seed = 0;
};

std::vector<std::string> preset_names();
/// Full run matrix of a preset. ConfigError for an unknown name.
std::vector<PresetJob> expand_preset(std::string_view name, const PresetOptions& options);
/// Trains (reusing finished runs) and writes <out>/<name>.csv. Returns its path.
std::filesystem::path run_preset(std::string_view name, const PresetOptions& options, std::ostream* log = nullptr);

}  // namespace fisher
