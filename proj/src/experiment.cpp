#include "fisher/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace fisher {

using nlohmann::json;
namespace fs = std::filesystem;

ModelKind parse_model(std::string_view name) {
  const auto dash = name.find('-');
  if (dash == std::string_view::npos) throw ConfigError("unknown model '" + std::string(name) + "'");
  try {
    return {parse_architecture(name.substr(0, dash)), parse_method(name.substr(dash + 1))};
  } catch (const ConfigError&) {
    throw ConfigError("unknown model '" + std::string(name) + "'");
  }
}

std::string model_name(const ModelKind& kind) {
  return std::string(to_string(kind.architecture)) + "-" + std::string(to_string(kind.method));
}

fs::path default_output_dir() {
  const char* env = std::getenv("FISHER_PINN_OUT");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("fisher-pinn-out");
}

namespace {

std::string shortest(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw ConfigError("unknown key '" + item.key() + "' in " + std::string(where));
  }
}

double number(const json& j, std::string_view key) {
  if (!j.is_number()) throw ConfigError("'" + std::string(key) + "' must be a number");
  return j.get<double>();
}

long long integer(const json& j, std::string_view key) {
  if (!j.is_number_integer()) throw ConfigError("'" + std::string(key) + "' must be an integer");
  return j.get<long long>();
}

std::size_t count(const json& j, std::string_view key) {
  const long long v = integer(j, key);
  if (v < 0) throw ConfigError("'" + std::string(key) + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

Interval interval(const json& j, std::string_view key) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("'" + std::string(key) + "' must be [lo, hi]");
  return {number(j[0], key), number(j[1], key)};
}

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

void apply_problem(const json& j, FisherProblem& p) {
  check_keys(j, {"rho", "rho_range", "mu", "lambda", "x", "t", "weight_gradient"}, "problem");
  if (j.contains("rho")) p.domain.rho = number(j["rho"], "rho");
  if (j.contains("rho_range")) {
    if (j["rho_range"].is_null())
      p.domain.rho_range.reset();
    else
      p.domain.rho_range = interval(j["rho_range"], "rho_range");
  }
  if (j.contains("mu")) p.mu = number(j["mu"], "mu");
  if (j.contains("lambda")) p.lambda = number(j["lambda"], "lambda");
  if (j.contains("x")) p.domain.x = interval(j["x"], "x");
  if (j.contains("t")) p.domain.t = interval(j["t"], "t");
  if (j.contains("weight_gradient")) {
    if (!j["weight_gradient"].is_string()) throw ConfigError("'weight_gradient' must be a string");
    p.weight_gradient = parse_weight_gradient(j["weight_gradient"].get<std::string>());
  }
}

void apply_network(const json& j, NetworkConfig& n) {
  check_keys(j, {"hidden_layers", "neurons", "activation", "wave_init"}, "network");
  if (j.contains("hidden_layers")) n.hidden_layers = static_cast<int>(integer(j["hidden_layers"], "hidden_layers"));
  if (j.contains("neurons")) n.neurons = static_cast<int>(integer(j["neurons"], "neurons"));
  if (j.contains("activation")) {
    if (!j["activation"].is_string()) throw ConfigError("'activation' must be a string");
    n.activation = parse_elementary(j["activation"].get<std::string>());
  }
  if (j.contains("wave_init")) {
    if (!j["wave_init"].is_string()) throw ConfigError("'wave_init' must be a string");
    n.wave_init = parse_wave_init(j["wave_init"].get<std::string>());
  }
}

void apply_training(const json& j, TrainConfig& t) {
  check_keys(j, {"epochs", "lr0", "decay_rate", "decay_every", "n_data", "n_col", "stride", "test_points", "adam"},
             "training");
  if (j.contains("epochs")) t.epochs = static_cast<int>(integer(j["epochs"], "epochs"));
  if (j.contains("lr0")) t.lr0 = number(j["lr0"], "lr0");
  if (j.contains("decay_rate")) t.decay_rate = number(j["decay_rate"], "decay_rate");
  if (j.contains("decay_every")) t.decay_every = static_cast<int>(integer(j["decay_every"], "decay_every"));
  if (j.contains("n_data")) t.n_data = count(j["n_data"], "n_data");
  if (j.contains("n_col")) t.n_col = count(j["n_col"], "n_col");
  if (j.contains("stride")) t.stride = static_cast<int>(integer(j["stride"], "stride"));
  if (j.contains("test_points")) t.test_points = count(j["test_points"], "test_points");
  if (j.contains("adam")) {
    const json& a = j["adam"];
    check_keys(a, {"beta1", "beta2", "eps"}, "training.adam");
    if (a.contains("beta1")) t.adam.beta1 = number(a["beta1"], "beta1");
    if (a.contains("beta2")) t.adam.beta2 = number(a["beta2"], "beta2");
    if (a.contains("eps")) t.adam.eps = number(a["eps"], "eps");
  }
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const fs::path& path, const std::string& body) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << body;
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults(const ModelKind& model, double rho, double lambda) {
  ExperimentConfig c;
  c.model = model;
  c.problem.domain.rho = rho;
  c.problem.lambda = lambda;
  c.network = NetworkConfig::defaults(model.architecture, false);
  c.training = TrainConfig::defaults(false);
  return c;
}

ExperimentConfig ExperimentConfig::defaults(const ModelKind& model, Interval rho_range, double lambda) {
  ExperimentConfig c;
  c.model = model;
  c.problem.domain.rho_range = rho_range;
  c.problem.lambda = lambda;
  c.network = NetworkConfig::defaults(model.architecture, true);
  c.training = TrainConfig::defaults(true);
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  try {
    check_keys(j, {"model", "problem", "network", "training", "evaluation", "seeds", "out"}, "config");
    ExperimentConfig c;
    if (j.contains("model")) {
      if (!j["model"].is_string()) throw ConfigError("'model' must be a string");
      c.model = parse_model(j["model"].get<std::string>());
    }
    if (j.contains("problem")) apply_problem(j["problem"], c.problem);
    const bool gen = c.problem.domain.generalizing();
    c.network = NetworkConfig::defaults(c.model.architecture, gen);
    c.training = TrainConfig::defaults(gen);
    if (j.contains("network")) apply_network(j["network"], c.network);
    if (j.contains("training")) apply_training(j["training"], c.training);
    if (j.contains("evaluation")) {
      check_keys(j["evaluation"], {"interior_rhos"}, "evaluation");
      if (j["evaluation"].contains("interior_rhos"))
        c.interior_rhos = count(j["evaluation"]["interior_rhos"], "interior_rhos");
    }
    if (j.contains("seeds")) {
      const json& s = j["seeds"];
      if (!s.is_array() || s.empty()) throw ConfigError("'seeds' must be a non-empty array");
      c.seeds.clear();
      for (const json& v : s) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
          throw ConfigError("seeds must be non-negative integers");
        c.seeds.push_back(v.get<std::uint64_t>());
      }
    }
    if (j.contains("out")) {
      if (!j["out"].is_string()) throw ConfigError("'out' must be a string");
      c.out = j["out"].get<std::string>();
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

json ExperimentConfig::to_json() const {
  const Domain& d = problem.domain;
  json j;
  j["model"] = model_name(model);
  j["problem"] = {{"rho", d.rho},
                  {"rho_range", d.rho_range ? interval_json(*d.rho_range) : json(nullptr)},
                  {"mu", problem.mu},
                  {"lambda", problem.lambda},
                  {"x", interval_json(d.x)},
                  {"t", interval_json(d.t)},
                  {"weight_gradient", std::string(to_string(problem.weight_gradient))}};
  j["network"] = {{"hidden_layers", network.hidden_layers},
                  {"neurons", network.neurons},
                  {"activation", std::string(to_string(network.activation))},
                  {"wave_init", std::string(to_string(network.wave_init))}};
  j["training"] = {{"epochs", training.epochs},
                   {"lr0", training.lr0},
                   {"decay_rate", training.decay_rate},
                   {"decay_every", training.decay_every},
                   {"n_data", training.n_data},
                   {"n_col", training.n_col},
                   {"stride", training.stride},
                   {"test_points", training.test_points},
                   {"adam", {{"beta1", training.adam.beta1}, {"beta2", training.adam.beta2}, {"eps", training.adam.eps}}}};
  j["evaluation"] = {{"interior_rhos", interior_rhos}};
  j["seeds"] = seeds;
  j["out"] = out.string();
  return j;
}

void ExperimentConfig::validate() const {
  problem.validate();
  NetworkConfig n = network;
  n.generalizing = problem.domain.generalizing();
  n.validate();
  training.validate();
  if (interior_rhos < 1) throw ConfigError("interior_rhos must be at least 1");
  if (seeds.empty()) throw ConfigError("need at least one seed");
}

std::string ExperimentConfig::label() const {
  std::string s = model_name(model);
  if (model.method == Method::pinn) s += "-lambda" + shortest(problem.lambda);
  const Domain& d = problem.domain;
  if (d.rho_range)
    s += "-rho" + shortest(d.rho_range->lo) + "-" + shortest(d.rho_range->hi);
  else
    s += "-rho" + shortest(d.rho);
  return s;
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("seeds");
  j.erase("out");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

fs::path ExperimentConfig::run_dir() const { return out / "runs" / (label() + "-" + hash().substr(0, 12)); }

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config file " + path.string() + ": " + e.what());
  }
  try {
    return ExperimentConfig::from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RunPaths run_paths(const ExperimentConfig& config, std::uint64_t seed) {
  const fs::path dir = config.run_dir();
  const std::string stem = "seed-" + std::to_string(seed);
  return {dir / (stem + ".ckpt"), dir / (stem + ".csv"), dir / (stem + ".json")};
}

namespace {

NetworkConfig network_for(const ExperimentConfig& config) {
  NetworkConfig n = config.network;
  n.architecture = config.model.architecture;
  n.generalizing = config.problem.domain.generalizing();
  return n;
}

std::optional<RunSummary> cached_run(const ExperimentConfig& config, std::uint64_t seed, const RunPaths& paths) {
  if (!fs::exists(paths.sidecar) || !fs::exists(paths.checkpoint) || !fs::exists(paths.history)) return std::nullopt;
  json side;
  try {
    std::ifstream in(paths.sidecar);
    side = json::parse(in);
  } catch (const json::exception&) {
    return std::nullopt;
  }
  if (side.value("config_hash", std::string()) != config.hash()) return std::nullopt;
  RunSummary s;
  s.seed = seed;
  s.final_l2 = side["final_l2"].is_number() ? side["final_l2"].get<double>() : std::nan("");
  s.diverged = side.value("diverged", false);
  s.diverged_epoch = side.value("diverged_epoch", -1);
  s.epochs_completed = side.value("epochs_completed", 0);
  s.wall_seconds = side.value("wall_seconds", 0.0);
  s.cached = true;
  s.paths = paths;
  return s;
}

}  // namespace

RunSummary run_seed(const ExperimentConfig& config, std::uint64_t seed, bool reuse) {
  config.validate();
  const RunPaths paths = run_paths(config, seed);
  if (reuse) {
    if (auto hit = cached_run(config, seed, paths)) return *hit;
  }

  FisherProblem problem = config.problem;
  const RunRecord record = train(problem, network_for(config), config.model.method, config.training, seed);

  fs::create_directories(paths.checkpoint.parent_path());
  const json echo = config.to_json();
  save_checkpoint(paths.checkpoint, {{"config", echo}, {"seed", seed}}, record.params);
  std::ostringstream csv;
  write_history_csv(record, csv);
  write_text(paths.history, csv.str());

  json side;
  side["config"] = echo;
  side["config_hash"] = config.hash();
  side["seed"] = seed;
  side["final_l2"] = finite_or_null(record.final_l2);
  side["l2_metric"] = problem.domain.generalizing() ? "mean interior-rho grid L2" : "grid L2";
  side["diverged"] = record.diverged;
  side["diverged_epoch"] = record.diverged_epoch;
  side["epochs_completed"] = record.epochs_completed;
  side["wall_seconds"] = record.wall_seconds;
  side["finished_at"] = utc_now();
  side["checkpoint"] = paths.checkpoint.filename().string();
  side["history"] = paths.history.filename().string();
  write_text(paths.sidecar, side.dump(2) + "\n");

  RunSummary s;
  s.seed = seed;
  s.final_l2 = record.final_l2;
  s.diverged = record.diverged;
  s.diverged_epoch = record.diverged_epoch;
  s.epochs_completed = record.epochs_completed;
  s.wall_seconds = record.wall_seconds;
  s.paths = paths;
  return s;
}

LoadedRun load_run(const fs::path& checkpoint) {
  Checkpoint ck = load_checkpoint(checkpoint);
  if (!ck.header.contains("config") || !ck.header.contains("seed"))
    throw ConfigError(checkpoint.string() + ": checkpoint header lacks config or seed");
  ExperimentConfig config = ExperimentConfig::from_json(ck.header["config"]);
  Network net = Network::for_domain(network_for(config), config.problem.domain);
  if (ck.params.size() != net.parameter_count())
    throw ConfigError(checkpoint.string() + ": parameter count does not match the configured network");
  return LoadedRun{std::move(config), ck.header["seed"].get<std::uint64_t>(), std::move(net), std::move(ck.params)};
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& job) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

json aggregate_json(const ExperimentConfig& config, const std::vector<RunSummary>& runs) {
  json j;
  j["config"] = config.to_json();
  j["config_hash"] = config.hash();
  j["runs"] = json::array();
  std::vector<double> l2;
  int diverged = 0;
  for (const RunSummary& r : runs) {
    j["runs"].push_back({{"seed", r.seed}, {"final_l2", finite_or_null(r.final_l2)}, {"diverged", r.diverged}});
    if (r.diverged || !std::isfinite(r.final_l2))
      ++diverged;
    else
      l2.push_back(r.final_l2);
  }
  j["diverged"] = diverged;
  if (!l2.empty()) {
    const SeedStats s = aggregate(l2);
    j["stats"] = {{"count", s.count}, {"mean", s.mean}, {"std", s.std},
                  {"median", s.median}, {"q25", s.q25}, {"q75", s.q75}};
  } else {
    j["stats"] = nullptr;
  }
  return j;
}

std::vector<RunSummary> run_experiment(const ExperimentConfig& config, int workers, bool reuse, std::ostream* log) {
  config.validate();
  std::vector<RunSummary> out(config.seeds.size());
  std::mutex log_mutex;
  parallel_for(config.seeds.size(), workers, [&](std::size_t i) {
    out[i] = run_seed(config, config.seeds[i], reuse);
    if (log) {
      std::lock_guard<std::mutex> lock(log_mutex);
      *log << config.label() << " seed " << out[i].seed << ": L2 " << shortest(out[i].final_l2)
           << (out[i].diverged ? " (diverged)" : "") << (out[i].cached ? " (cached)" : "") << '\n';
    }
  });
  fs::create_directories(config.run_dir());
  write_text(config.run_dir() / "aggregate.json", aggregate_json(config, out).dump(2) + "\n");
  return out;
}

std::vector<GradcheckCase> gradient_suite(const FisherProblem& base, std::span<const double> lambdas,
                                          std::size_t draws, const GradientTamper& tamper) {
  const ModelKind models[] = {{Architecture::standard, Method::ann},
                              {Architecture::wave, Method::ann},
                              {Architecture::standard, Method::pinn},
                              {Architecture::wave, Method::pinn}};
  TrainConfig small;
  small.n_data = 4;
  small.n_col = 3;
  std::vector<GradcheckCase> out;
  for (const ModelKind& m : models)
    for (const bool gen : {false, true})
      for (const double lambda : lambdas)
        for (std::uint64_t draw = 0; draw < draws; ++draw) {
          FisherProblem p = base;
          p.lambda = lambda;
          if (gen) {
            if (!p.domain.rho_range) p.domain.rho_range = Interval{1e2, 1e4};
          } else {
            p.domain.rho_range.reset();
          }
          NetworkConfig nc = NetworkConfig::defaults(m.architecture, gen);
          const Network net = Network::for_domain(nc, p.domain);
          const std::uint64_t seed = 0x9c0000 + draw;
          ParameterVector params = net.initialize(seed);
          // Nonzero biases and a generic wave offset.
          Rng rng = make_rng(seed, 1);
          std::uniform_real_distribution<double> jitter(-0.1, 0.1);
          for (double& v : params) v += jitter(rng);
          Rng batch_rng = make_rng(seed, 2);
          const SampleBatch batch = draw_batch(p, m.method, small, batch_rng);
          out.push_back({m, gen, lambda, draw, check_gradient(net, params, batch, p, m.method, 1e-5, 1e-8, tamper)});
        }
  return out;
}

// Presets.

namespace {

const ModelKind kStandardAnn{Architecture::standard, Method::ann};
const ModelKind kWaveAnn{Architecture::wave, Method::ann};
const ModelKind kStandardPinn{Architecture::standard, Method::pinn};
const ModelKind kWavePinn{Architecture::wave, Method::pinn};
const ModelKind kAllModels[] = {kStandardAnn, kWaveAnn, kStandardPinn, kWavePinn};

constexpr double kRhos[] = {1e2, 1e3, 1e4};
constexpr double kLambdas[] = {0.0, 0.1, 1.0, 10.0};
const Interval kRanges[] = {{1e2, 1e3}, {1e3, 1e4}, {1e2, 1e4}};
const Interval kWideRange{1e2, 1e4};

ExperimentConfig finish(ExperimentConfig c, const PresetOptions& o) {
  if (o.epochs) c.training.epochs = *o.epochs;
  c.out = o.out;
  c.seeds = o.seeds;
  return c;
}

void add_seeds(std::vector<PresetJob>& jobs, const std::string& row, const ExperimentConfig& c,
               const PresetOptions& o) {
  for (const std::uint64_t s : o.seeds) jobs.push_back({row, c, s});
}

std::string lambda_cell(const ModelKind& m, double lambda) {
  return m.method == Method::ann ? "-" : shortest(lambda);
}

struct Setting {
  std::string name;
  std::function<void(ExperimentConfig&)> apply;
};

std::vector<Setting> table3_settings() {
  return {
      {"baseline", [](ExperimentConfig&) {}},
      {"2x10", [](ExperimentConfig& c) { c.network.neurons = 10; }},
      {"2x30", [](ExperimentConfig& c) { c.network.neurons = 30; }},
      {"swish", [](ExperimentConfig& c) { c.network.activation = Elementary::swish; }},
      {"sigmoid", [](ExperimentConfig& c) { c.network.activation = Elementary::sigmoid; }},
      {"sine", [](ExperimentConfig& c) { c.network.activation = Elementary::sin; }},
      {"ncol512", [](ExperimentConfig& c) { c.training.n_col = 512; }},
      {"ncol2048", [](ExperimentConfig& c) { c.training.n_col = 2048; }},
  };
}

}  // namespace

std::vector<std::string> preset_names() { return {"table2", "table3", "table4", "fig3", "fig4", "fig5", "fig6"}; }

std::vector<PresetJob> expand_preset(std::string_view name, const PresetOptions& o) {
  if (o.seeds.empty()) throw ConfigError("preset needs at least one seed");
  std::vector<PresetJob> jobs;
  if (name == "table2") {
    for (const ModelKind& m : kAllModels) {
      const std::vector<double> lambdas =
          m.method == Method::ann ? std::vector<double>{0.0} : std::vector<double>(std::begin(kLambdas), std::end(kLambdas));
      for (const double lambda : lambdas)
        for (const double rho : kRhos) {
          const ExperimentConfig c = finish(ExperimentConfig::defaults(m, rho, lambda), o);
          add_seeds(jobs, model_name(m) + "," + lambda_cell(m, lambda) + "," + shortest(rho), c, o);
        }
    }
  } else if (name == "table3") {
    for (const Setting& s : table3_settings())
      for (const double rho : kRhos) {
        ExperimentConfig c = ExperimentConfig::defaults(kWavePinn, rho, 1.0);
        s.apply(c);
        add_seeds(jobs, s.name + "," + shortest(rho), finish(c, o), o);
      }
  } else if (name == "table4") {
    for (const ModelKind& m : kAllModels)
      for (const Interval& r : kRanges) {
        const ExperimentConfig c = finish(ExperimentConfig::defaults(m, r, 1.0), o);
        add_seeds(jobs, model_name(m) + "," + shortest(r.lo) + "," + shortest(r.hi), c, o);
      }
  } else if (name == "fig3") {
    const ExperimentConfig c = finish(ExperimentConfig::defaults(kWavePinn, 1e4, 1.0), o);
    jobs.push_back({"wave-pinn", c, o.seeds.front()});
  } else if (name == "fig4") {
    for (const ModelKind& m : kAllModels)
      add_seeds(jobs, model_name(m), finish(ExperimentConfig::defaults(m, 1e3, 1.0), o), o);
  } else if (name == "fig5") {
    for (const ModelKind& m : kAllModels)
      add_seeds(jobs, model_name(m), finish(ExperimentConfig::defaults(m, kWideRange, 1.0), o), o);
  } else if (name == "fig6") {
    for (const ModelKind& m : {kWaveAnn, kWavePinn})
      jobs.push_back({model_name(m), finish(ExperimentConfig::defaults(m, kWideRange, 1.0), o), o.seeds.front()});
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  return jobs;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  return out;
}

// Rows in first-seen order, each with the L2 of its finished runs.
struct Grouped {
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> l2;
  std::map<std::string, int> diverged;
};

Grouped group_rows(const std::vector<PresetJob>& jobs, const std::vector<RunSummary>& runs) {
  Grouped g;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const std::string& row = jobs[i].row;
    if (!g.l2.count(row)) {
      g.order.push_back(row);
      g.l2[row];
      g.diverged[row] = 0;
    }
    if (runs[i].diverged || !std::isfinite(runs[i].final_l2))
      ++g.diverged[row];
    else
      g.l2[row].push_back(runs[i].final_l2);
  }
  return g;
}

std::string stats_table(const std::string& header, const Grouped& g) {
  std::ostringstream out;
  out << header << ",mean,std,n,diverged\n";
  for (const std::string& row : g.order) {
    const std::vector<double>& v = g.l2.at(row);
    out << row << ',';
    if (v.empty()) {
      out << "nan,nan";
    } else {
      const SeedStats s = aggregate(v);
      out << shortest(s.mean) << ',' << shortest(s.std);
    }
    out << ',' << v.size() << ',' << g.diverged.at(row) << '\n';
  }
  return out.str();
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

std::string fig3_csv(const PresetJob& job, const RunSummary& run) {
  const LoadedRun loaded = load_run(run.paths.checkpoint);
  const std::vector<double> xs = linspace(-5.0, 5.0, 1001);
  const double lambdas[] = {0.0, 0.1, 1.0, 10.0};
  const auto rows = wavefront_profile(loaded.surrogate(), job.config.problem, 1e4, 0.002, xs, lambdas);
  std::ostringstream out;
  out << "x,u_true,u_pred,f_lambda0,f_lambda0.1,f_lambda1,f_lambda10\n";
  for (const ProfileRow& r : rows) {
    out << shortest(r.x) << ',' << shortest(r.u_true) << ',' << shortest(r.u_pred);
    for (const double w : r.weighted) out << ',' << shortest(w);
    out << '\n';
  }
  return out.str();
}

std::string fig4_csv(const std::vector<PresetJob>& jobs, const std::vector<RunSummary>& runs) {
  std::ostringstream out;
  out << "model,seed,epoch,loss_total,test_mse\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    std::ifstream in(runs[i].paths.history);
    if (!in) throw std::runtime_error("cannot read " + runs[i].paths.history.string());
    std::string line;
    std::getline(in, line);
    const std::vector<std::string> header = split(line, ',');
    const auto col = [&](std::string_view name) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw std::runtime_error("history lacks column " + std::string(name));
      return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_total = col("loss_total");
    const std::size_t c_test = col("test_mse");
    while (std::getline(in, line)) {
      const std::vector<std::string> cells = split(line, ',');
      out << jobs[i].row << ',' << jobs[i].seed << ',' << cells.at(0) << ',' << cells.at(c_total) << ','
          << cells.at(c_test) << '\n';
    }
  }
  return out.str();
}

std::string fig5_csv(const std::vector<PresetJob>& jobs, const std::vector<RunSummary>& runs, int workers) {
  const std::vector<double> rhos = default_sweep_rhos();
  std::vector<std::vector<SweepPoint>> sweeps(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    if (runs[i].diverged) return;
    const LoadedRun loaded = load_run(runs[i].paths.checkpoint);
    sweeps[i] = rho_sweep(loaded.surrogate(), jobs[i].config.problem, rhos);
  });
  std::vector<std::string> models;
  for (const PresetJob& j : jobs)
    if (std::find(models.begin(), models.end(), j.row) == models.end()) models.push_back(j.row);
  std::ostringstream out;
  out << "model,rho,median,q25,q75\n";
  for (const std::string& m : models) {
    for (std::size_t k = 0; k < rhos.size(); ++k) {
      std::vector<double> v;
      for (std::size_t i = 0; i < jobs.size(); ++i)
        if (jobs[i].row == m && !sweeps[i].empty() && std::isfinite(sweeps[i][k].l2)) v.push_back(sweeps[i][k].l2);
      out << m << ',' << shortest(rhos[k]) << ',';
      if (v.empty()) {
        out << "nan,nan,nan\n";
        continue;
      }
      const SeedStats s = aggregate(v);
      out << shortest(s.median) << ',' << shortest(s.q25) << ',' << shortest(s.q75) << '\n';
    }
  }
  return out.str();
}

std::string fig6_csv(const std::vector<PresetJob>& jobs, const std::vector<RunSummary>& runs) {
  const std::vector<double> xs = linspace(-5.0, 5.0, 201);
  const std::vector<double> rhos = log_space(1e2, 1e4, 50);
  constexpr double t = 0.004;
  std::ostringstream out;
  out << "model,x,sqrt_rho,u_pred,abs_error\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (runs[i].diverged) continue;
    const LoadedRun loaded = load_run(runs[i].paths.checkpoint);
    for (const double rho : rhos)
      for (const double x : xs) {
        const double u = loaded.net.value<double>(loaded.params, {x, t, rho});
        const double err = std::abs(u - analytical(x, t, rho, jobs[i].config.problem.mu));
        out << jobs[i].row << ',' << shortest(x) << ',' << shortest(std::sqrt(rho)) << ',' << shortest(u) << ','
            << shortest(err) << '\n';
      }
  }
  return out.str();
}

}  // namespace

fs::path run_preset(std::string_view name, const PresetOptions& options, std::ostream* log) {
  const std::vector<PresetJob> jobs = expand_preset(name, options);
  std::vector<RunSummary> runs(jobs.size());
  std::mutex log_mutex;
  std::atomic<std::size_t> done{0};
  parallel_for(jobs.size(), options.workers, [&](std::size_t i) {
    runs[i] = run_seed(jobs[i].config, jobs[i].seed, true);
    const std::size_t finished = ++done;
    if (log) {
      std::lock_guard<std::mutex> lock(log_mutex);
      *log << '[' << finished << '/' << jobs.size() << "] " << jobs[i].config.label() << " seed " << jobs[i].seed
           << ": L2 " << shortest(runs[i].final_l2) << (runs[i].cached ? " (cached)" : "") << '\n';
    }
  });

  std::string body;
  if (name == "table2") {
    body = stats_table("model,lambda,rho", group_rows(jobs, runs));
  } else if (name == "table3") {
    body = stats_table("setting,rho", group_rows(jobs, runs));
  } else if (name == "table4") {
    body = stats_table("model,rho_min,rho_max", group_rows(jobs, runs));
  } else if (name == "fig3") {
    body = fig3_csv(jobs.front(), runs.front());
  } else if (name == "fig4") {
    body = fig4_csv(jobs, runs);
  } else if (name == "fig5") {
    body = fig5_csv(jobs, runs, options.workers);
  } else {
    body = fig6_csv(jobs, runs);
  }
  fs::create_directories(options.out);
  const fs::path path = options.out / (std::string(name) + ".csv");
  write_text(path, body);
  return path;
}

}  // namespace fisher
