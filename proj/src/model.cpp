#include "fisher/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include "fisher/quad.hpp"

namespace fisher {

Architecture parse_architecture(std::string_view name) {
  if (name == "standard") return Architecture::standard;
  if (name == "wave") return Architecture::wave;
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

std::string_view to_string(Architecture a) { return a == Architecture::wave ? "wave" : "standard"; }

WaveInit parse_wave_init(std::string_view name) {
  if (name == "glorot") return WaveInit::glorot;
  if (name == "opposed") return WaveInit::opposed;
  throw ConfigError("unknown wave-layer initialization '" + std::string(name) + "'");
}

std::string_view to_string(WaveInit w) { return w == WaveInit::opposed ? "opposed" : "glorot"; }

NetworkConfig NetworkConfig::defaults(Architecture architecture, bool generalizing) {
  NetworkConfig c;
  c.architecture = architecture;
  c.generalizing = generalizing;
  c.hidden_layers = generalizing ? 3 : 2;
  c.neurons = 20;
  return c;
}

void NetworkConfig::validate() const {
  if (hidden_layers < 1) throw ConfigError("network needs at least one hidden layer");
  if (neurons < 1) throw ConfigError("hidden layers need at least one neuron");
  switch (activation) {
    case Elementary::tanh:
    case Elementary::swish:
    case Elementary::sigmoid:
    case Elementary::sin:
      break;
    default:
      throw ConfigError("hidden activation must be tanh, swish, sigmoid or sine");
  }
}

// ---------------------------------------------------------------------------

FeatureScaler::FeatureScaler(Architecture mode, Interval x, Interval t, std::optional<Interval> rho)
    : mode_(mode), x_(x), t_(t), rho_(rho) {
  if (!(x.hi > x.lo)) throw ConfigError("degenerate x range");
  if (!(t.hi > t.lo)) throw ConfigError("degenerate t range");
  if (rho && !(rho->hi > rho->lo)) throw ConfigError("degenerate rho range");
  sx_ = mode == Architecture::wave ? 1.0 : 1.0 / x.width();
  st_ = 1.0 / t.width();
}

FeatureScaler::Scaled FeatureScaler::scale(const Point& p) const {
  Scaled s;
  s.t = t_.unit(p.t);
  if (mode_ == Architecture::wave) {
    s.x = p.x;
    s.rho1 = std::sqrt(p.rho);
    s.rho2 = p.rho;
  } else {
    s.x = x_.unit(p.x);
    if (rho_) s.rho = rho_->unit(p.rho);
  }
  return s;
}

// ---------------------------------------------------------------------------

ParameterLayout::ParameterLayout(const NetworkConfig& config) {
  config.validate();
  const auto width = static_cast<std::size_t>(config.neurons);
  std::size_t offset = 0;
  auto add = [&](std::size_t fan_in, std::size_t fan_out, std::size_t glorot_fan_in, bool activated, bool output) {
    LayerLayout l;
    l.fan_in = fan_in;
    l.fan_out = fan_out;
    l.weights = offset;
    offset += fan_in * fan_out;
    l.biases = offset;
    offset += fan_out;
    l.glorot_fan_in = glorot_fan_in;
    l.activated = activated;
    l.output = output;
    layers_.push_back(l);
  };

  std::size_t fan_in = config.generalizing ? 3 : 2;
  if (config.architecture == Architecture::wave) {
    // The generalizing wave layer sees (rho1 x, rho2 t) but draws its
    // initial weights as if all three raw inputs were connected.
    add(2, 1, config.generalizing ? 3 : 2, false, false);
    wave_ = true;
    fan_in = 1;
  }
  for (int i = 0; i < config.hidden_layers; ++i) {
    add(fan_in, width, fan_in, true, false);
    fan_in = width;
  }
  add(fan_in, 1, fan_in, true, true);
  size_ = offset;
}

std::size_t ParameterLayout::weight_index(std::size_t layer, std::size_t row, std::size_t col) const {
  const LayerLayout& l = layers_.at(layer);
  if (row >= l.fan_out || col >= l.fan_in) throw UsageError("weight index out of range");
  return l.weights + row * l.fan_in + col;
}

std::size_t ParameterLayout::bias_index(std::size_t layer, std::size_t row) const {
  const LayerLayout& l = layers_.at(layer);
  if (row >= l.fan_out) throw UsageError("bias index out of range");
  return l.biases + row;
}

// ---------------------------------------------------------------------------

Network::Network(NetworkConfig config, FeatureScaler scaler)
    : config_(config), scaler_(scaler), layout_(config) {
  if (scaler_.mode() != config_.architecture) throw ConfigError("feature scaler mode does not match the architecture");
  if (scaler_.generalizing() != config_.generalizing)
    throw ConfigError("feature scaler and network disagree on generalizing mode");
}

Network Network::for_domain(const NetworkConfig& config, const Domain& domain) {
  if (config.generalizing != domain.generalizing())
    throw ConfigError(config.generalizing ? "generalizing network needs a rho range"
                                          : "discrete-rho network cannot take a rho range");
  return Network(config, FeatureScaler(config.architecture, domain.x, domain.t, domain.rho_range));
}

ParameterVector Network::initialize(std::uint64_t seed) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x676c6fu};
  std::mt19937_64 rng(seq);
  ParameterVector params(layout_.size(), 0.0);
  for (const LayerLayout& l : layout_.layers()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.glorot_fan_in + l.fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < l.fan_in * l.fan_out; ++i) params[l.weights + i] = dist(rng);
  }
  if (config_.wave_init == WaveInit::opposed && layout_.has_wave_layer()) {
    const LayerLayout& w = layout_.layers().front();
    double& a = params[w.weights];
    double& b = params[w.weights + 1];
    if (a * b > 0.0) b = -b;
  }
  return params;
}

void Network::check_rho(const std::optional<double>& rho) const {
  if (config_.generalizing && !rho) throw UsageError("generalizing network needs a rho input");
  if (!config_.generalizing && rho) throw UsageError("discrete-rho network does not take a rho input");
}

double Network::forward(std::span<const double> params, double x, double t, std::optional<double> rho) const {
  check_rho(rho);
  return value<double>(params, {x, t, rho.value_or(0.0)});
}

Jet Network::forward_jet(std::span<const double> params, double x, double t, std::optional<double> rho) const {
  check_rho(rho);
  return jet<double>(params, {x, t, rho.value_or(0.0)});
}

template <class T>
void Network::input_jets(const Point& p, std::vector<BasicJet<T>>& out) const {
  const FeatureScaler::Scaled s = scaler_.scale(p);
  const T sx = T(scaler_.sx());
  const T st = T(scaler_.st());
  out.clear();
  if (config_.architecture == Architecture::wave) {
    const T r1 = config_.generalizing ? T(s.rho1) : T(1);
    const T r2 = config_.generalizing ? T(s.rho2) : T(1);
    out.push_back({r1 * T(s.x), r1 * sx, T(0), T(0)});
    out.push_back({r2 * T(s.t), T(0), r2 * st, T(0)});
  } else {
    out.push_back({T(s.x), sx, T(0), T(0)});
    out.push_back({T(s.t), T(0), st, T(0)});
    if (config_.generalizing) out.push_back(BasicJet<T>::constant(T(s.rho)));
  }
}

template <class T>
BasicJet<T> Network::jet(std::span<const double> params, const Point& p) const {
  if (params.size() != layout_.size()) throw UsageError("parameter vector has the wrong length");
  std::vector<BasicJet<T>> h;
  std::vector<BasicJet<T>> z;
  input_jets<T>(p, h);
  for (const LayerLayout& l : layout_.layers()) {
    z.assign(l.fan_out, BasicJet<T>{});
    for (std::size_t r = 0; r < l.fan_out; ++r) {
      BasicJet<T> acc = BasicJet<T>::constant(T(params[l.biases + r]));
      for (std::size_t c = 0; c < l.fan_in; ++c) acc = acc + T(params[l.weights + r * l.fan_in + c]) * h[c];
      if (l.output) {
        acc = jet_unary(Elementary::sigmoid, acc);
      } else if (l.activated) {
        acc = jet_unary(config_.activation, acc);
      }
      z[r] = acc;
    }
    h.swap(z);
  }
  return h.front();
}

template <class T>
T Network::value(std::span<const double> params, const Point& p) const {
  if (params.size() != layout_.size()) throw UsageError("parameter vector has the wrong length");
  std::vector<BasicJet<T>> inputs;
  input_jets<T>(p, inputs);
  std::vector<T> h;
  for (const auto& j : inputs) h.push_back(j.v);
  std::vector<T> z;
  for (const LayerLayout& l : layout_.layers()) {
    z.assign(l.fan_out, T(0));
    for (std::size_t r = 0; r < l.fan_out; ++r) {
      T acc = T(params[l.biases + r]);
      for (std::size_t c = 0; c < l.fan_in; ++c) acc += T(params[l.weights + r * l.fan_in + c]) * h[c];
      if (l.output) {
        acc = elementary_derivative<T>(Elementary::sigmoid, 0, acc);
      } else if (l.activated) {
        acc = elementary_derivative<T>(config_.activation, 0, acc);
      }
      z[r] = acc;
    }
    h.swap(z);
  }
  return h.front();
}

template double Network::value<double>(std::span<const double>, const Point&) const;
template long double Network::value<long double>(std::span<const double>, const Point&) const;
template Jet Network::jet<double>(std::span<const double>, const Point&) const;
template BasicJet<long double> Network::jet<long double>(std::span<const double>, const Point&) const;
template Quad Network::value<Quad>(std::span<const double>, const Point&) const;
template BasicJet<Quad> Network::jet<Quad>(std::span<const double>, const Point&) const;

// ---------------------------------------------------------------------------

Network::TapeParams Network::bind(Tape& tape) const {
  if (tape.parameter_count() != layout_.size()) throw UsageError("tape is bound to a parameter vector of the wrong length");
  TapeParams tp;
  for (const LayerLayout& l : layout_.layers()) {
    tp.weights.push_back(tape.parameter(l.weights, static_cast<Eigen::Index>(l.fan_out), static_cast<Eigen::Index>(l.fan_in)));
    tp.biases.push_back(tape.parameter(l.biases, static_cast<Eigen::Index>(l.fan_out), 1));
  }
  return tp;
}

namespace {

struct InputBatch {
  Array v;
  Array dx;
  Array dt;
};

InputBatch input_batch(const Network& net, std::span<const Point> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  const NetworkConfig& cfg = net.config();
  const FeatureScaler& sc = net.scaler();
  const Eigen::Index rows = (cfg.architecture == Architecture::wave || !cfg.generalizing) ? 2 : 3;
  InputBatch b{Array::Zero(rows, n), Array::Zero(rows, n), Array::Zero(rows, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const FeatureScaler::Scaled s = sc.scale(points[static_cast<std::size_t>(i)]);
    if (cfg.architecture == Architecture::wave) {
      const double r1 = cfg.generalizing ? s.rho1 : 1.0;
      const double r2 = cfg.generalizing ? s.rho2 : 1.0;
      b.v(0, i) = r1 * s.x;
      b.v(1, i) = r2 * s.t;
      b.dx(0, i) = r1 * sc.sx();
      b.dt(1, i) = r2 * sc.st();
    } else {
      b.v(0, i) = s.x;
      b.v(1, i) = s.t;
      if (cfg.generalizing) b.v(2, i) = s.rho;
      b.dx(0, i) = sc.sx();
      b.dt(1, i) = sc.st();
    }
  }
  return b;
}

}  // namespace

Var Network::record(Tape& tape, const TapeParams& params, std::span<const Point> points) const {
  if (points.empty()) throw UsageError("empty batch");
  const InputBatch in = input_batch(*this, points);
  Var h = tape.constant(in.v);
  const auto& layers = layout_.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Var z = tape.add(tape.matmul(params.weights[k], h), params.biases[k]);
    if (layers[k].output) {
      z = tape.unary(Elementary::sigmoid, z);
    } else if (layers[k].activated) {
      z = tape.unary(config_.activation, z);
    }
    h = z;
  }
  return h;
}

TapeJet Network::record_jet(Tape& tape, const TapeParams& params, std::span<const Point> points) const {
  if (points.empty()) throw UsageError("empty batch");
  const InputBatch in = input_batch(*this, points);
  TapeJet h{tape.constant(in.v), tape.constant(in.dx), tape.constant(in.dt),
            tape.constant(Array::Zero(in.v.rows(), in.v.cols()))};
  const auto& layers = layout_.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const Var w = params.weights[k];
    TapeJet z{tape.add(tape.matmul(w, h.v), params.biases[k]), tape.matmul(w, h.dx), tape.matmul(w, h.dt),
              tape.matmul(w, h.dxx)};
    if (layers[k].output) {
      z = jet_unary(tape, Elementary::sigmoid, z);
    } else if (layers[k].activated) {
      z = jet_unary(tape, config_.activation, z);
    }
    h = z;
  }
  return h;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'F', 'I', 'S', 'H', 'P', 'N', 'N', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& header, std::span<const double> params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint '" + path.string() + "'");
  const std::string text = header.dump();
  const auto header_len = static_cast<std::uint32_t>(text.size());
  const auto count = static_cast<std::uint64_t>(params.size());
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) throw ConfigError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw ConfigError("'" + path.string() + "' is not a checkpoint file");
  std::uint32_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
  std::string text(header_len, '\0');
  in.read(text.data(), header_len);
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in) throw ConfigError("truncated checkpoint '" + path.string() + "'");
  Checkpoint ck;
  ck.header = nlohmann::json::parse(text);
  ck.params.resize(count);
  in.read(reinterpret_cast<char*>(ck.params.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw ConfigError("truncated checkpoint '" + path.string() + "'");
  return ck;
}

}  // namespace fisher
