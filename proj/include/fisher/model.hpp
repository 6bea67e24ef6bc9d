#pragma once

// Fully connected networks for u(x, t) and u(x, t; rho).
//
// Variants: standard (hidden layers fed by the scaled inputs) or wave (a
// 3-parameter affine layer z = th1*x + th2*t + th3 squeezes the inputs into a
// single latent variable first). Output activation is always a sigmoid.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fisher/autodiff.hpp"
#include "fisher/domain.hpp"

namespace fisher {

enum class Architecture { standard, wave };

Architecture parse_architecture(std::string_view name);
std::string_view to_string(Architecture a);

/// glorot: wave-layer weights drawn like any other layer.
/// opposed: same draw, then th2 flipped if needed so th1 * th2 <= 0, i.e. the
/// initial level sets already move toward +x.
enum class WaveInit { glorot, opposed };

WaveInit parse_wave_init(std::string_view name);
std::string_view to_string(WaveInit w);

struct NetworkConfig {
  Architecture architecture = Architecture::standard;
  bool generalizing = false;
  int hidden_layers = 2;
  int neurons = 20;
  Elementary activation = Elementary::tanh;
  WaveInit wave_init = WaveInit::opposed;

  /// 2x20 for discrete rho, 3x20 for generalizing networks.
  static NetworkConfig defaults(Architecture architecture, bool generalizing);
  void validate() const;
};

/// Input transformation. Standard mode maps every input onto [0, 1]; wave
/// mode keeps x, maps t onto [0, 1] and turns rho into (sqrt(rho), rho).
class FeatureScaler {
 public:
  struct Scaled {
    double x = 0.0;
    double t = 0.0;
    double rho = 0.0;   // standard mode only
    double rho1 = 0.0;  // wave mode only
    double rho2 = 0.0;  // wave mode only
  };

  FeatureScaler(Architecture mode, Interval x, Interval t, std::optional<Interval> rho = {});

  Scaled scale(const Point& p) const;
  /// d(scaled x)/dx and d(scaled t)/dt.
  double sx() const { return sx_; }
  double st() const { return st_; }
  Architecture mode() const { return mode_; }
  bool generalizing() const { return rho_.has_value(); }

 private:
  Architecture mode_;
  Interval x_;
  Interval t_;
  std::optional<Interval> rho_;
  double sx_;
  double st_;
};

struct LayerLayout {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  std::size_t weights = 0;  // offset of the row-major fan_out x fan_in block
  std::size_t biases = 0;   // offset of the fan_out biases
  std::size_t glorot_fan_in = 0;
  bool activated = true;  // false for the wave layer
  bool output = false;
};

/// Maps (layer, row, col) onto the flat parameter vector.
class ParameterLayout {
 public:
  explicit ParameterLayout(const NetworkConfig& config);

  const std::vector<LayerLayout>& layers() const { return layers_; }
  std::size_t size() const { return size_; }
  bool has_wave_layer() const { return wave_; }
  std::size_t weight_index(std::size_t layer, std::size_t row, std::size_t col) const;
  std::size_t bias_index(std::size_t layer, std::size_t row) const;

 private:
  std::vector<LayerLayout> layers_;
  std::size_t size_ = 0;
  bool wave_ = false;
};

using ParameterVector = std::vector<double>;

class Network {
 public:
  Network(NetworkConfig config, FeatureScaler scaler);
  /// Network whose scaler matches the given domain.
  static Network for_domain(const NetworkConfig& config, const Domain& domain);

  const NetworkConfig& config() const { return config_; }
  const FeatureScaler& scaler() const { return scaler_; }
  const ParameterLayout& layout() const { return layout_; }
  std::size_t parameter_count() const { return layout_.size(); }

  /// Glorot-uniform weights, zero biases; deterministic in `seed`.
  ParameterVector initialize(std::uint64_t seed) const;

  /// `rho` must be given exactly when the network is generalizing.
  double forward(std::span<const double> params, double x, double t, std::optional<double> rho = {}) const;
  Jet forward_jet(std::span<const double> params, double x, double t, std::optional<double> rho = {}) const;

  /// Per-point evaluation in an arbitrary floating type. `p.rho` is ignored
  /// by discrete-rho networks.
  template <class T>
  T value(std::span<const double> params, const Point& p) const;
  template <class T>
  BasicJet<T> jet(std::span<const double> params, const Point& p) const;

  struct TapeParams {
    std::vector<Var> weights;
    std::vector<Var> biases;
  };
  /// Records the parameter blocks once; reuse the result for every batch on
  /// the same tape so gradients accumulate into one parameter set.
  TapeParams bind(Tape& tape) const;
  /// 1 x B row of network outputs.
  Var record(Tape& tape, const TapeParams& params, std::span<const Point> points) const;
  TapeJet record_jet(Tape& tape, const TapeParams& params, std::span<const Point> points) const;

 private:
  template <class T>
  void input_jets(const Point& p, std::vector<BasicJet<T>>& out) const;
  void check_rho(const std::optional<double>& rho) const;

  NetworkConfig config_;
  FeatureScaler scaler_;
  ParameterLayout layout_;
};

// Checkpoint file: see README ("Checkpoint format").
struct Checkpoint {
  nlohmann::json header;
  ParameterVector params;
};

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& header,
                     std::span<const double> params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fisher
