#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "fisher/model.hpp"
#include "fisher/physics.hpp"
#include "fisher/sampling.hpp"

namespace fisher {

/// ann: data loss on interior samples only. pinn: IC/BC data loss plus the
/// weighted physics loss on collocation points.
enum class Method { ann, pinn };

Method parse_method(std::string_view name);
std::string_view to_string(Method m);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  int epochs = 50000;
  double lr0 = 1e-3;
  double decay_rate = 0.95;
  int decay_every = 1000;
  std::size_t n_data = 1024;
  std::size_t n_col = 1024;
  int stride = 100;
  std::size_t test_points = 1024;
  AdamConfig adam;

  /// 50k epochs for discrete rho, 100k for generalizing networks.
  static TrainConfig defaults(bool generalizing);
  void validate() const;
};

/// Staircase decay: lr0 * decay_rate^floor(epoch / decay_every).
double learning_rate(const TrainConfig& config, int epoch);

struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit OptimizerState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One Adam update. Returns false (and leaves everything untouched) when the
/// gradient contains a non-finite entry.
bool adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state, double lr,
               const AdamConfig& adam = {});

/// Fresh training batch for one epoch.
SampleBatch draw_batch(const FisherProblem& problem, Method method, const TrainConfig& config, Rng& rng);

struct LossTerms {
  Var total;
  Var data;
  Var physics;  // invalid for Method::ann
};

LossTerms record_loss(Tape& tape, const Network& net, const Network::TapeParams& params, const SampleBatch& batch,
                      const FisherProblem& problem, Method method);

struct LossGradient {
  double total = 0.0;
  double data = 0.0;
  double physics = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> gradient;
};

/// Loss and its parameter gradient through the tape.
LossGradient loss_and_gradient(const Network& net, std::span<const double> params, const SampleBatch& batch,
                               const FisherProblem& problem, Method method);

/// Current residual weights of the collocation points.
std::vector<double> residual_weights(const Network& net, std::span<const double> params, const SampleBatch& batch,
                                     const FisherProblem& problem);

/// The same loss evaluated point by point without the tape. With
/// WeightGradient::stop the residual weights are held at `frozen_weights`,
/// otherwise they are recomputed from u and the span is ignored. Used as the
/// finite-difference reference.
template <class T>
T reference_loss(const Network& net, std::span<const double> params, const SampleBatch& batch,
                 const FisherProblem& problem, Method method, std::span<const double> frozen_weights);

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t compared = 0;  // components with |g| above the floor
};

using GradientTamper = std::function<void(std::vector<double>&)>;

/// Tape gradient against long-double central differences of reference_loss.
/// Components where both |g| and the difference estimate are below `floor` are
/// skipped. `tamper` edits the tape gradient before comparison (negative
/// control for the checker itself).
GradientCheck check_gradient(const Network& net, std::span<const double> params, const SampleBatch& batch,
                             const FisherProblem& problem, Method method, double step = 1e-5, double floor = 1e-8,
                             const GradientTamper& tamper = {});

struct EpochRecord {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_data = 0.0;
  double loss_physics = std::numeric_limits<double>::quiet_NaN();
  double test_mse = 0.0;
};

struct RunRecord {
  std::vector<EpochRecord> history;
  ParameterVector params;
  Method method = Method::pinn;
  std::uint64_t seed = 0;
  int epochs_completed = 0;
  bool diverged = false;
  int diverged_epoch = -1;
  double final_l2 = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

RunRecord train(const FisherProblem& problem, const NetworkConfig& net_config, Method method,
                const TrainConfig& config, std::uint64_t seed, const EpochCallback& on_record = {});

/// CSV body: epoch,loss_total,loss_data[,loss_physics],test_mse
void write_history_csv(const RunRecord& record, std::ostream& out);

}  // namespace fisher
