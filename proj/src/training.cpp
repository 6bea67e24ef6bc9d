#include "fisher/training.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "fisher/evaluation.hpp"
#include "fisher/quad.hpp"

namespace fisher {

Method parse_method(std::string_view name) {
  if (name == "ann") return Method::ann;
  if (name == "pinn") return Method::pinn;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Method m) { return m == Method::ann ? "ann" : "pinn"; }

TrainConfig TrainConfig::defaults(bool generalizing) {
  TrainConfig c;
  c.epochs = generalizing ? 100000 : 50000;
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (!(lr0 > 0.0)) throw ConfigError("initial learning rate must be positive");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw ConfigError("decay rate must lie in (0, 1]");
  if (decay_every < 1) throw ConfigError("decay interval must be at least one epoch");
  if (n_data < 3) throw ConfigError("need at least three labeled points per epoch");
  if (n_col < 1) throw ConfigError("need at least one collocation point per epoch");
  if (stride < 1) throw ConfigError("record stride must be at least one epoch");
  if (test_points < 1) throw ConfigError("need at least one test point");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0))
    throw ConfigError("invalid Adam hyperparameters");
}

double learning_rate(const TrainConfig& config, int epoch) {
  if (epoch < 0) throw UsageError("epoch must be non-negative");
  return config.lr0 * std::pow(config.decay_rate, epoch / config.decay_every);
}

bool adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state, double lr,
               const AdamConfig& adam) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw UsageError("Adam step with mismatched lengths");
  for (const double g : grads)
    if (!std::isfinite(g)) return false;
  ++state.step;
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = adam.beta1 * state.m[i] + (1.0 - adam.beta1) * g;
    state.v[i] = adam.beta2 * state.v[i] + (1.0 - adam.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + adam.eps);
  }
  return true;
}

SampleBatch draw_batch(const FisherProblem& problem, Method method, const TrainConfig& config, Rng& rng) {
  SampleBatch batch;
  if (method == Method::ann) {
    batch.labeled = sample_ann_data(config.n_data, problem, rng);
  } else {
    batch.labeled = sample_boundary(config.n_data, problem, rng);
    batch.collocation = sample_collocation(config.n_col, problem, rng);
  }
  return batch;
}

namespace {

std::vector<Point> labeled_points(const SampleBatch& batch) {
  std::vector<Point> out;
  out.reserve(batch.labeled.size());
  for (const LabeledPoint& l : batch.labeled) out.push_back(l.point);
  return out;
}

Array labeled_targets(const SampleBatch& batch) {
  Array y(1, static_cast<Eigen::Index>(batch.labeled.size()));
  for (std::size_t i = 0; i < batch.labeled.size(); ++i) y(0, static_cast<Eigen::Index>(i)) = batch.labeled[i].u;
  return y;
}

Array collocation_rho(const SampleBatch& batch) {
  Array r(1, static_cast<Eigen::Index>(batch.collocation.size()));
  for (std::size_t i = 0; i < batch.collocation.size(); ++i)
    r(0, static_cast<Eigen::Index>(i)) = batch.collocation[i].rho;
  return r;
}

}  // namespace

LossTerms record_loss(Tape& tape, const Network& net, const Network::TapeParams& params, const SampleBatch& batch,
                      const FisherProblem& problem, Method method) {
  LossTerms terms;
  const std::vector<Point> data_points = labeled_points(batch);
  const Var prediction = net.record(tape, params, data_points);
  terms.data = record_data_loss(tape, prediction, labeled_targets(batch));
  if (method == Method::ann) {
    terms.total = terms.data;
    return terms;
  }
  const TapeJet u = net.record_jet(tape, params, batch.collocation);
  const Array rho = collocation_rho(batch);
  const Var f = record_residual(tape, u, tape.constant(rho), problem.mu);
  const Var omega = record_weights(tape, u.v, rho, problem.lambda, problem.weight_gradient);
  terms.physics = record_physics_loss(tape, f, omega);
  terms.total = tape.add(terms.data, terms.physics);
  return terms;
}

LossGradient loss_and_gradient(const Network& net, std::span<const double> params, const SampleBatch& batch,
                               const FisherProblem& problem, Method method) {
  Tape tape(params);
  const Network::TapeParams tp = net.bind(tape);
  const LossTerms terms = record_loss(tape, net, tp, batch, problem, method);
  LossGradient out;
  out.total = terms.total.scalar();
  out.data = terms.data.scalar();
  if (terms.physics.valid()) out.physics = terms.physics.scalar();
  out.gradient = tape.gradient(terms.total);
  return out;
}

std::vector<double> residual_weights(const Network& net, std::span<const double> params, const SampleBatch& batch,
                                     const FisherProblem& problem) {
  std::vector<double> w;
  w.reserve(batch.collocation.size());
  for (const Point& p : batch.collocation) w.push_back(weight(net.value<double>(params, p), p.rho, problem.lambda));
  return w;
}

template <class T>
T reference_loss(const Network& net, std::span<const double> params, const SampleBatch& batch,
                 const FisherProblem& problem, Method method, std::span<const double> frozen_weights) {
  if (batch.labeled.empty()) throw UsageError("reference loss needs labeled points");
  T data(0);
  for (const LabeledPoint& l : batch.labeled) {
    const T d = T(l.u) - net.value<T>(params, l.point);
    data += d * d;
  }
  data /= T(batch.labeled.size());
  if (method == Method::ann) return data;
  const bool frozen = problem.weight_gradient == WeightGradient::stop;
  if (frozen && frozen_weights.size() != batch.collocation.size())
    throw UsageError("one frozen weight per collocation point");
  T phys(0);
  for (std::size_t i = 0; i < batch.collocation.size(); ++i) {
    const Point& p = batch.collocation[i];
    const BasicJet<T> u = net.jet<T>(params, p);
    const T f = residual(u, T(p.rho), T(problem.mu));
    const T w = frozen ? T(frozen_weights[i]) : weight(u.v, T(p.rho), T(problem.lambda));
    const T wf = w * f;
    phys += wf * wf;
  }
  phys /= T(batch.collocation.size());
  return data + phys;
}

template double reference_loss<double>(const Network&, std::span<const double>, const SampleBatch&,
                                       const FisherProblem&, Method, std::span<const double>);
template long double reference_loss<long double>(const Network&, std::span<const double>, const SampleBatch&,
                                                 const FisherProblem&, Method, std::span<const double>);
template Quad reference_loss<Quad>(const Network&, std::span<const double>, const SampleBatch&, const FisherProblem&,
                                   Method, std::span<const double>);

GradientCheck check_gradient(const Network& net, std::span<const double> params, const SampleBatch& batch,
                             const FisherProblem& problem, Method method, double step, double floor,
                             const GradientTamper& tamper) {
  LossGradient lg = loss_and_gradient(net, params, batch, problem, method);
  if (tamper) tamper(lg.gradient);
  const std::vector<double> frozen =
      method == Method::pinn ? residual_weights(net, params, batch, problem) : std::vector<double>{};
  // Wave-layer weights multiply inputs that reach sqrt(rho) x and rho t in
  // generalizing mode; their steps shrink by the input magnitude so every
  // probe moves the latent variable by about `step`.
  std::vector<double> steps(params.size(), step);
  if (net.layout().has_wave_layer()) {
    const LayerLayout& w = net.layout().layers().front();
    double mx = 1.0, mt = 1.0;
    const auto widen = [&](const Point& p) {
      const FeatureScaler::Scaled s = net.scaler().scale(p);
      const double r1 = net.config().generalizing ? s.rho1 : 1.0;
      const double r2 = net.config().generalizing ? s.rho2 : 1.0;
      mx = std::max(mx, std::abs(r1 * s.x));
      mt = std::max(mt, std::abs(r2 * s.t));
    };
    for (const LabeledPoint& l : batch.labeled) widen(l.point);
    for (const Point& p : batch.collocation) widen(p);
    steps[w.weights] = step / mx;
    steps[w.weights + 1] = step / mt;
  }
  // Richardson-extrapolated central difference (error O(h^4)) in long
  // double, or in quad precision when rounding of the long double loss
  // (about eps |L| / h) could blur the component.
  const long double eps = std::numeric_limits<long double>::epsilon();
  const long double loss_scale = std::max(1.0L, std::abs(static_cast<long double>(lg.total)));
  std::vector<double> probe(params.begin(), params.end());
  const auto central = [&](std::size_t k, double h, auto zero) {
    using T = decltype(zero);
    const double keep = probe[k];
    probe[k] = keep + h;
    const double hi = probe[k];
    const T up = reference_loss<T>(net, probe, batch, problem, method, frozen);
    probe[k] = keep - h;
    const double lo = probe[k];
    const T down = reference_loss<T>(net, probe, batch, problem, method, frozen);
    probe[k] = keep;
    return (up - down) / T(hi - lo);
  };
  const auto richardson = [&](std::size_t k, auto zero) {
    using T = decltype(zero);
    return static_cast<double>((T(4) * central(k, steps[k] / 2, zero) - central(k, steps[k], zero)) / T(3));
  };
  GradientCheck out;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double g = lg.gradient[k];
    double fd = richardson(k, 0.0L);
    const long double rounding = 16 * eps * loss_scale / steps[k];
    if (rounding > 1e-7L * std::max(std::abs(g), std::abs(fd))) fd = richardson(k, Quad());
    const double scale = std::max(std::abs(g), std::abs(fd));
    if (scale <= floor) continue;
    ++out.compared;
    out.max_rel_error = std::max(out.max_rel_error, std::abs(g - fd) / scale);
  }
  return out;
}

namespace {

// Fixed labeled interior set for the learning curves, drawn once per run.
constexpr std::uint64_t kTestStream = 0x7e57'0000'0000'0001ULL;

std::vector<LabeledPoint> learning_curve_set(const FisherProblem& problem, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, kTestStream);
  std::vector<LabeledPoint> out;
  for (const Point& p : sample_collocation(n, problem, rng))
    out.push_back({p, analytical(p.x, p.t, p.rho, problem.mu)});
  return out;
}

double test_mse(const Network& net, std::span<const double> params, std::span<const LabeledPoint> set) {
  double acc = 0.0;
  for (const LabeledPoint& l : set) {
    const double d = l.u - net.value<double>(params, l.point);
    acc += d * d;
  }
  return acc / static_cast<double>(set.size());
}

}  // namespace

RunRecord train(const FisherProblem& problem, const NetworkConfig& net_config, Method method,
                const TrainConfig& config, std::uint64_t seed, const EpochCallback& on_record) {
  problem.validate();
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const Network net = Network::for_domain(net_config, problem.domain);

  RunRecord record;
  record.method = method;
  record.seed = seed;
  record.params = net.initialize(seed);

  const std::vector<LabeledPoint> test_set = learning_curve_set(problem, config.test_points, seed);
  OptimizerState state(record.params.size());
  std::vector<double> grad(record.params.size(), 0.0);
  Tape tape;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(epoch));
    const SampleBatch batch = draw_batch(problem, method, config, rng);
    tape.reset(record.params);
    const Network::TapeParams tp = net.bind(tape);
    const LossTerms terms = record_loss(tape, net, tp, batch, problem, method);

    EpochRecord row;
    row.epoch = epoch;
    row.loss_total = terms.total.scalar();
    row.loss_data = terms.data.scalar();
    if (terms.physics.valid()) row.loss_physics = terms.physics.scalar();

    bool ok = std::isfinite(row.loss_total);
    if (ok) {
      tape.gradient(terms.total, grad);
    }
    if (epoch % config.stride == 0 || epoch == config.epochs - 1 || !ok) {
      row.test_mse = test_mse(net, record.params, test_set);
      record.history.push_back(row);
      if (on_record) on_record(row);
    }
    if (ok) ok = adam_step(record.params, grad, state, learning_rate(config, epoch), config.adam);
    if (!ok) {
      record.diverged = true;
      record.diverged_epoch = epoch;
      break;
    }
    record.epochs_completed = epoch + 1;
  }

  if (!record.diverged) {
    const Surrogate model = network_surrogate(net, record.params);
    record.final_l2 = problem.domain.generalizing() ? interior_l2(model, problem) : l2_error(model, problem);
  }
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

namespace {

void put(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

void write_history_csv(const RunRecord& record, std::ostream& out) {
  const bool physics = record.method == Method::pinn;
  out << "epoch,loss_total,loss_data" << (physics ? ",loss_physics" : "") << ",test_mse\n";
  for (const EpochRecord& r : record.history) {
    out << r.epoch << ',';
    put(out, r.loss_total);
    out << ',';
    put(out, r.loss_data);
    if (physics) {
      out << ',';
      put(out, r.loss_physics);
    }
    out << ',';
    put(out, r.test_mse);
    out << '\n';
  }
}

}  // namespace fisher
