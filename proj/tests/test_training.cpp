#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "fisher/training.hpp"

using namespace fisher;

namespace {

FisherProblem problem_at(double rho, double lambda, bool gen = false) {
  FisherProblem p;
  p.domain.rho = rho;
  if (gen) p.domain.rho_range = Interval{1e2, 1e4};
  p.lambda = lambda;
  return p;
}

TrainConfig short_run(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.n_data = 64;
  c.n_col = 64;
  c.test_points = 64;
  c.stride = 1;
  return c;
}

std::string csv(const RunRecord& r) {
  std::ostringstream out;
  write_history_csv(r, out);
  return out.str();
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("learning-rate staircase") {
    const TrainConfig c;
    CHECK(learning_rate(c, 0) == 0.001);
    CHECK(learning_rate(c, 999) == 0.001);
    CHECK(learning_rate(c, 1000) == doctest::Approx(0.00095).epsilon(1e-15));
    CHECK(learning_rate(c, 5000) == doctest::Approx(7.7378094e-4).epsilon(1e-7));
    CHECK_THROWS_AS(learning_rate(c, -1), UsageError);
  }

  TEST_CASE("defaults") {
    CHECK(TrainConfig::defaults(false).epochs == 50000);
    CHECK(TrainConfig::defaults(true).epochs == 100000);
    const TrainConfig c;
    CHECK(c.n_data == 1024);
    CHECK(c.n_col == 1024);
    CHECK(c.adam.beta1 == 0.9);
    CHECK(c.adam.beta2 == 0.999);
    CHECK(c.adam.eps == 1e-8);
  }

  TEST_CASE("Adam: zero gradient leaves parameters alone") {
    std::vector<double> p{0.5, -1.0};
    const std::vector<double> g{0.0, 0.0};
    OptimizerState s(2);
    CHECK(adam_step(p, g, s, 1e-3));
    CHECK(p == std::vector<double>{0.5, -1.0});
    CHECK(s.step == 1);
  }

  TEST_CASE("Adam: first step moves by about the learning rate") {
    std::vector<double> p{1.0};
    const std::vector<double> g{3.0};
    OptimizerState s(1);
    adam_step(p, g, s, 1e-3);
    CHECK(p[0] == doctest::Approx(1.0 - 1e-3 * 3.0 / (3.0 + 1e-8)).epsilon(1e-15));
  }

  TEST_CASE("Adam: matches the recurrence evaluated independently") {
    std::vector<double> p{0.2, -0.4, 1.5};
    const std::vector<std::vector<double>> grads{{0.3, -2.0, 1e-3}, {0.3, -2.0, 1e-3}, {-0.1, 0.5, 2.0}};
    OptimizerState s(3);
    long double m[3]{}, v[3]{}, ref[3]{0.2L, -0.4L, 1.5L};
    for (std::size_t k = 0; k < grads.size(); ++k) {
      const std::vector<double> before = p;
      REQUIRE(adam_step(p, grads[k], s, 1e-2));
      CHECK(s.step == k + 1);
      for (int i = 0; i < 3; ++i) {
        const long double g = grads[k][i];
        m[i] = 0.9L * m[i] + 0.1L * g;
        v[i] = 0.999L * v[i] + 0.001L * g * g;
        const long double mh = m[i] / (1 - std::pow(0.9L, k + 1.0L));
        const long double vh = v[i] / (1 - std::pow(0.999L, k + 1.0L));
        ref[i] -= 1e-2L * mh / (std::sqrt(vh) + 1e-8L);
        CHECK(p[i] == doctest::Approx(static_cast<double>(ref[i])).epsilon(1e-14));
        if (k < 2) CHECK(std::abs(p[i] - before[i]) <= 1e-2 * (1 + 1e-12));
      }
    }
  }

  TEST_CASE("Adam: a non-finite gradient is refused") {
    std::vector<double> p{1.0, 2.0};
    const std::vector<double> g{0.1, std::nan("")};
    OptimizerState s(2);
    CHECK_FALSE(adam_step(p, g, s, 1e-3));
    CHECK(p == std::vector<double>{1.0, 2.0});
    CHECK(s.step == 0);
    CHECK(s.m == std::vector<double>{0.0, 0.0});
    CHECK_THROWS_AS(adam_step(p, std::vector<double>{1.0}, s, 1e-3), UsageError);
  }

  TEST_CASE("tape gradients agree with finite differences for every variant") {
    for (Architecture a : {Architecture::standard, Architecture::wave}) {
      for (bool gen : {false, true}) {
        for (Method m : {Method::ann, Method::pinn}) {
          for (WeightGradient wg : {WeightGradient::through, WeightGradient::stop}) {
            FisherProblem p = problem_at(1e3, 1.0, gen);
            p.weight_gradient = wg;
            const Network net = Network::for_domain(NetworkConfig::defaults(a, gen), p.domain);
            ParameterVector params = net.initialize(21);
            Rng jitter = make_rng(3, 3);
            for (double& v : params) v += std::uniform_real_distribution<double>(-0.1, 0.1)(jitter);
            TrainConfig c = short_run(1);
            c.n_data = 4;
            c.n_col = 3;
            Rng rng = make_rng(1, 0);
            const SampleBatch batch = draw_batch(p, m, c, rng);
            const GradientCheck r = check_gradient(net, params, batch, p, m);
            CAPTURE(to_string(a));
            CAPTURE(gen);
            CAPTURE(to_string(m));
            CAPTURE(to_string(wg));
            CHECK(r.compared > 0);
            CHECK(r.max_rel_error <= 1e-5);
          }
        }
      }
    }
  }

  TEST_CASE("the gradient check catches a corrupted gradient") {
    const FisherProblem p = problem_at(1e2, 0.0);
    const Network net = Network::for_domain(NetworkConfig::defaults(Architecture::wave, false), p.domain);
    const ParameterVector params = net.initialize(1);
    Rng rng = make_rng(0, 0);
    TrainConfig c = short_run(1);
    c.n_data = 4;
    c.n_col = 3;
    const SampleBatch batch = draw_batch(p, Method::pinn, c, rng);
    const auto scaled = [](std::vector<double>& g) {
      for (double& v : g) v *= 1.01;
    };
    CHECK(check_gradient(net, params, batch, p, Method::pinn, 1e-5, 1e-8, scaled).max_rel_error > 5e-3);
  }

  TEST_CASE("stopped weights reproduce the gradient of the frozen-weight loss") {
    FisherProblem p = problem_at(1e3, 1.0);
    p.weight_gradient = WeightGradient::stop;
    const Network net = Network::for_domain(NetworkConfig::defaults(Architecture::standard, false), p.domain);
    const ParameterVector params = net.initialize(4);
    Rng rng = make_rng(2, 0);
    TrainConfig c = short_run(1);
    c.n_data = 5;
    c.n_col = 6;
    const SampleBatch batch = draw_batch(p, Method::pinn, c, rng);
    const std::vector<double> w = residual_weights(net, params, batch, p);
    for (double v : w) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
    }
    const LossGradient lg = loss_and_gradient(net, params, batch, p, Method::pinn);
    CHECK(lg.total == doctest::Approx(reference_loss<double>(net, params, batch, p, Method::pinn, w)).epsilon(1e-12));
    CHECK(lg.total == doctest::Approx(lg.data + lg.physics).epsilon(1e-15));
    // Changing one frozen weight must change the reference but not the tape.
    std::vector<double> other = w;
    other[0] *= 0.5;
    CHECK(reference_loss<double>(net, params, batch, p, Method::pinn, other) != doctest::Approx(lg.total));
  }

  TEST_CASE("ANN runs never evaluate the physics loss") {
    const FisherProblem p = problem_at(1e2, 1.0);
    const RunRecord r = train(p, NetworkConfig::defaults(Architecture::standard, false), Method::ann, short_run(3), 0);
    for (const EpochRecord& e : r.history) {
      CHECK(std::isnan(e.loss_physics));
      CHECK(e.loss_total == e.loss_data);
    }
    CHECK(csv(r).rfind("epoch,loss_total,loss_data,test_mse\n", 0) == 0);
    const RunRecord q = train(p, NetworkConfig::defaults(Architecture::standard, false), Method::pinn, short_run(3), 0);
    CHECK(csv(q).rfind("epoch,loss_total,loss_data,loss_physics,test_mse\n", 0) == 0);
  }

  TEST_CASE("ten epochs with the same seed are bit-identical") {
    for (Method m : {Method::ann, Method::pinn}) {
      const FisherProblem p = problem_at(1e3, 1.0);
      const NetworkConfig nc = NetworkConfig::defaults(Architecture::wave, false);
      TrainConfig c;
      c.epochs = 10;
      c.stride = 1;
      const RunRecord a = train(p, nc, m, c, 42);
      const RunRecord b = train(p, nc, m, c, 42);
      CHECK(csv(a) == csv(b));
      CHECK(a.params == b.params);
      CHECK(std::memcmp(&a.final_l2, &b.final_l2, sizeof(double)) == 0);
      const RunRecord other = train(p, nc, m, c, 43);
      CHECK(csv(a) != csv(other));
    }
  }

  TEST_CASE("recorded epochs are increasing and respect the stride") {
    TrainConfig c = short_run(25);
    c.stride = 10;
    const RunRecord r =
        train(problem_at(1e2, 0.0), NetworkConfig::defaults(Architecture::standard, false), Method::pinn, c, 0);
    std::vector<int> epochs;
    for (const EpochRecord& e : r.history) epochs.push_back(e.epoch);
    CHECK(epochs == std::vector<int>{0, 10, 20, 24});
    CHECK(r.epochs_completed == 25);
    CHECK_FALSE(r.diverged);
    CHECK(std::isfinite(r.final_l2));
  }

  TEST_CASE("divergence is recorded, not thrown") {
    TrainConfig c = short_run(50);
    c.lr0 = 1e300;
    RunRecord r;
    CHECK_NOTHROW(r = train(problem_at(1e4, 0.0), NetworkConfig::defaults(Architecture::standard, false),
                            Method::pinn, c, 0));
    CHECK(r.diverged);
    CHECK(r.diverged_epoch >= 0);
    CHECK(r.epochs_completed == r.diverged_epoch);
    CHECK(r.history.back().epoch == r.diverged_epoch);
    CHECK(std::isnan(r.final_l2));
  }

  TEST_CASE("smoothed training loss does not increase") {
    // 1000-epoch window means of the total loss for two baseline models.
    struct Case {
      Architecture a;
      Method m;
      double lambda;
    };
    for (const Case& k : {Case{Architecture::standard, Method::ann, 0.0}, Case{Architecture::wave, Method::pinn, 1.0}}) {
      TrainConfig c;
      c.epochs = 3000;
      c.stride = 1;
      c.test_points = 16;
      const RunRecord r = train(problem_at(1e2, k.lambda), NetworkConfig::defaults(k.a, false), k.m, c, 0);
      REQUIRE(r.history.size() == 3000);
      double previous = INFINITY;
      for (int w = 0; w < 3; ++w) {
        double mean = 0.0;
        for (int i = 0; i < 1000; ++i) mean += r.history[w * 1000 + i].loss_total / 1000.0;
        CAPTURE(w);
        CHECK(mean <= previous);
        previous = mean;
      }
    }
  }

  TEST_CASE("configuration validation") {
    TrainConfig c;
    c.lr0 = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.decay_rate = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.n_data = 2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.adam.beta2 = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(parse_method("svm"), ConfigError);
  }
}
