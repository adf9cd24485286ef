#include <cmath>
#include <numeric>
#include <random>

#include "advmal/classifier.hpp"
#include "advmal/numerics.hpp"
#include "advmal/training.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace advmal;
using namespace advmal::testing;

namespace {

Mlp zero_model(std::vector<std::size_t> sizes) {
  Mlp m(std::move(sizes), Activation::kRelu);
  m.assign_params(std::vector<double>(m.parameter_count(), 0.0));
  return m;
}

// Draws an input away from every hidden kink.
std::vector<double> smooth_input(const Mlp& model, std::mt19937_64& gen) {
  for (;;) {
    auto x = random_vector(model.input_dim(), gen);
    if (model.hidden_activation() == Activation::kSigmoid ||
        min_hidden_preactivation(model, x) > 1e-3)
      return x;
  }
}

}  // namespace

TEST_SUITE("numerics") {
  TEST_CASE("zero weights give a uniform distribution") {
    const Mlp m = zero_model({5, 4, 3});
    const auto p = forward(m, std::vector<double>{0.3, 1, 0, 0.2, 0.9});
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0));
    for (double z : logits(m, std::vector<double>(5, 1.0))) CHECK(z == 0.0);
  }

  TEST_CASE("identity layer on the origin is symmetric") {
    Mlp m({2, 2}, Activation::kRelu);
    m.assign_params(std::vector<double>{1, 0, 0, 1, 0, 0});
    const auto p = forward(m, std::vector<double>{0, 0});
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
  }

  TEST_CASE("logits [2, 0] give the closed-form softmax") {
    Mlp m({1, 2}, Activation::kRelu);
    m.assign_params(std::vector<double>{0, 0, 2, 0});
    const auto p = forward(m, std::vector<double>{0.5});
    CHECK(p[0] == doctest::Approx(std::exp(2.0) / (std::exp(2.0) + 1.0)).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / (std::exp(2.0) + 1.0)).epsilon(1e-12));
  }

  TEST_CASE("forward matches the straight-line oracle for every activation") {
    std::mt19937_64 gen(11);
    for (Activation a : {Activation::kRelu, Activation::kElu, Activation::kSigmoid,
                         Activation::kLinear}) {
      for (int trial = 0; trial < 10; ++trial) {
        const Mlp m = random_mlp({6, 5, 4, 3}, a, gen());
        const auto x = random_vector(6, gen);
        const auto want = oracle_logits(m, x);
        const auto got = logits(m, x);
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
        const auto p = forward(m, x);
        const auto q = oracle_softmax(want);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) < 1e-12);
      }
    }
  }

  TEST_CASE("softmax is normalized and consistent with logits, even for huge inputs") {
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 50; ++trial) {
      const Mlp m = random_mlp({4, 8, 5}, Activation::kRelu, gen(), 5.0);
      const auto x = random_vector(4, gen, -50.0, 50.0);
      const auto p = forward(m, x);
      CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
      const auto q = softmax(logits(m, x));
      for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) < 1e-9);
    }
    const auto s = softmax(std::vector<double>{1000.0, 0.0});
    CHECK(s[0] == doctest::Approx(1.0));
    CHECK(std::isfinite(s[1]));
  }

  TEST_CASE("cross_entropy values and label checks") {
    CHECK(cross_entropy(std::vector<double>{1.0, 0.0}, 0) == 0.0);
    CHECK(cross_entropy(std::vector<double>{0.5, 0.5}, 1) == doctest::Approx(std::log(2.0)));
    CHECK(cross_entropy(std::vector<double>{1.0, 0.0}, 1) == doctest::Approx(-std::log(1e-12)));
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 20; ++trial) {
      auto p = oracle_softmax(random_vector(4, gen, -3, 3));
      const int y = trial % 4;
      CHECK(cross_entropy(p, y) == doctest::Approx(-std::log(p[y])).epsilon(1e-14));
    }
    CHECK_THROWS_AS(cross_entropy(std::vector<double>{0.5, 0.5}, 2), std::out_of_range);
    CHECK_THROWS_AS(cross_entropy(std::vector<double>{0.5, 0.5}, -1), std::out_of_range);
  }

  TEST_CASE("single-layer input gradient equals W^T (p - onehot)") {
    std::mt19937_64 gen(14);
    for (int trial = 0; trial < 10; ++trial) {
      const Mlp m = random_mlp({5, 3}, Activation::kRelu, gen());
      const auto x = random_vector(5, gen);
      const int y = trial % 3;
      auto p = oracle_softmax(oracle_logits(m, x));
      p[y] -= 1.0;
      const Layer& layer = m.layers()[0];
      const auto g = backward(m, x, y).input_grad;
      for (std::size_t c = 0; c < 5; ++c) {
        double want = 0.0;
        for (std::size_t r = 0; r < 3; ++r) want += layer.weights(r, c) * p[r];
        CHECK(g[c] == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("input and parameter gradients match central differences") {
    std::mt19937_64 gen(15);
    std::size_t compared = 0;
    for (Activation a : {Activation::kRelu, Activation::kElu, Activation::kSigmoid}) {
      for (int trial = 0; trial < 8; ++trial) {
        const Mlp m = random_mlp({5, 6, 4, 3}, a, gen());
        const auto x = smooth_input(m, gen);
        const int y = trial % 3;
        const GradientBundle g = backward(m, x, y);
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double fd = central_difference([&](double h) {
            auto xp = x;
            xp[i] += h;
            return oracle_loss(m, xp, y);
          });
          CHECK(gradients_agree(g.input_grad[i], fd));
          ++compared;
        }
        const auto params = m.flatten_params();
        const auto grads = g.flatten_params();
        REQUIRE(grads.size() == params.size());
        for (std::size_t k = 0; k < params.size(); ++k) {
          const double fd = central_difference([&](double h) {
            Mlp probe = m;
            auto pp = params;
            pp[k] += h;
            probe.assign_params(pp);
            return oracle_loss(probe, x, y);
          });
          CHECK(gradients_agree(grads[k], fd));
          ++compared;
        }
      }
    }
    CHECK(compared > 1000);
  }

  TEST_CASE("input gradient vanishes at a saturated minimum") {
    Mlp m({2, 2}, Activation::kRelu);
    m.assign_params(std::vector<double>{40, 0, -40, 0, 0, 0});
    const auto g = backward(m, std::vector<double>{1.0, 0.0}, 0).input_grad;
    for (double v : g) CHECK(std::abs(v) <= 1e-6);
  }

  TEST_CASE("classifier view exposes the network's gradient") {
    std::mt19937_64 gen(16);
    const Mlp m = random_mlp({4, 5, 2}, Activation::kElu, gen());
    const MlpClassifierView view(m);
    const auto x = random_vector(4, gen);
    double loss = 0.0;
    const auto g = view.loss_gradient(x, 1, &loss);
    const auto want = backward(m, x, 1).input_grad;
    CHECK(loss == doctest::Approx(oracle_loss(m, x, 1)).epsilon(1e-12));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(want[i]).epsilon(1e-12));
    CHECK(view.predict(x) == static_cast<int>(argmax(forward(m, x))));
  }

  TEST_CASE("adam first step is a signed learning-rate step") {
    AdamState s(3, 0.01);
    std::vector<double> w{1.0, 1.0, 1.0};
    adam_step(s, w, std::vector<double>{5.0, -0.002, 0.0}, Direction::kMinimize);
    CHECK(w[0] == doctest::Approx(0.99).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(1.01).epsilon(1e-5));
    CHECK(w[2] == 1.0);

    AdamState up(1, 0.01);
    std::vector<double> v{0.0};
    adam_step(up, v, std::vector<double>{3.0}, Direction::kMaximize);
    CHECK(v[0] == doctest::Approx(0.01).epsilon(1e-6));
  }

  TEST_CASE("adam descends w^2 monotonically along a hand-simulated trace") {
    AdamState s(1, 0.1);
    std::vector<double> w{1.0};
    // Independent replay of the bias-corrected update.
    double m = 0.0, v = 0.0, ref = 1.0;
    for (int t = 1; t <= 3; ++t) {
      const double before = w[0];
      adam_step(s, w, std::vector<double>{2.0 * w[0]}, Direction::kMinimize);
      const double g = 2.0 * ref;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      ref -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
      CHECK(w[0] < before);
      CHECK(w[0] == doctest::Approx(ref).epsilon(1e-12));
    }
  }

  TEST_CASE("training: zero epochs, separable data and replay") {
    Dataset d;
    d.dim = 2;
    std::mt19937_64 gen(17);
    for (int i = 0; i < 200; ++i) {
      auto x = random_vector(2, gen);
      if (std::abs(x[0] - x[1]) < 0.1) continue;
      d.labels.push_back(x[0] > x[1] ? 1 : 0);
      d.examples.push_back(std::move(x));
    }
    Mlp m({2, 16, 2}, Activation::kRelu);
    m.initialize(3);
    Mlp untouched = m;
    train_supervised(untouched, d, {0, 32, 1e-2, 1});
    CHECK(untouched == m);

    Mlp a = m, b = m;
    const TrainTrace ta = train_supervised(a, d, {50, 16, 1e-2, 5});
    const TrainTrace tb = train_supervised(b, d, {50, 16, 1e-2, 5});
    CHECK(a == b);
    CHECK(ta.epoch_loss == tb.epoch_loss);
    CHECK(training_accuracy(a, d) >= 0.99);
  }

  TEST_CASE("initialization is seed-deterministic and shape errors are reported") {
    Mlp a({10, 7, 2}, Activation::kRelu), b({10, 7, 2}, Activation::kRelu);
    a.initialize(4);
    b.initialize(4);
    CHECK(a == b);
    b.initialize(5);
    CHECK_FALSE(a == b);
    CHECK_THROWS_AS(a.evaluate(std::vector<double>(3, 0.0)), ShapeError);
    CHECK_THROWS_AS(parse_activation("tanh"), ConfigError);
    CHECK(parse_activation("elu") == Activation::kElu);
  }
}
