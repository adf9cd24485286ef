#include <cmath>
#include <numeric>
#include <random>

#include "advmal/defenses.hpp"
#include "advmal/training.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace advmal;
using namespace advmal::testing;

namespace {

Mlp constant_head(std::size_t dim, std::vector<double> probs) {
  Mlp m({dim, probs.size()}, Activation::kRelu);
  std::vector<double> params(m.parameter_count(), 0.0);
  for (std::size_t k = 0; k < probs.size(); ++k)
    params[dim * probs.size() + k] = std::log(probs[k]);
  m.assign_params(params);
  return m;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

HardenedClassifier plain_member(const Mlp& head) {
  return HardenedClassifier(head.input_dim(), iota(head.input_dim()), std::nullopt, std::nullopt,
                            head);
}

Dataset small_task(std::uint64_t seed, std::size_t dim = 30, std::size_t per_class = 60) {
  SyntheticSpec spec;
  spec.dim = dim;
  spec.per_class = {per_class, per_class};
  spec.seed = seed;
  return generate_synthetic(spec).data;
}

DefenseConfig quick_config(std::uint64_t seed) {
  DefenseConfig c;
  c.hidden = {12};
  c.epochs = 3;
  c.batch_size = 16;
  c.learning_rate = 3e-3;
  c.oversample_ratio = 0.0;
  c.seed = seed;
  c.inner = {0.1, 5, 0, 0.1};
  return c;
}

}  // namespace

TEST_SUITE("defenses") {
  TEST_CASE("salt and pepper noise") {
    std::mt19937_64 gen(1);
    const auto x = random_binary(50, gen);
    CHECK(salt_pepper(x, 0.0, 3) == x);
    const auto soft = random_vector(50, gen);
    const auto all = salt_pepper(soft, 1.0, 3);
    CHECK(is_binary(all));
    CHECK(salt_pepper(x, 0.3, 4) == salt_pepper(x, 0.3, 4));
    std::size_t changed = 0;
    const auto noisy = salt_pepper(soft, 0.3, 5);
    for (std::size_t i = 0; i < 50; ++i) changed += noisy[i] != soft[i];
    CHECK(changed == 15);
    CHECK_THROWS(salt_pepper(x, 1.5, 1));
  }

  TEST_CASE("reconstruction loss") {
    const Reconstructor identity = [](std::span<const double> v) {
      return std::vector<double>(v.begin(), v.end());
    };
    const FeatureVector x{1, 0, 1, 1, 0, 0, 1, 0};
    CHECK(dae_loss(identity, x, x, x) == 0.0);
    FeatureVector noisy = x;
    noisy[0] = 0;
    noisy[1] = 1;
    noisy[5] = 1;
    CHECK(dae_loss(identity, x, noisy, x) == doctest::Approx(3.0 / 8.0));

    std::mt19937_64 gen(2);
    DenoisingAutoencoder ae(8, 4);
    ae.initialize(7);
    for (int t = 0; t < 10; ++t) {
      const auto clean = random_binary(8, gen);
      const auto a = random_vector(8, gen);
      const auto b = random_vector(8, gen);
      auto mse = [&](const std::vector<double>& in) {
        const auto r = oracle_logits(ae.decoder, oracle_logits(ae.encoder, in));
        double s = 0.0;
        for (std::size_t i = 0; i < 8; ++i) s += (r[i] - clean[i]) * (r[i] - clean[i]);
        return s / 8.0;
      };
      CHECK(dae_loss(ae, clean, a, b) == doctest::Approx(mse(a) + mse(b)).epsilon(1e-12));
    }
    CHECK(DenoisingAutoencoder::default_latent(1000) == 160);
    CHECK(DenoisingAutoencoder::default_latent(40) == 40);
  }

  TEST_CASE("inner maximizer: zero budget and single-trial replay") {
    std::mt19937_64 gen(3);
    const Mlp m = random_mlp({10, 8, 2}, Activation::kElu, gen());
    const MlpClassifierView view(m);
    const auto x = random_binary(10, gen);
    const auto policy = ManipulationPolicy::all_allowed(10);
    Rng rng(1);
    const InnerMaxResult zero = inner_maximize(view, x, 0, &policy, {0.1, 0, 0, 0.1}, rng);
    CHECK(zero.x_adv == x);
    CHECK(zero.delta == std::vector<double>(10, 0.0));

    const InnerMaxConfig cfg{0.05, 12, 0, 0.1};
    Rng r1(9);
    const InnerMaxResult res = inner_maximize(view, x, 0, &policy, cfg, r1);
    // Deterministic replay of one clipped Adam ascent from delta = 0.
    std::vector<double> delta(10, 0.0), point(x.begin(), x.end());
    AdamState adam(10, 0.05);
    for (int t = 0; t < 12; ++t) {
      adam_step(adam, delta, view.loss_gradient(point, 0), Direction::kMaximize);
      for (std::size_t i = 0; i < 10; ++i) {
        point[i] = std::clamp(x[i] + delta[i], 0.0, 1.0);
        delta[i] = point[i] - x[i];
      }
    }
    const auto rounded = project_to_m(x, point, policy);
    REQUIRE(res.trial_losses.size() == 1);
    CHECK(res.trial_losses[0] == doctest::Approx(view.loss(rounded, 0)).epsilon(1e-12));
    if (res.trial) CHECK(res.x_adv == rounded);
  }

  TEST_CASE("inner maximizer keeps the best rounded trial and never loses to x") {
    std::mt19937_64 gen(4);
    for (int t = 0; t < 20; ++t) {
      const Mlp m = random_mlp({16, 10, 2}, Activation::kRelu, gen());
      const MlpClassifierView view(m);
      const auto x = random_binary(16, gen);
      const auto policy = random_policy(16, gen);
      Rng rng(gen());
      const int y = static_cast<int>(t % 2);
      const InnerMaxResult r = inner_maximize(view, x, y, t % 3 ? &policy : nullptr,
                                              {0.1, 8, 3, 0.2}, rng);
      CHECK(r.trial_losses.size() == 4);
      CHECK(r.loss >= view.loss(x, y));
      for (double l : r.trial_losses) CHECK(r.loss >= l);
      CHECK(is_binary(r.x_adv));
      if (t % 3) CHECK(oracle_admissible(x, r.x_adv, policy));
      CHECK(r.loss == doctest::Approx(view.loss(r.x_adv, y)));
    }
  }

  TEST_CASE("min-max objective") {
    std::mt19937_64 gen(5);
    for (int t = 0; t < 20; ++t) {
      const Mlp m = random_mlp({6, 5, 2}, Activation::kRelu, gen());
      const MlpClassifierView view(m);
      const auto x = random_binary(6, gen);
      const auto xa = random_binary(6, gen);
      CHECK(adversarial_training_loss(view, x, 1, x) == doctest::Approx(2 * view.loss(x, 1)));
      CHECK(adversarial_training_loss(view, x, 1, xa) >= view.loss(x, 1));
      CHECK(adversarial_training_loss(view, x, 1, xa) ==
            doctest::Approx(oracle_loss(m, x, 1) + oracle_loss(m, xa, 1)).epsilon(1e-12));
    }
  }

  TEST_CASE("hardened classifier gradients") {
    std::mt19937_64 gen(6);
    const Mlp head = random_mlp({4, 6, 2}, Activation::kSigmoid, gen());
    const std::vector<std::size_t> features{7, 2, 5, 0};
    const HardenedClassifier h(9, features, std::nullopt, std::nullopt, head);
    const auto x = random_vector(9, gen);
    const auto g = h.loss_gradient(x, 1);
    for (std::size_t i = 0; i < 9; ++i) {
      const double fd = central_difference([&](double eps) {
        auto xp = x;
        xp[i] += eps;
        return h.loss(xp, 1);
      });
      CHECK(gradients_agree(g[i], fd));
    }
    CHECK(g[1] == 0.0);

    // Straight-through: binarization passes the inner gradient unchanged.
    const HardenedClassifier b(9, features, BinarizationThresholds::uniform(4), std::nullopt, head);
    const auto gb = b.loss_gradient(x, 1);
    const auto inner = MlpClassifierView(head).loss_gradient(b.transform(x), 1);
    for (std::size_t j = 0; j < 4; ++j) CHECK(gb[features[j]] == doctest::Approx(inner[j]));

    DenoisingAutoencoder ae(4, 3);
    ae.initialize(2);
    const Mlp head3 = random_mlp({3, 5, 2}, Activation::kElu, gen());
    const HardenedClassifier d(9, features, std::nullopt, ae, head3);
    const auto gd = d.loss_gradient(x, 0);
    for (std::size_t i = 0; i < 9; ++i) {
      const double fd = central_difference([&](double eps) {
        auto xp = x;
        xp[i] += eps;
        return d.loss(xp, 0);
      });
      CHECK(gradients_agree(gd[i], fd));
    }
    CHECK_THROWS_AS(HardenedClassifier(3, {5}, std::nullopt, std::nullopt, random_mlp({1, 2}, Activation::kRelu, 1)),
                    ShapeError);
  }

  TEST_CASE("plain path replays supervised training exactly") {
    const Dataset d = small_task(10);
    DefenseConfig c = quick_config(77);
    DefenseFlags off{false, false, false, true};
    const auto policy = ManipulationPolicy::all_allowed(d.dim);
    const HardenedClassifier h = train_hardened(d, &policy, c, off);

    Mlp ref({d.dim, 12, 2}, Activation::kRelu);
    ref.initialize(derive_seed(77, 2));
    train_supervised(ref, d, {c.epochs, c.batch_size, c.learning_rate, derive_seed(77, 4)});
    CHECK(h.head() == ref);
  }

  TEST_CASE("zero-step adversarial training tracks plain training") {
    const Dataset d = small_task(11);
    DefenseConfig c = quick_config(78);
    c.inner.steps = 0;
    const auto policy = ManipulationPolicy::all_allowed(d.dim);
    const HardenedClassifier plain = train_hardened(d, &policy, c, {false, false, false, true});
    const HardenedClassifier doubled = train_hardened(d, &policy, c, {true, false, false, true});
    // CE(x) + CE(x) doubles the gradient; Adam is scale-free up to epsilon.
    const auto a = plain.head().flatten_params();
    const auto b = doubled.head().flatten_params();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-5);
  }

  TEST_CASE("hardened training is seed-deterministic and the DAE ignores the head") {
    const Dataset d = small_task(12);
    DefenseConfig c = quick_config(79);
    const auto policy = ManipulationPolicy::additions_only(d.dim);
    const DefenseFlags at_dae{true, true, false, true};
    HardenedTrace ta, tb;
    const HardenedClassifier a = train_hardened(d, &policy, c, at_dae, &ta);
    const HardenedClassifier b = train_hardened(d, &policy, c, at_dae, &tb);
    CHECK(a == b);
    CHECK(ta.epoch_classifier_loss == tb.epoch_classifier_loss);
    CHECK(ta.epoch_dae_loss.size() == c.epochs);

    // Without the inner maximizer the autoencoder's updates cannot depend on
    // the classifier head.
    const DefenseFlags dae_only{false, true, false, true};
    DefenseConfig wide = c;
    wide.hidden = {20, 7};
    const HardenedClassifier p = train_hardened(d, &policy, c, dae_only);
    const HardenedClassifier q = train_hardened(d, &policy, wide, dae_only);
    REQUIRE(p.dae().has_value());
    CHECK(*p.dae() == *q.dae());
    CHECK_FALSE(p.head().layer_sizes() == q.head().layer_sizes());
  }

  TEST_CASE("config validation") {
    DefenseConfig c;
    c.subspace_ratio = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = DefenseConfig{};
    c.ensemble_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = DefenseConfig{};
    c.oversample_ratio = 2.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = DefenseConfig{};
    c.perturbed_classes = {1};
    CHECK(c.perturbs(1));
    CHECK_FALSE(c.perturbs(0));
    CHECK(DefenseConfig{}.perturbs(0));
    const Dataset d = small_task(13);
    CHECK_THROWS(train_hardened(d, nullptr, quick_config(1), DefenseFlags{}));
  }

  TEST_CASE("ensemble mean and degenerate cases") {
    const EnsembleClassifier two({plain_member(constant_head(3, {0.6, 0.4})),
                                  plain_member(constant_head(3, {0.2, 0.8}))});
    const auto p = ensemble_predict(two, std::vector<double>{0, 1, 0});
    CHECK(p[0] == doctest::Approx(0.4));
    CHECK(p[1] == doctest::Approx(0.6));
    CHECK(two.predict(std::vector<double>{0, 1, 0}) == 1);

    std::mt19937_64 gen(14);
    const Mlp head = random_mlp({5, 4, 3}, Activation::kRelu, gen());
    const HardenedClassifier member = plain_member(head);
    const EnsembleClassifier same({member, member, member});
    const EnsembleClassifier solo({member});
    for (int t = 0; t < 20; ++t) {
      const auto x = random_vector(5, gen);
      const auto want = member.probabilities(x);
      const auto got = same.probabilities(x);
      const auto one = solo.probabilities(x);
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(std::abs(got[k] - want[k]) < 1e-12);
        CHECK(std::abs(one[k] - want[k]) < 1e-12);
      }
      CHECK(solo.predict(x) == member.predict(x));
    }

    std::vector<HardenedClassifier> members;
    for (int i = 0; i < 4; ++i) members.push_back(plain_member(random_mlp({5, 6, 3}, Activation::kElu, gen())));
    const EnsembleClassifier mix(members);
    for (int t = 0; t < 20; ++t) {
      const auto x = random_vector(5, gen);
      const auto got = mix.probabilities(x);
      double total = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        double mean = 0.0;
        for (const auto& m : members) mean += oracle_softmax(oracle_logits(m.head(), x))[k];
        CHECK(got[k] == doctest::Approx(mean / 4.0).epsilon(1e-12));
        total += got[k];
      }
      CHECK(total == doctest::Approx(1.0));
      const auto g = mix.loss_gradient(x, 2);
      for (std::size_t i = 0; i < 5; ++i) {
        const double fd = central_difference([&](double eps) {
          auto xp = x;
          xp[i] += eps;
          return mix.loss(xp, 2);
        });
        CHECK(gradients_agree(g[i], fd));
      }
    }
  }

  TEST_CASE("ensemble training: subspaces, seeds and the single-member case") {
    const Dataset d = small_task(15, 100, 40);
    const auto policy = ManipulationPolicy::additions_only(100);
    DefenseConfig c = quick_config(80);
    c.epochs = 1;
    const DefenseFlags plain{false, false, false, true};

    const EnsembleClassifier one = train_ensemble(d, &policy, c, plain);
    DefenseConfig member = c;
    member.seed = ensemble_member_seed(80, 0);
    CHECK(one.members()[0] == train_hardened(d, &policy, member, plain));

    c.ensemble_size = 3;
    c.subspace_ratio = 0.5;
    c.data_fraction = 0.8;
    c.workers = 2;
    std::vector<HardenedTrace> traces;
    const EnsembleClassifier e = train_ensemble(d, &policy, c, plain, &traces);
    CHECK(traces.size() == 3);
    for (const auto& m : e.members()) CHECK(m.features().size() == 50);
    CHECK_FALSE(e.members()[0].features() == e.members()[1].features());
    CHECK_FALSE(e.members()[0].head() == e.members()[1].head());
    c.workers = 1;
    CHECK(train_ensemble(d, &policy, c, plain) == e);
  }
}
