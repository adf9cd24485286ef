#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "advmal/datamodel.hpp"
#include "advmal/experiment.hpp"
#include "advmal/training.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace advmal;
using namespace advmal::testing;

namespace {

Dataset labelled(std::vector<int> labels, std::size_t dim = 4, std::uint64_t seed = 1) {
  std::mt19937_64 gen(seed);
  Dataset d;
  d.dim = dim;
  d.class_count = 1 + *std::max_element(labels.begin(), labels.end());
  for (int y : labels) {
    d.examples.push_back(random_binary(dim, gen));
    d.labels.push_back(y);
  }
  return d;
}

}  // namespace

TEST_SUITE("datamodel") {
  TEST_CASE("binarize thresholds with ties going up") {
    const auto theta = BinarizationThresholds::uniform(2);
    CHECK(binarize(std::vector<double>{0.2, 0.7}, theta) == FeatureVector{0, 1});
    CHECK(binarize(std::vector<double>{0.5, 0.4999}, theta) == FeatureVector{1, 0});
    const FeatureVector b{1, 0};
    CHECK(binarize(b, theta) == b);
    std::mt19937_64 gen(2);
    for (int t = 0; t < 50; ++t) {
      const auto x = random_vector(10, gen);
      const auto th = BinarizationThresholds{random_vector(10, gen)};
      const auto once = binarize(x, th);
      CHECK(binarize(once, th) == once);
      CHECK(is_binary(once));
    }
  }

  TEST_CASE("admissible against the coordinate-wise oracle") {
    ManipulationPolicy p = ManipulationPolicy::all_allowed(2);
    p.removal_allowed[0] = false;
    CHECK(admissible(FeatureVector{1, 0}, FeatureVector{1, 0}, p));
    CHECK_FALSE(admissible(FeatureVector{1, 0}, FeatureVector{0, 0}, p));
    CHECK_THROWS_AS(admissible(FeatureVector{0.5, 0}, FeatureVector{1, 0}, p),
                    std::invalid_argument);
    std::mt19937_64 gen(3);
    for (int t = 0; t < 500; ++t) {
      const auto policy = random_policy(8, gen);
      const auto x = random_binary(8, gen);
      const auto y = random_binary(8, gen);
      CHECK(admissible(x, y, policy) == oracle_admissible(x, y, policy));
    }
  }

  TEST_CASE("project_to_m rounds and reverts forbidden flips") {
    CHECK(project_to_m(FeatureVector{0, 0, 1}, std::vector<double>{0.7, 0.2, 0.9},
                       ManipulationPolicy::all_allowed(3)) == FeatureVector{1, 0, 1});
    ManipulationPolicy p = ManipulationPolicy::all_allowed(2);
    p.removal_allowed[1] = false;
    CHECK(project_to_m(FeatureVector{0, 1}, std::vector<double>{0.9, 0.1}, p) ==
          FeatureVector{1, 1});
    std::mt19937_64 gen(4);
    for (int t = 0; t < 1000; ++t) {
      const auto policy = random_policy(12, gen);
      const auto x = random_binary(12, gen);
      const auto out = project_to_m(x, random_vector(12, gen, -0.5, 1.5), policy);
      CHECK(oracle_admissible(x, out, policy));
    }
  }

  TEST_CASE("oversample floor") {
    std::vector<int> labels(100, 0);
    labels.insert(labels.end(), 10, 1);
    const Dataset d = labelled(labels);
    const Dataset o = oversample(d, 0.30, 5);
    const auto counts = o.class_counts();
    CHECK(counts[0] == 100);
    CHECK(counts[1] >= 30);
    // Originals first, replicas copied from the same class.
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(o.examples[i] == d.examples[i]);
    for (std::size_t i = d.size(); i < o.size(); ++i) {
      bool found = false;
      for (std::size_t j = 0; j < d.size(); ++j)
        found = found || (d.labels[j] == o.labels[i] && d.examples[j] == o.examples[i]);
      CHECK(found);
    }
    CHECK(oversample(d, 0.05, 5) == d);
    const Dataset balanced = labelled(std::vector<int>{0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1});
    CHECK(oversample(balanced, 1.0, 1) == balanced);
    CHECK_THROWS(oversample(d, 0.0, 1));
  }

  TEST_CASE("split sizes, disjointness and stratification") {
    const Dataset ten = labelled({0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
    const DatasetSplit s = split(ten, {0.6, 0.2, 0.2}, 3);
    CHECK(s.train.size() == 6);
    CHECK(s.validation.size() == 2);
    CHECK(s.test.size() == 2);
    const DatasetSplit again = split(ten, {0.6, 0.2, 0.2}, 3);
    CHECK(again.train == s.train);
    CHECK(again.test == s.test);

    std::vector<int> labels;
    for (int i = 0; i < 137; ++i) labels.push_back(i % 3 == 0 ? 1 : 0);
    Dataset d = labelled(labels, 24, 9);
    // Tag every example with a unique id in its first coordinates so the
    // parts can be matched back to source rows.
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t b = 0; b < 8; ++b) d.examples[i][b] = (i >> b) & 1 ? 1.0 : 0.0;
    const DatasetSplit parts = split(d, {0.6, 0.2, 0.2}, 11);
    std::multiset<std::vector<double>> seen;
    for (const Dataset* p : {&parts.train, &parts.validation, &parts.test})
      for (const auto& x : p->examples) seen.insert(std::vector<double>(x.begin(), x.begin() + 8));
    CHECK(seen.size() == d.size());
    CHECK(std::set<std::vector<double>>(seen.begin(), seen.end()).size() == d.size());

    const auto total = d.class_counts();
    const std::array<double, 3> fr{0.6, 0.2, 0.2};
    const Dataset* ps[3] = {&parts.train, &parts.validation, &parts.test};
    for (int k = 0; k < 3; ++k) {
      const auto c = ps[k]->class_counts();
      for (std::size_t cls = 0; cls < c.size(); ++cls)
        CHECK(std::abs(static_cast<double>(c[cls]) - fr[k] * total[cls]) <= 1.0);
    }
    CHECK_THROWS(split(d, {0.5, 0.2, 0.2}, 1));
  }

  TEST_CASE("synthetic generator") {
    SyntheticSpec spec;
    spec.dim = 50;
    spec.per_class = {20, 30};
    spec.flip_noise = 0.0;
    spec.seed = 8;
    const SyntheticData a = generate_synthetic(spec);
    CHECK(a.data.class_counts() == std::vector<std::size_t>{20, 30});
    for (std::size_t i = 0; i < a.data.size(); ++i)
      CHECK(a.data.examples[i] == a.prototypes[static_cast<std::size_t>(a.data.labels[i])]);
    const SyntheticData b = generate_synthetic(spec);
    CHECK(a.data == b.data);
    CHECK(a.policy == b.policy);
    spec.classes = 3;
    CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
  }

  TEST_CASE("a plain classifier learns the default synthetic task") {
    SyntheticSpec spec;
    spec.seed = 21;
    const SyntheticData syn = generate_synthetic(spec);
    const DatasetSplit parts = split(syn.data, {0.6, 0.2, 0.2}, 22);
    Mlp m({200, 32, 2}, Activation::kRelu);
    m.initialize(23);
    train_supervised(m, parts.train, {10, 64, 1e-3, 24});
    CHECK(training_accuracy(m, parts.test) >= 0.95);
  }

  TEST_CASE("sparse format parsing") {
    std::istringstream one("3 0:1 17:1\n2\n");
    const Dataset d = parse_sparse(one, 20, 4);
    CHECK(d.labels == std::vector<int>{3, 2});
    for (std::size_t j = 0; j < 20; ++j) {
      CHECK(d.examples[0][j] == ((j == 0 || j == 17) ? 1.0 : 0.0));
      CHECK(d.examples[1][j] == 0.0);
    }
    std::istringstream bad("1 5:1 3:1\n");
    CHECK_THROWS_AS(parse_sparse(bad, 10), ParseError);
    std::istringstream junk("x 1:1\n");
    CHECK_THROWS_AS(parse_sparse(junk), ParseError);
    std::istringstream wide("1 12:1\n");
    CHECK_THROWS_AS(parse_sparse(wide, 10), std::out_of_range);
  }

  TEST_CASE("sparse and policy files round-trip exactly") {
    const auto dir = scratch_dir("sparse");
    std::mt19937_64 gen(6);
    Dataset d = labelled({0, 1, 1, 0, 1}, 30, 6);
    d.examples[2][4] = 0.375;  // non-binary values survive too
    write_sparse(dir / "d.txt", d);
    CHECK(read_sparse(dir / "d.txt") == d);
    Dataset empty_rows;
    empty_rows.dim = 7;
    empty_rows.examples = {FeatureVector(7, 0.0)};
    empty_rows.labels = {1};
    write_sparse(dir / "e.txt", empty_rows);
    CHECK(read_sparse(dir / "e.txt") == empty_rows);

    const auto policy = random_policy(30, gen);
    write_policy(dir / "p.txt", policy);
    CHECK(read_policy(dir / "p.txt", 30) == policy);
    std::istringstream dup("0 1 1\n0 1 0\n");
    CHECK_THROWS_AS(parse_policy(dup), ParseError);
  }

  TEST_CASE("feature selection and policy restriction agree") {
    const Dataset d = labelled({0, 1, 0}, 6, 7);
    const std::vector<std::size_t> keep{4, 1};
    const Dataset s = d.select_features(keep);
    CHECK(s.dim == 2);
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(s.examples[i][0] == d.examples[i][4]);
      CHECK(s.examples[i][1] == d.examples[i][1]);
    }
    ManipulationPolicy p = ManipulationPolicy::additions_only(6);
    p.removal_allowed[1] = true;
    const auto r = p.restrict_to(keep);
    CHECK(r.removal_allowed == std::vector<bool>{false, true});
    CHECK(r.addition_allowed == std::vector<bool>{true, true});
  }

  TEST_CASE("validate rejects inconsistent datasets") {
    Dataset d = labelled({0, 1}, 3);
    d.labels[1] = 5;
    CHECK_THROWS_AS(d.validate(), std::out_of_range);
    d = labelled({0, 1}, 3);
    d.examples[0].push_back(0.0);
    CHECK_THROWS_AS(d.validate(), ShapeError);
  }

  TEST_CASE("attack pool is sorted, positive and capped") {
    Dataset d = labelled(std::vector<int>(40, 0), 4);
    for (std::size_t i = 0; i < d.size(); i += 3) d.labels[i] = 1;
    d.class_count = 2;
    const auto pool = select_attack_pool(d, 1, 5, 4);
    CHECK(pool.size() == 5);
    CHECK(std::is_sorted(pool.begin(), pool.end()));
    for (std::size_t i : pool) CHECK(d.labels[i] == 1);
    CHECK(select_attack_pool(d, 1, 1000, 4).size() == 14);
  }
}
