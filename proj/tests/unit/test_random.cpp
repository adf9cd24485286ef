#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <set>
#include <stdexcept>

#include "advmal/parallel.hpp"
#include "advmal/random.hpp"
#include "doctest.h"

using namespace advmal;

TEST_SUITE("random") {
  TEST_CASE("derive_seed separates streams and is a pure function") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 8; ++s)
      for (std::uint64_t stream = 0; stream < 64; ++stream) seen.insert(derive_seed(s, stream));
    CHECK(seen.size() == 8 * 64);
    CHECK(derive_seed(42, 3) == derive_seed(42, 3));
  }

  TEST_CASE("uniform_index stays in range and covers it") {
    Rng rng(1);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) ++hits[uniform_index(rng, 7)];
    for (int h : hits) CHECK(h > 800);
    CHECK_THROWS_AS(uniform_index(rng, 0), std::invalid_argument);
  }

  TEST_CASE("uniform_unit lies in [0,1) with mean near one half") {
    Rng rng(2);
    double sum = 0.0;
    for (int i = 0; i < 20000; ++i) {
      const double u = uniform_unit(rng);
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    CHECK(sum / 20000.0 == doctest::Approx(0.5).epsilon(0.02));
  }

  TEST_CASE("permutations and samples are distinct and replayable") {
    Rng a(9), b(9);
    const auto p = random_permutation(a, 50);
    CHECK(p == random_permutation(b, 50));
    auto sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);

    Rng c(3);
    const auto s = sample_without_replacement(c, 20, 20);
    CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 20);
    CHECK_THROWS_AS(sample_without_replacement(c, 3, 4), std::invalid_argument);
    CHECK(sample_without_replacement(c, 3, 0).empty());
  }

  TEST_CASE("bernoulli extremes") {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
      CHECK_FALSE(bernoulli(rng, 0.0));
      CHECK(bernoulli(rng, 1.0));
    }
  }

  TEST_CASE("parallel_for visits every index once") {
    for (std::size_t workers : {1u, 3u, 16u}) {
      std::vector<std::atomic<int>> visits(101);
      parallel_for(visits.size(), workers, [&](std::size_t i) { ++visits[i]; });
      for (const auto& v : visits) CHECK(v.load() == 1);
    }
    parallel_for(0, 4, [](std::size_t) { FAIL("no index expected"); });
  }

  TEST_CASE("parallel_for rethrows a body exception") {
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](std::size_t i) {
                                   if (i == 7) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
  }

  TEST_CASE("resolve_workers honors explicit counts and the environment") {
    CHECK(resolve_workers(5) == 5);
    ::setenv(kWorkersEnvVar, "3", 1);
    CHECK(resolve_workers(0) == 3);
    ::unsetenv(kWorkersEnvVar);
    CHECK(resolve_workers(0) == 1);
  }
}
