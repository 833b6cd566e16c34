#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ssgrn/selection.hpp"
#include "ssgrn/simulate.hpp"

using namespace ssgrn;

TEST_CASE("aicc formula", "[selection]") {
  CHECK(aicc(0.0, 10, 0) == 0.0);
  CHECK(aicc(-100.0, 100, 5) == Catch::Approx(200.0 + 10.0 * 100.0 / 94.0).epsilon(1e-14));
  CHECK(aicc(-100.0, 100, 5) == Catch::Approx(210.6383).margin(1e-4));
  CHECK_THROWS_AS(aicc(-50.0, 12, 11), InfeasibleError);
  CHECK_THROWS_AS(aicc(-50.0, 12, 12), InfeasibleError);
  CHECK_NOTHROW(aicc(-50.0, 12, 10));
}

TEST_CASE("AICc correction is never negative", "[selection][property]") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<Index> n_dist(2, 100000);
  std::uniform_real_distribution<double> ll(-1e5, 1e5);
  for (int i = 0; i < 1000; ++i) {
    const Index N = n_dist(rng);
    std::uniform_int_distribution<Index> p_dist(0, N - 2);
    const Index P = p_dist(rng);
    const double l = ll(rng);
    const double correction = aicc(l, N, P) - aic(l, P);
    const double expected = 2.0 * P * (P + 1.0) / (static_cast<double>(N) - P - 1.0);
    CHECK(correction >= 0.0);
    CHECK(correction == Catch::Approx(expected).epsilon(1e-9).margin(1e-9));
  }
}

TEST_CASE("select_k", "[selection]") {
  const ModelParams truth = random_ground_truth(3, 1, 4);
  const auto sim = generate(truth, 8, 20, 4);
  FitConfig cfg;
  cfg.max_iter = 200;

  SECTION("single candidate") {
    const auto r = select_k(sim.dataset, {1}, cfg);
    REQUIRE(r.entries.size() == 1);
    CHECK(r.chosen_k == 1);
  }
  SECTION("report is sorted and internally consistent") {
    const auto r = select_k(sim.dataset, {2, 0, 1, 2}, cfg);
    REQUIRE(r.entries.size() == 3);
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      const auto& e = r.entries[i];
      CHECK(e.k == static_cast<Index>(i));
      CHECK(e.P == param_count(3, e.k));
      CHECK(e.N == 3 * 8 * 20);
      CHECK(e.aicc == Catch::Approx(aicc(e.loglik, e.N, e.P)).epsilon(1e-14));
    }
    const SelectionEntry* best = nullptr;
    for (const auto& e : r.entries)
      if (e.converged && (!best || e.aicc < best->aicc)) best = &e;
    REQUIRE(best != nullptr);
    CHECK(r.chosen_k == best->k);
  }
  SECTION("deterministic") {
    const auto a = select_k(sim.dataset, {0, 1}, cfg);
    const auto b = select_k(sim.dataset, {0, 1}, cfg);
    CHECK(a.chosen_k == b.chosen_k);
    CHECK(a.entries[1].loglik == b.entries[1].loglik);
  }
  SECTION("infeasible candidates are dropped; none left is an error") {
    const auto r = select_k(sim.dataset, {0, 1000}, cfg);
    CHECK(r.entries.size() == 1);
    CHECK_THROWS_AS(select_k(sim.dataset, {1000}, cfg), InfeasibleError);
    CHECK_THROWS_AS(select_k(sim.dataset, {}, cfg), InfeasibleError);
  }
}
