#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "bks/errors.hpp"
#include "bks/estimators.hpp"
#include "bks/predicate.hpp"
#include "bks/rng.hpp"
#include "bks/sketch.hpp"
#include "doctest.h"

namespace {

bks::BottomKSketch fixture(std::vector<bks::SketchEntry> entries,
                           std::optional<double> threshold,
                           std::optional<double> total = std::nullopt,
                           bks::RankFamily family =
                               bks::RankFamily::exponential) {
  bks::BottomKSketch s;
  s.k = entries.size();
  s.family = family;
  s.entries = std::move(entries);
  s.r_k_plus_1 = threshold;
  s.total_weight = total;
  s.validate();
  return s;
}

double total_of(const bks::AdjustedWeightAssignment& a) {
  return std::accumulate(a.adjusted.begin(), a.adjusted.end(), 0.0);
}

TEST_CASE("rank-conditioning weights follow the closed forms") {
  const double tau = 0.8;
  const auto ws = fixture({{"a", 2.0, 0.1, {}}, {"b", 0.5, 0.3, {}}}, tau);
  const auto ws_adj = bks::rc_adjusted_weights(ws);
  CHECK(ws_adj.method == bks::EstimatorMethod::ws_rc);
  CHECK_FALSE(ws_adj.uses_total_weight);
  CHECK(ws_adj.adjusted[0] ==
        doctest::Approx(2.0 / (1.0 - std::exp(-2.0 * tau))).epsilon(1e-14));
  CHECK(ws_adj.adjusted[1] ==
        doctest::Approx(0.5 / (1.0 - std::exp(-0.5 * tau))).epsilon(1e-14));

  const auto pri = fixture({{"a", 2.0, 0.1, {}}, {"b", 0.5, 0.3, {}}}, tau,
                           std::nullopt, bks::RankFamily::priority);
  const auto pri_adj = bks::rc_adjusted_weights(pri);
  CHECK(pri_adj.adjusted[0] == doctest::Approx(2.0));        // w > 1/tau
  CHECK(pri_adj.adjusted[1] == doctest::Approx(1.0 / tau));  // w < 1/tau

  const auto uni = fixture({{"a", 2.0, 0.1, {}}}, tau, std::nullopt,
                           bks::RankFamily::uniform);
  CHECK_THROWS_AS(bks::rc_adjusted_weights(uni), bks::capability_error);
}

TEST_CASE("exact sketches already hold the true weights") {
  const auto exact = fixture({{"a", 2.0, 0.1, {}}, {"b", 0.5, 0.3, {}}},
                             std::nullopt, 2.5);
  CHECK(bks::rc_adjusted_weights(exact).adjusted ==
        std::vector<double>{2.0, 0.5});
  CHECK(bks::sc_adjusted_weights_exact(exact, 2.5).adjusted ==
        std::vector<double>{2.0, 0.5});
  CHECK(bks::prefix_adjusted_weights(exact, 2.5).adjusted ==
        std::vector<double>{2.0, 0.5});
}

TEST_CASE("subset retention probability has the small closed forms") {
  const std::vector<double> one = {2.0};
  const double ell = 3.0;
  CHECK(bks::f_subset_prob(one, ell) ==
        doctest::Approx(2.0 / 5.0).epsilon(1e-14));
  CHECK(bks::f_subset_prob(one, 0.0) == 1.0);
  CHECK(bks::f_subset_prob({}, 7.0) == 1.0);

  const std::vector<double> two = {2.0, 1.0};
  const double direct = 1.0 - ell / (ell + 2.0) - ell / (ell + 1.0) +
                        ell / (ell + 3.0);
  CHECK(bks::f_subset_prob(two, ell) == doctest::Approx(direct).epsilon(1e-13));
}

TEST_CASE("subset retention probability satisfies the peel-one recurrence") {
  bks::SplitRng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + (rng.next_u64() % 6);
    std::vector<double> w(n);
    double sum = 0;
    for (auto& x : w) {
      x = std::exp(2.0 * (rng.open01() - 0.5));
      sum += x;
    }
    const double ell = rng.open01() * 2.0 * sum;
    const double whole = bks::f_subset_prob(w, ell);
    double recomposed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> rest;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) rest.push_back(w[j]);
      }
      recomposed += w[i] / (sum + ell) * bks::f_subset_prob(rest, ell);
    }
    REQUIRE(whole == doctest::Approx(recomposed).epsilon(1e-11));
  }
}

TEST_CASE("quadrature and inclusion-exclusion paths agree") {
  bks::SplitRng rng(55);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + (rng.next_u64() % 8);
    std::vector<double> w(n);
    double sum = 0;
    for (auto& x : w) {
      x = std::exp(3.0 * (rng.open01() - 0.5));
      sum += x;
    }
    const double ell = rng.open01() * sum;
    const double ie = bks::f_subset_prob(w, ell);
    const double quad = bks::f_subset_prob_quadrature(w, ell, 1e-12);
    REQUIRE(std::abs(ie - quad) < 1e-9);
  }
}

TEST_CASE("partial retention probability is a cdf in the threshold") {
  const std::vector<double> w = {1.0, 2.5};
  const double ell = 2.0;
  CHECK(bks::f_subset_prob_upto(w, ell, 0.0) == 0.0);
  double prev = 0.0;
  for (double y : {0.1, 0.5, 1.0, 3.0, 10.0, 80.0}) {
    const double p = bks::f_subset_prob_upto(w, ell, y);
    CHECK(p >= prev);
    prev = p;
  }
  CHECK(prev == doctest::Approx(bks::f_subset_prob(w, ell)).epsilon(1e-10));
}

TEST_CASE("subset conditioning assigns the whole total to a lone entry") {
  const auto sk = fixture({{"a", 2.0, 0.4, {}}}, 0.9);
  const auto adj = bks::sc_adjusted_weights_exact(sk, 7.0);
  CHECK(adj.uses_total_weight);
  CHECK(adj.adjusted[0] == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("subset conditioning totals have zero variance") {
  bks::SplitRng rng(808);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + (rng.next_u64() % 8);
    std::vector<bks::WeightedItem> items;
    double W = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = std::pow(rng.open01(), -1.0 / 1.5);
      items.push_back({std::to_string(i), w, {}});
      W += w;
    }
    const std::size_t k = 1 + (rng.next_u64() % (n - 1));
    const auto sk =
        bks::build_bottom_k(items, k, bks::RankFamily::exponential, rng);
    const auto adj = bks::sc_adjusted_weights_exact(sk, W);
    REQUIRE(total_of(adj) == doctest::Approx(W).epsilon(1e-11));
  }
}

TEST_CASE("subset conditioning guards its inputs") {
  std::vector<bks::SketchEntry> entries;
  for (int i = 0; i < 21; ++i) {
    entries.push_back({std::to_string(i), 1.0, 0.01 * (i + 1), {}});
  }
  const auto big = fixture(std::move(entries), 0.5);
  CHECK_THROWS_AS(bks::sc_adjusted_weights_exact(big, 50.0),
                  bks::capability_error);

  const auto sk = fixture({{"a", 2.0, 0.4, {}}, {"b", 3.0, 0.6, {}}}, 0.9);
  CHECK_THROWS_AS(bks::sc_adjusted_weights_exact(sk, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(bks::sc_adjusted_weights_exact(sk, -4.0),
                  std::invalid_argument);
}

TEST_CASE("markov subset conditioning is reproducible and sums near W") {
  const auto sk = fixture(
      {{"a", 1.0, 0.2, {}}, {"b", 2.0, 0.5, {}}, {"c", 0.5, 0.7, {}}}, 1.1);
  const double W = 9.0;
  const bks::MarkovParams params{5, 4};
  bks::SplitRng r1(42);
  bks::SplitRng r2(42);
  const auto a1 = bks::sc_adjusted_weights_markov(sk, W, params, r1);
  const auto a2 = bks::sc_adjusted_weights_markov(sk, W, params, r2);
  CHECK(a1.adjusted == a2.adjusted);
  for (double a : a1.adjusted) CHECK(a > 0);

  bks::SplitRng bad(1);
  CHECK_THROWS_AS(
      bks::sc_adjusted_weights_markov(sk, W, bks::MarkovParams{0, 5}, bad),
      std::invalid_argument);
}

TEST_CASE("markov estimator mean matches the exact one") {
  // Same conditioning partition in the limit: across many sketches the two
  // subset-conditioning variants must agree on per-item means.
  std::vector<bks::WeightedItem> items = {{"a", 0.5, {}},
                                          {"b", 1.0, {}},
                                          {"c", 2.0, {}},
                                          {"d", 4.0, {}}};
  const double W = 7.5;
  const int reps = 4000;
  bks::SplitRng root(2718);
  double exact_mean = 0;
  double markov_mean = 0;
  for (int rep = 0; rep < reps; ++rep) {
    bks::SplitRng build = root.split(2 * rep);
    bks::SplitRng chain = root.split(2 * rep + 1);
    const auto sk =
        bks::build_bottom_k(items, 2, bks::RankFamily::exponential, build);
    const auto exact = bks::sc_adjusted_weights_exact(sk, W);
    const auto markov =
        bks::sc_adjusted_weights_markov(sk, W, bks::MarkovParams{3, 3}, chain);
    for (std::size_t i = 0; i < sk.entries.size(); ++i) {
      if (sk.entries[i].id == "d") {
        exact_mean += exact.adjusted[i];
        markov_mean += markov.adjusted[i];
      }
    }
  }
  exact_mean /= reps;
  markov_mean /= reps;
  CHECK(markov_mean == doctest::Approx(exact_mean).epsilon(0.05));
  CHECK(exact_mean == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("prefix conditioning on k=1 returns the total weight") {
  const auto sk = fixture({{"a", 2.0, 0.4, {}}}, 0.9);
  const auto adj = bks::prefix_adjusted_weights(sk, 7.0);
  CHECK(adj.adjusted[0] == doctest::Approx(7.0).epsilon(1e-10));
}

TEST_CASE("prefix conditioning is unbiased per item") {
  std::vector<bks::WeightedItem> items = {{"a", 0.5, {}},
                                          {"b", 1.0, {}},
                                          {"c", 2.0, {}},
                                          {"d", 4.0, {}},
                                          {"e", 0.25, {}}};
  const double W = 7.75;
  const int reps = 40000;
  bks::SplitRng root(31415);
  std::vector<double> sums(items.size(), 0.0);
  std::vector<double> sq(items.size(), 0.0);
  for (int rep = 0; rep < reps; ++rep) {
    bks::SplitRng build = root.split(rep);
    const auto sk =
        bks::build_bottom_k(items, 3, bks::RankFamily::exponential, build);
    const auto adj = bks::prefix_adjusted_weights(sk, W);
    for (std::size_t i = 0; i < sk.entries.size(); ++i) {
      const std::size_t idx = sk.entries[i].id[0] - 'a';
      sums[idx] += adj.adjusted[i];
      sq[idx] += adj.adjusted[i] * adj.adjusted[i];
    }
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double mean = sums[i] / reps;
    const double var = sq[i] / reps - mean * mean;
    const double se = std::sqrt(var / reps);
    REQUIRE(std::abs(mean - items[i].weight) < 4.0 * se);
  }
}

TEST_CASE("subpopulation estimates sum matching adjusted weights") {
  bks::AdjustedWeightAssignment awa;
  awa.method = bks::EstimatorMethod::ws_rc;
  awa.entries = {{"a", 1.0, 0.1, {{"g", "0"}}},
                 {"b", 2.0, 0.2, {{"g", "1"}}},
                 {"c", 4.0, 0.3, {{"g", "0"}}}};
  awa.adjusted = {1.5, 2.5, 4.5};
  CHECK(bks::estimate_subpop(awa, bks::Predicate::match_all()) ==
        doctest::Approx(8.5));
  CHECK(bks::estimate_subpop(awa, bks::Predicate::attribute_equals("g", "0")) ==
        doctest::Approx(6.0));
  CHECK(bks::estimate_subpop(awa, bks::Predicate::attribute_equals("g", "9")) ==
        0.0);

  const double count_estimate = bks::estimate_value_sum(
      awa, bks::Predicate::attribute_equals("g", "0"),
      [](const bks::SketchEntry&) { return 1.0; });
  CHECK(count_estimate == doctest::Approx(1.5 / 1.0 + 4.5 / 4.0));
}

TEST_CASE("maximum-likelihood total solves the harmonic fixture") {
  const auto sk = fixture({{"a", 1.0, 0.5, {}}}, 1.0);
  CHECK(bks::ml_total_weight(sk) ==
        doctest::Approx((3.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-9));

  const auto exact = fixture({{"a", 1.0, 0.5, {}}, {"b", 2.0, 0.7, {}}},
                             std::nullopt);
  CHECK(bks::ml_total_weight(exact) == doctest::Approx(3.0));
}

TEST_CASE("maximum-likelihood subpopulation edge cases") {
  const auto sk = fixture({{"a", 1.0, 0.25, {{"g", "0"}}},
                           {"b", 2.0, 0.5, {{"g", "1"}}}},
                          0.75, 10.0);
  const auto none = bks::Predicate::attribute_equals("g", "7");
  CHECK(bks::ml_subpop(sk, none) == 0.0);
  CHECK(bks::ml_subpop_with_total(sk, none, 10.0) == 0.0);
  CHECK(bks::ml_subpop_with_total(sk, bks::Predicate::match_all(), 10.0) ==
        doctest::Approx(10.0));

  const auto some = bks::Predicate::attribute_equals("g", "0");
  const double est = bks::ml_subpop(sk, some);
  CHECK(est >= 1.0);  // never below the matched retained weight

  CHECK_THROWS_AS(bks::ml_subpop(sk, some, 3, nullptr), std::invalid_argument);
  bks::SplitRng r1(7);
  bks::SplitRng r2(7);
  CHECK(bks::ml_subpop(sk, some, 3, &r1) == bks::ml_subpop(sk, some, 3, &r2));
}

TEST_CASE("k-mins estimators use the rank sum") {
  bks::KMinsSketch km;
  km.k = 4;
  km.mins = {{"a", 1.0, 0.1, {}},
             {"b", 3.0, 0.2, {}},
             {"a", 1.0, 0.3, {}},
             {"b", 3.0, 0.4, {}}};
  km.total_weight = 4.0;
  const auto est = bks::wsr_total_weight(km);
  CHECK(est.unbiased == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(est.maximum_likelihood == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(est.inverse_total == doctest::Approx(0.25).epsilon(1e-14));

  bks::KMinsSketch tiny;
  tiny.k = 1;
  tiny.mins = {{"a", 1.0, 0.1, {}}};
  CHECK_THROWS_AS(bks::wsr_total_weight(tiny), std::invalid_argument);
}

TEST_CASE("k-mins subpopulation estimators with a known total") {
  bks::KMinsSketch km;
  km.k = 4;
  km.mins = {{"a", 1.0, 0.1, {{"g", "0"}}},
             {"b", 3.0, 0.2, {{"g", "1"}}},
             {"a", 1.0, 0.3, {{"g", "0"}}},
             {"b", 3.0, 0.4, {{"g", "1"}}}};
  const double W = 4.0;
  const auto match_a = bks::Predicate::attribute_equals("g", "0");
  const auto est = bks::wsr_subpop_with_total(km, match_a, W);
  const double p_a = 1.0 - std::pow(1.0 - 1.0 / W, 4.0);
  CHECK(est.horvitz_thompson == doctest::Approx(1.0 / p_a).epsilon(1e-12));
  CHECK(est.ratio == doctest::Approx(2.0 * W / 4.0).epsilon(1e-14));

  const auto all = bks::wsr_subpop_with_total(km, bks::Predicate::match_all(), W);
  CHECK(all.ratio == doctest::Approx(W).epsilon(1e-14));

  CHECK_THROWS_AS(bks::wsr_subpop_with_total(km, match_a, 0.5),
                  std::invalid_argument);
}

}  // namespace
