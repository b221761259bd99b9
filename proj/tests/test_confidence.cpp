#include <cmath>
#include <optional>
#include <vector>

#include "bks/confidence.hpp"
#include "bks/errors.hpp"
#include "bks/numeric.hpp"
#include "bks/predicate.hpp"
#include "bks/rng.hpp"
#include "doctest.h"

namespace {

bks::BottomKSketch two_entry_sketch(double threshold,
                                    bks::RankFamily family =
                                        bks::RankFamily::exponential) {
  bks::BottomKSketch s;
  s.k = 2;
  s.family = family;
  s.entries = {{"a", 1.0, 0.2, {{"g", "0"}}}, {"b", 2.0, 0.5, {{"g", "1"}}}};
  s.r_k_plus_1 = threshold;
  s.validate();
  return s;
}

double mean_v(const std::vector<double>& sums, double x) {
  double acc = 0;
  for (double s : sums) acc += 1.0 / (x - s);
  return acc;
}

double sd_v(const std::vector<double>& sums, double x) {
  double acc = 0;
  for (double s : sums) acc += 1.0 / ((x - s) * (x - s));
  return std::sqrt(acc);
}

TEST_CASE("sum of exponentials evaluates gap by gap") {
  const bks::SumExpSpec spec{2.0, {0.0, 1.0}};
  const double u = std::exp(-1.0);
  const std::vector<double> uniforms = {u, u};
  CHECK(bks::sample_sum_exp(spec, uniforms) ==
        doctest::Approx(0.5 + 1.0).epsilon(1e-14));

  CHECK_THROWS_AS(bks::sample_sum_exp({2.0, {}}, uniforms),
                  std::invalid_argument);
  CHECK_THROWS_AS(bks::sample_sum_exp(spec, std::vector<double>{u}),
                  std::invalid_argument);
  CHECK_THROWS_AS(bks::sample_sum_exp({0.5, {0.0, 1.0}}, uniforms),
                  std::domain_error);
  CHECK_THROWS_AS(bks::sample_sum_exp(spec, std::vector<double>{0.5, 1.0}),
                  std::domain_error);
}

TEST_CASE("normal approximation has the single-term closed form") {
  const std::vector<double> sums = {0.0};
  const double tau = 0.8;
  const double z95 = bks::inverse_normal_cdf(0.95);
  const auto upper =
      bks::solve_normal_approx(sums, tau, 0.05, bks::BoundSide::upper);
  REQUIRE(upper.has_value());
  CHECK(*upper == doctest::Approx((1.0 + z95) / tau).epsilon(1e-9));

  // z exceeds 1, so mean - z*sd stays negative: no lower root exists.
  CHECK_FALSE(bks::solve_normal_approx(sums, tau, 0.05, bks::BoundSide::lower)
                  .has_value());

  const double z80 = bks::inverse_normal_cdf(0.80);
  const auto lower =
      bks::solve_normal_approx(sums, tau, 0.20, bks::BoundSide::lower);
  REQUIRE(lower.has_value());
  CHECK(*lower == doctest::Approx((1.0 - z80) / tau).epsilon(1e-9));
}

TEST_CASE("normal approximation roots satisfy their defining equations") {
  const std::vector<double> sums = {0.0, 2.0, 3.5};
  const double tau = 0.9;
  for (double delta : {0.05, 0.10, 0.25}) {
    const double z = bks::inverse_normal_cdf(1.0 - delta);
    const auto upper =
        bks::solve_normal_approx(sums, tau, delta, bks::BoundSide::upper);
    REQUIRE(upper.has_value());
    CHECK(*upper > sums.back());
    CHECK(mean_v(sums, *upper) + z * sd_v(sums, *upper) ==
          doctest::Approx(tau).epsilon(1e-8));

    const auto lower =
        bks::solve_normal_approx(sums, tau, delta, bks::BoundSide::lower);
    if (lower.has_value()) {
      CHECK(*lower > sums.back());
      CHECK(mean_v(sums, *lower) - z * sd_v(sums, *lower) ==
            doctest::Approx(tau).epsilon(1e-8));
      CHECK(*lower < *upper);
    }
  }
  CHECK_THROWS_AS(
      bks::solve_normal_approx(sums, -1.0, 0.05, bks::BoundSide::upper),
      std::domain_error);
  CHECK_THROWS_AS(
      bks::solve_normal_approx(sums, 1.0, 0.7, bks::BoundSide::upper),
      std::domain_error);
}

TEST_CASE("quantile solver picks the ceil(delta*m) order statistic") {
  const std::vector<double> values = {5.0, 4.0, 3.0, 2.0, 1.0};
  std::size_t calls = 0;
  auto next = [&values, &calls](bks::SplitRng&) {
    return values[calls++ % values.size()];
  };
  bks::SplitRng rng(11);
  CHECK(bks::quantile_method_solve(next, 0.2, 5, rng) == 1.0);
  CHECK(bks::quantile_method_solve(next, 0.5, 5, rng) == 3.0);
  CHECK(bks::quantile_method_solve(next, 0.99, 5, rng) == 5.0);
  CHECK(bks::quantile_method_solve(next, 0.001, 5, rng) == 1.0);

  CHECK_THROWS_AS(bks::quantile_method_solve(next, 1.5, 5, rng),
                  std::domain_error);
  CHECK_THROWS_AS(bks::quantile_method_solve(next, 0.2, 0, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(bks::quantile_method_solve(nullptr, 0.2, 5, rng),
                  std::invalid_argument);
}

TEST_CASE("bound method names round trip") {
  using bks::WsBoundMethod;
  for (auto m : {WsBoundMethod::normal, WsBoundMethod::quantile,
                 WsBoundMethod::density}) {
    CHECK(bks::ws_bound_method_from_name(bks::ws_bound_method_name(m)) == m);
  }
  CHECK_THROWS_AS(bks::ws_bound_method_from_name("chernoff"),
                  std::invalid_argument);
}

TEST_CASE("total-weight bounds bracket the retained weight") {
  const auto sk = two_entry_sketch(0.8);
  for (auto m : {bks::WsBoundMethod::normal, bks::WsBoundMethod::quantile,
                 bks::WsBoundMethod::density}) {
    bks::SplitRng rng(99);
    const auto ci = bks::ws_bounds_total(sk, 0.05, m, &rng, 64);
    CHECK(ci.lower >= 3.0);  // never below what the sketch already holds
    CHECK(ci.lower <= ci.upper);
    CHECK(std::isfinite(ci.upper));
    CHECK(ci.delta == 0.05);
  }
  CHECK_THROWS_AS(
      bks::ws_bounds_total(sk, 0.05, bks::WsBoundMethod::quantile, nullptr),
      std::invalid_argument);
  CHECK_THROWS_AS(
      bks::ws_bounds_total(sk, 0.6, bks::WsBoundMethod::normal, nullptr),
      std::domain_error);

  const auto pri = two_entry_sketch(0.8, bks::RankFamily::priority);
  CHECK_THROWS_AS(
      bks::ws_bounds_total(pri, 0.05, bks::WsBoundMethod::normal, nullptr),
      bks::capability_error);
}

TEST_CASE("quantile bounds are reproducible with equal seeds") {
  const auto sk = two_entry_sketch(0.8);
  bks::SplitRng r1(123);
  bks::SplitRng r2(123);
  const auto a =
      bks::ws_bounds_total(sk, 0.05, bks::WsBoundMethod::quantile, &r1, 200);
  const auto b =
      bks::ws_bounds_total(sk, 0.05, bks::WsBoundMethod::quantile, &r2, 200);
  CHECK(a.lower == b.lower);
  CHECK(a.upper == b.upper);
  CHECK(a.method == "ws-quantile");
}

TEST_CASE("exact sketches collapse every interval") {
  bks::BottomKSketch exact;
  exact.k = 2;
  exact.family = bks::RankFamily::exponential;
  exact.entries = {{"a", 1.0, 0.2, {{"g", "0"}}},
                   {"b", 2.0, 0.5, {{"g", "1"}}}};
  exact.validate();

  const auto total =
      bks::ws_bounds_total(exact, 0.05, bks::WsBoundMethod::normal);
  CHECK(total.lower == 3.0);
  CHECK(total.upper == 3.0);
  CHECK(total.method == "exact");

  const auto sub = bks::ws_bounds_subpop(
      exact, bks::Predicate::attribute_equals("g", "0"), 0.05,
      bks::WsBoundMethod::normal);
  CHECK(sub.lower == 1.0);
  CHECK(sub.upper == 1.0);

  bks::SplitRng rng(4);
  const auto lex = bks::ws_bounds_subpop_with_total(
      exact, bks::Predicate::attribute_equals("g", "0"), 3.0, 0.05, 32, rng);
  CHECK(lex.lower == 1.0);
  CHECK(lex.upper == 1.0);

  bks::BottomKSketch pri_exact = exact;
  pri_exact.family = bks::RankFamily::priority;
  const auto pri = bks::pri_bounds_subpop(
      pri_exact, bks::Predicate::attribute_equals("g", "1"), 0.05);
  CHECK(pri.lower == 2.0);
  CHECK(pri.upper == 2.0);
}

TEST_CASE("subpopulation bounds floor at the matched weight") {
  const auto sk = two_entry_sketch(0.8);
  const auto g0 = bks::Predicate::attribute_equals("g", "0");
  const auto none = bks::Predicate::attribute_equals("g", "7");

  const auto ci =
      bks::ws_bounds_subpop(sk, g0, 0.05, bks::WsBoundMethod::normal);
  CHECK(ci.lower >= 1.0);
  CHECK(ci.lower <= ci.upper);

  const auto empty =
      bks::ws_bounds_subpop(sk, none, 0.05, bks::WsBoundMethod::normal);
  CHECK(empty.lower == 0.0);
  CHECK(empty.upper > 0.0);  // unseen items may still match

  bks::SplitRng rng(5);
  const auto quant =
      bks::ws_bounds_subpop(sk, g0, 0.05, bks::WsBoundMethod::quantile, &rng,
                            64);
  CHECK(quant.lower >= 1.0);
  CHECK(quant.lower <= quant.upper);

  CHECK_THROWS_AS(
      bks::ws_bounds_subpop(sk, g0, 0.05, bks::WsBoundMethod::density),
      bks::capability_error);
}

TEST_CASE("known-total bounds live inside [matched weight, total]") {
  const auto sk = two_entry_sketch(0.8);
  const auto g0 = bks::Predicate::attribute_equals("g", "0");

  // Total equal to the retained weight leaves no unseen mass to assign.
  bks::SplitRng tight_rng(7);
  const auto tight =
      bks::ws_bounds_subpop_with_total(sk, g0, 3.0, 0.05, 64, tight_rng);
  CHECK(tight.lower == doctest::Approx(1.0));
  CHECK(tight.upper == doctest::Approx(1.0));

  bks::SplitRng r1(21);
  bks::SplitRng r2(21);
  const auto a = bks::ws_bounds_subpop_with_total(sk, g0, 10.0, 0.05, 64, r1);
  const auto b = bks::ws_bounds_subpop_with_total(sk, g0, 10.0, 0.05, 64, r2);
  CHECK(a.lower == b.lower);
  CHECK(a.upper == b.upper);
  CHECK(a.lower >= 1.0);
  CHECK(a.upper <= 10.0);
  CHECK(a.lower <= a.upper);
  CHECK(a.method == "ws-lex-quantile");

  bks::SplitRng r3(3);
  CHECK_THROWS_AS(
      bks::ws_bounds_subpop_with_total(sk, g0, 0.5, 0.05, 64, r3),
      std::invalid_argument);
}

TEST_CASE("priority bounds add certain weight to a counted tail") {
  bks::BottomKSketch sk;
  sk.k = 2;
  sk.family = bks::RankFamily::priority;
  sk.entries = {{"a", 5.0, 0.1, {{"g", "0"}}}, {"b", 6.0, 0.3, {{"g", "0"}}}};
  sk.r_k_plus_1 = 0.5;
  sk.validate();

  // Both matched weights clear 1/tau, so the count of uncertain items is 0.
  const double tau = 0.5;
  const auto ci =
      bks::pri_bounds_subpop(sk, bks::Predicate::match_all(), 0.05);
  CHECK(ci.lower == doctest::Approx(11.0).epsilon(1e-12));
  CHECK(ci.upper ==
        doctest::Approx(11.0 - std::log(0.05) / tau).epsilon(1e-12));
  CHECK(ci.method == "pri-chernoff");

  const auto ws = two_entry_sketch(0.8);
  CHECK_THROWS_AS(
      bks::pri_bounds_subpop(ws, bks::Predicate::match_all(), 0.05),
      bks::capability_error);
}

TEST_CASE("priority bounds with uncertain items widen both sides") {
  bks::BottomKSketch sk;
  sk.k = 3;
  sk.family = bks::RankFamily::priority;
  // Weights below 1/tau = 2: counted, not certain.
  sk.entries = {{"a", 0.5, 0.1, {}}, {"b", 1.0, 0.2, {}}, {"c", 1.5, 0.3, {}}};
  sk.r_k_plus_1 = 0.5;
  sk.validate();
  const auto ci =
      bks::pri_bounds_subpop(sk, bks::Predicate::match_all(), 0.05);
  CHECK(ci.lower >= 0.0);
  CHECK(ci.lower < 3.0 / 0.5);  // count lower bound sits below n'
  CHECK(ci.upper > 3.0 / 0.5);
}

TEST_CASE("k-mins bounds follow the normal closed form") {
  bks::KMinsSketch km;
  km.k = 4;
  km.mins = {{"a", 1.0, 0.5, {}},
             {"b", 1.0, 0.5, {}},
             {"c", 1.0, 0.5, {}},
             {"d", 1.0, 0.5, {}}};
  const double z = bks::inverse_normal_cdf(0.95);
  const auto ci = bks::wsr_bounds_total(km, 0.05);
  CHECK(ci.lower == doctest::Approx((1.0 - z / 2.0) / 0.5).epsilon(1e-12));
  CHECK(ci.upper == doctest::Approx((1.0 + z / 2.0) / 0.5).epsilon(1e-12));
  CHECK(ci.method == "wsr-normal");
  CHECK_THROWS_AS(bks::wsr_bounds_total(km, 0.5), std::domain_error);
}

}  // namespace
