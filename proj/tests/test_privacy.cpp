#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dpsynth/privacy.hpp"
#include "dpsynth/rng.hpp"

using namespace dpsynth;

TEST_CASE("laplace mechanism bypasses noise at infinite epsilon") {
  Rng rng(1);
  const std::vector<double> in{10.0, 20.0};
  CHECK(laplace_mechanism(in, 1.0, kInfiniteEpsilon, rng) == in);
}

TEST_CASE("laplace mechanism matches analytic moments") {
  // Monte Carlo oracle: Laplace(0, b) has mean 0 and variance 2*b^2.
  Rng rng(42);
  const size_t draws = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (size_t i = 0; i < draws; ++i) {
    const double v = laplace_mechanism({0.0}, 1.0, 1.0, rng)[0];
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / draws;
  const double var = sum_sq / draws - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(var == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("laplace mechanism scale via median absolute deviation") {
  // |X| for X ~ Laplace(0, b) has median b*ln 2.
  Rng rng(7);
  const size_t draws = 200000;
  std::vector<double> abs_dev(draws);
  for (size_t i = 0; i < draws; ++i) {
    abs_dev[i] = std::abs(laplace_mechanism({5.0}, 2.0, 0.5, rng)[0] - 5.0);
  }
  std::nth_element(abs_dev.begin(), abs_dev.begin() + draws / 2, abs_dev.end());
  const double b_hat = abs_dev[draws / 2] / std::log(2.0);
  CHECK(b_hat == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("laplace mechanism rejects bad inputs") {
  Rng rng(1);
  CHECK_THROWS_AS(laplace_mechanism({1.0}, 1.0, 0.0, rng), BudgetError);
  CHECK_THROWS_AS(laplace_mechanism({1.0}, 1.0, -2.0, rng), BudgetError);
  CHECK_THROWS_AS(laplace_mechanism({std::nan("")}, 1.0, 1.0, rng), InputError);
  CHECK_THROWS_AS(laplace_mechanism({1.0}, 0.0, 1.0, rng), InputError);
}

TEST_CASE("gaussian sigma closed form") {
  // sqrt(2*ln(1.25/1e-5)) = 4.84481...
  CHECK(gaussian_sigma(1.0, 1.0, 1e-5) == doctest::Approx(4.8449).epsilon(1e-4));
  CHECK(gaussian_sigma(2.0, 1.0, 1e-5) ==
        doctest::Approx(2.0 * gaussian_sigma(1.0, 1.0, 1e-5)).epsilon(1e-12));
  CHECK(gaussian_sigma(1.0, 0.5, 1e-5) ==
        doctest::Approx(2.0 * gaussian_sigma(1.0, 1.0, 1e-5)).epsilon(1e-12));
  CHECK_THROWS_AS(gaussian_sigma(1.0, 1.0, 0.0), InputError);
}

TEST_CASE("gaussian mechanism empirical std and mean") {
  Rng rng(3);
  CHECK(gaussian_mechanism({0.0, 0.0}, 1.0, kInfiniteEpsilon, 1e-5, rng) ==
        std::vector<double>{0.0, 0.0});

  const size_t draws = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (size_t i = 0; i < draws; ++i) {
    const double v = gaussian_mechanism({0.0}, 1.0, 1.0, 1e-5, rng)[0];
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / draws;
  const double stddev = std::sqrt(sum_sq / draws - mean * mean);
  CHECK(stddev == doctest::Approx(4.8449).epsilon(0.02));

  double mean7 = 0.0;
  for (size_t i = 0; i < draws; ++i) {
    mean7 += gaussian_mechanism({7.0}, 1.0, 1.0, 1e-5, rng)[0];
  }
  mean7 /= draws;
  CHECK(std::abs(mean7 - 7.0) < 0.02);
}

TEST_CASE("exponential mechanism argmax at infinite epsilon") {
  Rng rng(1);
  CHECK(exponential_mechanism({3.0, 1.0, 2.0}, 1.0, kInfiniteEpsilon, rng) == 0);
  // Ties break to the lowest index.
  CHECK(exponential_mechanism({2.0, 2.0, 1.0}, 1.0, kInfiniteEpsilon, rng) == 0);
  CHECK_THROWS_AS(exponential_mechanism({}, 1.0, 1.0, rng), InputError);
}

TEST_CASE("exponential mechanism selection frequencies") {
  Rng rng(11);
  const size_t draws = 100000;

  std::vector<size_t> counts(3, 0);
  for (size_t i = 0; i < draws; ++i) {
    ++counts[exponential_mechanism({0.0, 0.0, 0.0}, 1.0, 1.0, rng)];
  }
  for (size_t k = 0; k < 3; ++k) {
    CHECK(std::abs(counts[k] / static_cast<double>(draws) - 1.0 / 3.0) < 0.01);
  }

  // P(index 0) = e / (e + 1) for scores {1, 0}, eps 2, sensitivity 1.
  size_t zero = 0;
  for (size_t i = 0; i < draws; ++i) {
    if (exponential_mechanism({1.0, 0.0}, 1.0, 2.0, rng) == 0) ++zero;
  }
  const double expected = std::exp(1.0) / (std::exp(1.0) + 1.0);
  CHECK(std::abs(zero / static_cast<double>(draws) - expected) < 0.01);
}

TEST_CASE("budget ledger enforces totals") {
  BudgetLedger ledger(PrivacySpec(1.0, 0.0));
  ledger.spend("a", 0.5, 0.0);
  ledger.spend("b", 0.5, 0.0);
  CHECK(ledger.epsilon_spent() == doctest::Approx(1.0));
  CHECK_THROWS_WITH_AS(ledger.spend("c", 0.01, 0.0),
                       "privacy budget exhausted (epsilon) at: c", BudgetError);
  CHECK(ledger.entries().size() == 2);

  BudgetLedger inf_ledger(PrivacySpec::infinite());
  for (int i = 0; i < 100; ++i) inf_ledger.spend("x", 10.0, 0.0);
  CHECK(inf_ledger.within_budget());

  BudgetLedger delta_ledger(PrivacySpec(kInfiniteEpsilon, 1e-5));
  delta_ledger.spend("d1", 0.0, 1e-5);
  CHECK_THROWS_AS(delta_ledger.spend("d2", 0.0, 1e-5), BudgetError);
}

TEST_CASE("privacy spec validation") {
  CHECK_THROWS_AS(PrivacySpec(0.0, 0.0), InputError);
  CHECK_THROWS_AS(PrivacySpec(1.0, 1.0), InputError);
  CHECK(PrivacySpec::infinite().noise_free());
  CHECK_FALSE(PrivacySpec(1.0, 1e-5).noise_free());
  CHECK_THROWS_AS(SensitivityBound(1.0, 2.0), InputError);
}

TEST_CASE("sgd accountant basics") {
  CHECK(sgd_accountant_epsilon(1.0, 0.01, 0, 1e-5) == 0.0);
  CHECK_THROWS_AS(sgd_accountant_epsilon(1.0, 1.5, 10, 1e-5), InputError);

  // At q = 1 the accountant must equal the direct closed form minimized over
  // the same order grid, and be below the value at every single order.
  const double sigma = 4.0, delta = 1e-5;
  const double got = sgd_accountant_epsilon(sigma, 1.0, 1, delta);
  double oracle = std::numeric_limits<double>::infinity();
  for (double alpha : rdp_order_grid()) {
    const double at_alpha = alpha / (2.0 * sigma * sigma) + std::log(1.0 / delta) / (alpha - 1.0);
    oracle = std::min(oracle, at_alpha);
    CHECK(got <= at_alpha + 1e-12);
  }
  CHECK(got == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("sgd accountant monotonicity") {
  const double delta = 1e-5;
  const double e1 = sgd_accountant_epsilon(2.0, 0.01, 1000, delta);
  const double e2 = sgd_accountant_epsilon(2.0, 0.01, 2000, delta);
  CHECK(e2 >= e1);
  CHECK(sgd_accountant_epsilon(2.0, 0.02, 1000, delta) >= e1);
  CHECK(sgd_accountant_epsilon(4.0, 0.01, 1000, delta) <= e1);
}

TEST_CASE("noise calibration round trip") {
  const double q = 0.01;
  const size_t steps = 1000;
  for (double target : {0.5, 1.0, 3.0, 10.0}) {
    const PrivacySpec spec(target, 1e-5);
    const double sigma = calibrate_noise_multiplier(spec, q, steps);
    const double achieved = sgd_accountant_epsilon(sigma, q, steps, spec.delta);
    CHECK(achieved <= target);
    CHECK(achieved >= 0.95 * target);
  }
}

TEST_CASE("noise calibration edge cases") {
  CHECK(calibrate_noise_multiplier(PrivacySpec(1.0, 1e-5), 0.1, 0) ==
        doctest::Approx(1e-3));
  const double s1 = calibrate_noise_multiplier(PrivacySpec(1.0, 1e-5), 0.01, 1000);
  const double s2 = calibrate_noise_multiplier(PrivacySpec(1.0, 1e-5), 0.01, 2000);
  CHECK(s2 >= s1 - 1e-3);
  CHECK_THROWS_AS(calibrate_noise_multiplier(PrivacySpec::infinite(), 0.1, 10), InputError);
  // Conversion term ln(1/delta)/(alpha-1) exceeds tiny targets at every
  // order in the grid, so no finite multiplier suffices.
  CHECK_THROWS_AS(calibrate_noise_multiplier(PrivacySpec(0.01, 1e-5), 0.01, 1000),
                  CalibrationError);
}

TEST_CASE("pate accountant") {
  CHECK(pate_accountant_epsilon(0, 0.1, 1e-5) == 0.0);

  const double eps0 = 0.1, delta = 1e-5;
  const double formula =
      eps0 * std::sqrt(2.0 * std::log(1.0 / delta)) + eps0 * (std::exp(eps0) - 1.0);
  CHECK(pate_accountant_epsilon(1, eps0, delta) == doctest::Approx(formula).epsilon(1e-12));
  CHECK(pate_accountant_epsilon(1, eps0, delta) <= 0.491);

  double prev = 0.0;
  for (size_t t : {1, 2, 5, 10, 100}) {
    const double e = pate_accountant_epsilon(t, eps0, delta);
    CHECK(e > prev);
    prev = e;
  }
  CHECK_THROWS_AS(pate_accountant_epsilon(1, 0.0, 1e-5), InputError);
}
