#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>

#include "dnglab/mixture.hpp"
#include "oracles.hpp"

using namespace dnglab;

namespace {

GaussianMixture three_modes() {
  return GaussianMixture({1.0 / 3, 1.0 / 3, 1.0 / 3}, {{-6.0}, {0.0}, {6.0}}, {0.25, 0.25, 0.25});
}

}  // namespace

TEST_CASE("mixture construction rejects malformed parameters") {
  CHECK_THROWS_AS(GaussianMixture({}, {}, {}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({0.5, 0.4}, {{0.0}, {1.0}}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({1.0}, {{0.0}, {1.0}}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({0.5, 0.5}, {{0.0}, {1.0, 2.0}}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({1.5, -0.5}, {{0.0}, {1.0}}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({1.0}, {{0.0}}, {-1.0}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({1.0}, {{NAN}}, {1.0}), std::invalid_argument);
  CHECK_NOTHROW(GaussianMixture({1.0}, {{0.0}}, {0.0}));
}

TEST_CASE("diffusion scales means and mixes variances toward one") {
  const auto g = diffuse_mixture(three_modes(), 0.64);
  CHECK(g.means()[0][0] == doctest::Approx(-4.8).epsilon(1e-15));
  CHECK(g.means()[2][0] == doctest::Approx(4.8).epsilon(1e-15));
  CHECK(g.variances()[1] == doctest::Approx(1.0 - 0.64 + 0.64 * 0.25).epsilon(1e-15));
  const auto pure_noise = diffuse_mixture(three_modes(), 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(pure_noise.means()[i][0] == 0.0);
    CHECK(pure_noise.variances()[i] == 1.0);
  }
  CHECK_THROWS_AS(diffuse_mixture(three_modes(), 1.5), std::invalid_argument);
}

TEST_CASE("single standard normal log-density") {
  const GaussianMixture g({1.0}, {{0.0}}, {1.0});
  const double x[1] = {0.0};
  CHECK(log_density(g, x) == doctest::Approx(-0.5 * std::log(2 * M_PI)).epsilon(1e-15));
}

TEST_CASE("log-density agrees with a direct long-double sum") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t dim = 1 + rep % 3;
    const auto split = oracle::random_split(rng, dim);
    const double ab = std::uniform_real_distribution<double>(0.0, 0.99)(rng);
    const auto g = diffuse_mixture(split.full(), ab);
    const auto x = oracle::sample_diffused(rng, split.full(), ab);
    const long double want = oracle::log_density(oracle::diffused(split.full(), ab), x);
    CHECK(std::abs(log_density(g, x) - static_cast<double>(want)) <=
          1e-12 * std::max(1.0, std::abs(static_cast<double>(want))));
  }
}

TEST_CASE("log-density and score stay finite far from every mode") {
  const GaussianMixture g({0.5, 0.5}, {{-1.0}, {1.0}}, {0.01, 0.01});
  const double far[1] = {1e3};
  const double lp = log_density(g, far);
  CHECK(std::isfinite(lp));
  // dominated by the right component
  const double want = std::log(0.5) - 0.5 * std::log(2 * M_PI * 0.01) - 0.5 * 999.0 * 999.0 / 0.01;
  CHECK(lp == doctest::Approx(want).epsilon(1e-14));
  const auto s = score(g, far);
  CHECK(s[0] == doctest::Approx((1.0 - 1e3) / 0.01).epsilon(1e-12));
}

TEST_CASE("score matches finite differences of the reference density") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t dim = 1 + rep % 3;
    const auto split = oracle::random_split(rng, dim);
    const double ab = std::uniform_real_distribution<double>(0.0, 0.99)(rng);
    const auto x = oracle::sample_diffused(rng, split.full(), ab);
    const auto s = score(diffuse_mixture(split.full(), ab), x);
    const auto fd = oracle::fd_score(oracle::diffused(split.full(), ab), x);
    CHECK(oracle::relative_error(s, fd) < 1e-6);
    const auto direct = oracle::score(oracle::diffused(split.full(), ab), x);
    CHECK(oracle::relative_error(s, direct) < 1e-12);
  }
}

TEST_CASE("score_into validates lengths and leaves the input alone") {
  const auto g = three_modes();
  Vector x{0.3}, out(1);
  score_into(g, x, out);
  CHECK(x[0] == 0.3);
  CHECK(out == score(g, x));
  Vector wrong(2);
  CHECK_THROWS_AS(score_into(g, x, wrong), std::invalid_argument);
  const Vector two{0.0, 0.0};
  CHECK_THROWS_AS(score(g, two), std::invalid_argument);
}

TEST_CASE("density of a delta mixture is undefined until diffused") {
  const GaussianMixture g({1.0}, {{0.0}}, {0.0});
  CHECK(g.degenerate());
  const double x[1] = {0.0};
  CHECK_THROWS_AS(log_density(g, x), std::domain_error);
  CHECK_THROWS_AS(score(g, x), std::domain_error);
  CHECK(std::isfinite(log_density(diffuse_mixture(g, 0.5), x)));
}

TEST_CASE("diffused density integrates to one") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto split = oracle::random_split(rng, 1);
    const double ab = std::uniform_real_distribution<double>(0.0, 0.999)(rng);
    CHECK(std::abs(oracle::integrate_density_1d(split.full(), ab) - 1.0) < 1e-6);
  }
  CHECK(std::abs(oracle::integrate_density_1d(three_modes(), 0.999) - 1.0) < 1e-6);
}

TEST_CASE("noise and score convert into each other to within one ulp") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> val(-10.0, 10.0), ab(0.0, 1.0);
  for (int rep = 0; rep < 10000; ++rep) {
    const Vector s{val(rng), val(rng)};
    const double a = ab(rng);
    const auto eps = noise_from_score(s, a);
    CHECK(eps[0] == -std::sqrt(1.0 - a) * s[0]);
    const auto back = score_from_noise(eps, a);
    for (std::size_t k = 0; k < 2; ++k) {
      const bool close = back[k] == s[k] || std::nextafter(back[k], s[k]) == s[k];
      CHECK(close);
    }
  }
  const Vector one{1.0};
  CHECK_THROWS_AS(noise_from_score(one, 1.0), std::domain_error);
  CHECK_THROWS_AS(score_from_noise(one, -0.1), std::domain_error);
}

TEST_CASE("classify_mode picks the nearest component and breaks ties low") {
  const auto g = three_modes();
  const double a[1] = {-5.0}, b[1] = {0.4}, c[1] = {100.0}, mid[1] = {3.0};
  CHECK(classify_mode(g, a) == 0);
  CHECK(classify_mode(g, b) == 1);
  CHECK(classify_mode(g, c) == 2);
  CHECK(classify_mode(g, mid) == 1);
  const GaussianMixture deltas({0.5, 0.5}, {{-1.0}, {1.0}}, {0.0, 0.0});
  const double near_right[1] = {0.2};
  CHECK(classify_mode(deltas, near_right) == 1);
}

TEST_CASE("MixtureSplit renormalizes both parts") {
  const MixtureSplit split(GaussianMixture({0.1, 0.2, 0.3, 0.4}, {{0.0}, {1.0}, {2.0}, {3.0}},
                                           {1.0, 1.0, 1.0, 1.0}),
                           {3, 0});
  CHECK(split.prior() == doctest::Approx(0.5));
  CHECK(split.forbidden_indices() == std::vector<std::size_t>{0, 3});
  CHECK(split.forbidden().weights()[0] == doctest::Approx(0.2));
  CHECK(split.forbidden().weights()[1] == doctest::Approx(0.8));
  CHECK(split.allowed().means()[0][0] == 1.0);
  CHECK(split.is_forbidden(3));
  CHECK_FALSE(split.is_forbidden(1));
  const auto comp = split.complement();
  CHECK(comp.prior() == doctest::Approx(0.5));
  CHECK(comp.forbidden_indices() == std::vector<std::size_t>{1, 2});
}

TEST_CASE("sub-mixture weights sum to one after renormalization") {
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 500; ++rep) {
    const auto split = oracle::random_split(rng, 1);
    CHECK(std::abs(oracle::compensated_sum(split.forbidden().weights()) - 1.0) <= 1e-15);
    CHECK(std::abs(oracle::compensated_sum(split.allowed().weights()) - 1.0) <= 1e-15);
  }
}

TEST_CASE("MixtureSplit rejects degenerate partitions") {
  const auto g = three_modes();
  CHECK_THROWS_AS(MixtureSplit(g, {}), std::invalid_argument);
  CHECK_THROWS_AS(MixtureSplit(g, {0, 1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(MixtureSplit(g, {0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(MixtureSplit(g, {3}), std::invalid_argument);
  const GaussianMixture zero_weight({0.0, 1.0}, {{0.0}, {1.0}}, {1.0, 1.0});
  CHECK_THROWS_AS(MixtureSplit(zero_weight, {0}), std::invalid_argument);
}

TEST_CASE("exact posterior matches the long-double oracle and stays in [0, 1]") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t dim = 1 + rep % 3;
    const auto split = oracle::random_split(rng, dim);
    const double ab = std::uniform_real_distribution<double>(0.0, 0.999)(rng);
    const auto x = oracle::sample_diffused(rng, split.full(), ab);
    const double p = exact_posterior(split, x, ab);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(std::abs(p - static_cast<double>(oracle::posterior(split, x, ab))) < 1e-12);
    const double lo = exact_log_odds(split, x, ab);
    if (std::abs(lo) < 30) CHECK(1.0 / (1.0 + std::exp(-lo)) == doctest::Approx(p).epsilon(1e-10));
  }
}

TEST_CASE("posterior equals the prior at pure noise") {
  const MixtureSplit split(three_modes(), {0});
  const double x[1] = {0.7};
  CHECK(exact_posterior(split, x, 0.0) == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("posterior is near one inside the forbidden mode and near zero elsewhere") {
  const MixtureSplit split(three_modes(), {0});
  const double in[1] = {-6.0}, out[1] = {6.0};
  CHECK(exact_posterior(split, in, 0.9999) > 1.0 - 1e-12);
  CHECK(exact_posterior(split, out, 0.9999) < 1e-12);
}
