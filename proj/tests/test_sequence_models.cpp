#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "htbnp/sequence_models.hpp"
#include "htbnp/theory_checks.hpp"

using namespace htbnp;

TEST_CASE("volterra multipliers") {
  auto kappa = volterra_multipliers(1000);
  REQUIRE_THAT(kappa[0], Catch::Matchers::WithinRel(2.0 / kPi, 1e-15));
  REQUIRE_THAT(kappa[0], Catch::Matchers::WithinAbs(0.63662, 5e-6));
  for (std::size_t i = 1; i < kappa.size(); ++i) REQUIRE(kappa[i] < kappa[i - 1]);

  // log-log slope -> -1 (ill-posedness nu = 1)
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < kappa.size(); ++i)
    pts.push_back({static_cast<double>(i + 1), kappa[i]});
  auto fit = fit_rate_slope(pts);
  REQUIRE_THAT(fit.slope, Catch::Matchers::WithinAbs(-1.0, 0.02));

  REQUIRE_THROWS_AS(volterra_multipliers(0), std::domain_error);

  // the printed eigenvalue variant differs by exactly pi^2
  auto printed = volterra_multipliers_reciprocal(5);
  for (int i = 0; i < 5; ++i)
    REQUIRE_THAT(printed[i], Catch::Matchers::WithinRel(kappa[i] * kPi * kPi, 1e-13));
}

TEST_CASE("sobolev sin truth") {
  auto f = make_truth(TruthSpec::sobolev_sin(), 50);
  REQUIRE(f.values.size() == 50);
  REQUIRE_THAT(f.at(1), Catch::Matchers::WithinRel(std::sin(1.0), 1e-15));
  REQUIRE_THAT(f.at(10), Catch::Matchers::WithinRel(std::pow(10.0, -1.5) * std::sin(10.0), 1e-15));
}

TEST_CASE("sobolev sin truth has finite sobolev norm below beta = 1", "[property]") {
  // partial sums of k^{2 beta} f_k^2 satisfy a Cauchy criterion up to k = 1e6:
  // per-decade increments shrink geometrically (like 10^{-0.2} for beta = 0.9)
  const double beta = 0.9;
  double partial = 0.0;
  std::vector<double> at_decade;
  std::int64_t next = 10;
  for (std::int64_t k = 1; k <= 1000000; ++k) {
    const double fk = std::pow(static_cast<double>(k), -1.5) * std::sin(static_cast<double>(k));
    partial += std::pow(static_cast<double>(k), 2.0 * beta) * fk * fk;
    if (k == next) {
      at_decade.push_back(partial);
      next *= 10;
    }
  }
  at_decade.push_back(partial);
  for (std::size_t d = 2; d < at_decade.size(); ++d) {
    const double inc_prev = at_decade[d - 1] - at_decade[d - 2];
    const double inc = at_decade[d] - at_decade[d - 1];
    REQUIRE(inc < 0.8 * inc_prev);
  }
  REQUIRE(partial < 4.0);  // member of S^0.9(2)
}

TEST_CASE("density log truth") {
  auto f = make_truth(TruthSpec::density_log(), 6);
  REQUIRE(f.layout == IndexLayout::wavelet);
  REQUIRE(f.max_level == 6);
  REQUIRE_THAT(f.level(0)[0], Catch::Matchers::WithinRel(4.0, 1e-15));  // 4 cos^3(0) 2^0
  const double c3 = std::cos(3.0);
  REQUIRE_THAT(f.level(2)[3],
               Catch::Matchers::WithinRel(4.0 * c3 * c3 * c3 * std::exp2(-5.0), 1e-13));
  for (double v : f.scaling()) REQUIRE(v == 0.0);
}

TEST_CASE("dj94 truths hit the target snr") {
  for (auto s : {Dj94Signal::blocks, Dj94Signal::bumps, Dj94Signal::heavisine,
                 Dj94Signal::doppler}) {
    auto f = make_truth(TruthSpec::dj94(s), 0);
    REQUIRE(f.coarse_level == 5);
    REQUIRE(f.values.size() == 2048);
    double norm = 0.0;
    for (double v : f.values) norm += v * v;
    // ||signal||_2 / ||unit noise||_2 with E||noise||_2 ~ sqrt(2048)
    const double snr = std::sqrt(norm) / std::sqrt(2048.0);
    REQUIRE_THAT(snr, Catch::Matchers::WithinAbs(7.0, 1e-9));
  }
}

TEST_CASE("snr_rescale exactness") {
  std::vector<double> sig = {1.0, -2.0, 0.5, 3.0};
  auto out = snr_rescale(sig, 2.0, 7.0);
  double norm = 0.0;
  for (double v : out) norm += v * v;
  REQUIRE_THAT(std::sqrt(norm) / (2.0 * std::sqrt(4.0)), Catch::Matchers::WithinRel(7.0, 1e-12));

  // unit-norm input of length 1, target 1, noise 1 -> unchanged
  std::vector<double> one = {1.0};
  auto same = snr_rescale(one, 1.0, 1.0);
  REQUIRE_THAT(same[0], Catch::Matchers::WithinRel(1.0, 1e-15));

  // doubling the target doubles the norm
  auto twice = snr_rescale(sig, 2.0, 14.0);
  for (std::size_t i = 0; i < sig.size(); ++i)
    REQUIRE_THAT(twice[i], Catch::Matchers::WithinRel(2.0 * out[i], 1e-14));

  std::vector<double> zeros(8, 0.0);
  REQUIRE_THROWS_AS(snr_rescale(zeros, 1.0, 7.0), std::domain_error);
}

TEST_CASE("simulate determinism, mean and variance") {
  auto truth = make_truth(TruthSpec::sobolev_sin(), 20);
  auto a = simulate(truth, 100.0, std::nullopt, 31);
  auto b = simulate(truth, 100.0, std::nullopt, 31);
  REQUIRE(a.x == b.x);
  REQUIRE_THROWS_AS(simulate(truth, 0.0, std::nullopt, 1), std::domain_error);
  REQUIRE_THROWS_AS(simulate(truth, -1.0, std::nullopt, 1), std::domain_error);

  // n -> infinity limit: max |X_k - kappa_k f_k| below 1e-4 at n = 1e12
  auto kappa = volterra_multipliers(20);
  auto obs = simulate(truth, 1e12, kappa, 17);
  for (std::size_t i = 0; i < obs.x.size(); ++i)
    REQUIRE(std::fabs(obs.x[i] - kappa[i] * truth.values[i]) < 1e-4);

  // zero truth: empirical variance ~ 1/n over many coordinates
  auto zero = CoefficientField::single(std::vector<double>(100000, 0.0));
  auto noisy = simulate(zero, 4.0, std::nullopt, 23);
  double var = 0.0;
  for (double x : noisy.x) var += x * x;
  var /= static_cast<double>(noisy.x.size());
  const double se = (1.0 / 4.0) * std::sqrt(2.0 / static_cast<double>(noisy.x.size()));
  REQUIRE_THAT(var, Catch::Matchers::WithinAbs(0.25, 3.0 * se));

  // forward length mismatch
  auto k5 = volterra_multipliers(5);
  REQUIRE_THROWS_AS(simulate(truth, 1.0, k5, 1), std::domain_error);
}

TEST_CASE("dj94 closed forms") {
  // blocks is piecewise constant with jumps at the knots
  REQUIRE(dj94::blocks(0.05) == 0.0);
  REQUIRE_THAT(dj94::blocks(0.11), Catch::Matchers::WithinRel(4.0, 1e-14));
  // t = 0.5: 4 sin(2 pi) - sgn(0.2) - sgn(0.22) = -2
  REQUIRE_THAT(dj94::heavisine(0.5), Catch::Matchers::WithinAbs(-2.0, 1e-12));
  REQUIRE(std::fabs(dj94::doppler(0.0)) < 1e-12);
  REQUIRE(dj94::bumps(0.25) > 4.0);  // bump of height 5 at t = 0.25
}
