#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "htbnp/priors.hpp"
#include "htbnp/quadrature.hpp"
#include "htbnp/special.hpp"
#include "htbnp/tail_density.hpp"

using namespace htbnp;

namespace {

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i)
    g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return g;
}

}  // namespace

TEST_CASE("rng determinism and seed derivation") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    REQUIRE(u == b.uniform());
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
  REQUIRE(a.uniform() != c.uniform());
  REQUIRE(derive_seed(1, 0) != derive_seed(1, 1));
  REQUIRE(derive_seed(1, 0) != derive_seed(2, 0));
  REQUIRE(derive_seed(7, 5) == derive_seed(7, 5));
}

TEST_CASE("normal quantile inverts the normal cdf") {
  REQUIRE(normal_quantile(0.5) == 0.0);
  REQUIRE_THAT(normal_quantile(0.975), Catch::Matchers::WithinAbs(1.959963984540054, 1e-12));
  for (double p : {1e-12, 1e-6, 0.001, 0.2, 0.5, 0.8, 0.999, 1 - 1e-9}) {
    const double x = normal_quantile(p);
    REQUIRE_THAT(normal_cdf(x), Catch::Matchers::WithinRel(p, 1e-12));
  }
  REQUIRE_THROWS_AS(normal_quantile(0.0), std::domain_error);
  REQUIRE_THROWS_AS(normal_quantile(1.0), std::domain_error);
}

TEST_CASE("eval_scale closed forms") {
  auto ot = ScaleSpec::ot(1.0, 1.0, IndexLayout::single);
  REQUIRE(ot(1) == 1.0);  // log 1 = 0
  REQUIRE_THAT(ot(2), Catch::Matchers::WithinRel(std::exp(-std::pow(std::log(2.0), 2.0)), 1e-15));
  REQUIRE_THAT(ot(2), Catch::Matchers::WithinAbs(0.61850, 5e-6));

  auto ht = ScaleSpec::ht(0.5, IndexLayout::single);
  REQUIRE_THAT(ht(4), Catch::Matchers::WithinRel(0.25, 1e-15));

  auto wot = ScaleSpec::ot(1.0, 1.0, IndexLayout::wavelet);
  REQUIRE(wot(0) == 1.0);
  REQUIRE_THAT(wot(2), Catch::Matchers::WithinRel(0.0625, 1e-15));

  REQUIRE_THROWS_AS(ot(0), std::domain_error);
  REQUIRE_THROWS_AS(wot(-1), std::domain_error);
}

TEST_CASE("eval_scale strictly decreasing", "[property]") {
  const auto specs = {ScaleSpec::ot(1.0, 0.5, IndexLayout::single),
                      ScaleSpec::ot(1.0, 1.0, IndexLayout::single),
                      ScaleSpec::ht(5.0, IndexLayout::single),
                      ScaleSpec::gaussian_scale(1.0, IndexLayout::single)};
  for (const auto& s : specs) {
    double prev = s(1);
    REQUIRE(prev == 1.0);
    for (std::int64_t k = 2; k <= 1000000; k = std::max(k + 1, k + k / 7)) {
      const double v = s(k);
      REQUIRE(v > 0.0);
      REQUIRE(v < prev);
      prev = v;
    }
  }
  const auto wspecs = {ScaleSpec::ot(1.0, 0.5, IndexLayout::wavelet),
                       ScaleSpec::ht(5.0, IndexLayout::wavelet)};
  for (const auto& s : wspecs) {
    double prev = s(0);
    for (int l = 1; l <= 30; ++l) {
      REQUIRE(s(l) < prev);
      REQUIRE(s(l) > 0.0);
      prev = s(l);
    }
  }
}

TEST_CASE("tail pdf closed forms and symmetry") {
  auto cauchy = TailDensity::cauchy();
  REQUIRE_THAT(cauchy.survival(1.0), Catch::Matchers::WithinRel(0.25, 1e-14));
  auto gauss = TailDensity::gaussian();
  REQUIRE_THAT(gauss.pdf(0.0), Catch::Matchers::WithinRel(1.0 / std::sqrt(2.0 * kPi), 1e-15));

  for (const auto& h : {TailDensity::student_t(3.0), cauchy, gauss, TailDensity::laplace()}) {
    for (double x : log_grid(1e-3, 1e6, 37)) {
      REQUIRE(h.pdf(x) == h.pdf(-x));  // exact, via |x|
      REQUIRE_THAT(h.cdf(x) + h.survival(x), Catch::Matchers::WithinRel(1.0, 1e-12));
    }
    REQUIRE_THROWS_AS(h.pdf(std::numeric_limits<double>::infinity()), std::domain_error);
  }
}

TEST_CASE("tail pdf nonincreasing on a fine positive grid", "[property]") {
  for (const auto& h : {TailDensity::student_t(3.0), TailDensity::cauchy(),
                        TailDensity::gaussian(), TailDensity::laplace()}) {
    double prev = h.pdf(0.0);
    for (int i = 1; i <= 2000; ++i) {
      const double x = 20.0 * i / 2000.0;
      const double p = h.pdf(x);
      REQUIRE(p <= prev * (1.0 + 1e-15));
      REQUIRE(p > 0.0);
      prev = p;
    }
  }
}

TEST_CASE("tail pdf integrates to one") {
  // quadrature over [-1e6, 1e6]; Cauchy via its cdf (mass outside is ~6.4e-7)
  for (const auto& h : {TailDensity::student_t(3.0), TailDensity::gaussian(),
                        TailDensity::laplace()}) {
    auto g = [&h](double x) { return h.log_pdf(x); };
    std::vector<std::pair<double, double>> segs = {{-1e6, -100.0}, {-100.0, 100.0}, {100.0, 1e6}};
    auto w = [](int, double) { return 1.0; };
    auto r = integrate_log(g, w, 1, segs, {});
    REQUIRE(r.converged);
    REQUIRE_THAT(std::exp(r.components[0].integral.log_abs),
                 Catch::Matchers::WithinAbs(1.0, 1e-6));
  }
  auto cauchy = TailDensity::cauchy();
  REQUIRE_THAT(cauchy.cdf(1e6) - cauchy.cdf(-1e6), Catch::Matchers::WithinAbs(1.0, 1e-6));
}

TEST_CASE("student t moments: second finite, third divergent for nu = 3") {
  auto h = TailDensity::student_t(3.0);
  auto moment_on = [&h](double q, double T) {
    auto g = [&](double x) { return q * std::log(x) + h.log_pdf(x); };
    return 2.0 * std::exp(integrate_log_scalar(g, 1e-12, T, 1e-9, 8000));
  };
  // second moment stabilises at nu/(nu-2) = 3
  const double m2_small = moment_on(2.0, 1e4);
  const double m2_large = moment_on(2.0, 1e6);
  REQUIRE_THAT(m2_large, Catch::Matchers::WithinRel(3.0, 1e-3));
  REQUIRE_THAT(m2_large - m2_small, Catch::Matchers::WithinAbs(0.0, 1e-3));
  // third moment grows without bound on expanding grids
  const double m3_small = moment_on(3.0, 1e3);
  const double m3_large = moment_on(3.0, 1e6);
  REQUIRE(m3_large > m3_small + 1.0);
}

TEST_CASE("sampler matches cdf in Kolmogorov-Smirnov distance") {
  const int N = 100000;
  for (const auto& h : {TailDensity::student_t(3.0), TailDensity::cauchy(),
                        TailDensity::gaussian(), TailDensity::laplace()}) {
    Rng rng(2024);
    std::vector<double> draws(N);
    for (auto& d : draws) d = h.sample(rng);
    std::sort(draws.begin(), draws.end());
    double ks = 0.0;
    for (int i = 0; i < N; ++i) {
      const double F = h.cdf(draws[i]);
      ks = std::max(ks, std::fabs(F - (i + 1.0) / N));
      ks = std::max(ks, std::fabs(F - static_cast<double>(i) / N));
    }
    REQUIRE(ks < 0.01);
  }
}

TEST_CASE("check_conditions: student passes, cauchy needs exponent 1, gaussian fails log bound") {
  const auto grid = log_grid(0.1, 1e6, 600);

  auto st = check_conditions(TailDensity::student_t(3.0), grid);
  REQUIRE(st.symmetric);
  REQUIRE(st.decreasing);
  REQUIRE(st.log_bound_holds);   // kappa = 0, polynomial tail
  REQUIRE(st.tail_bound_holds);  // H_bar ~ x^{-3}
  REQUIRE(st.c1 > 0.0);
  REQUIRE(st.moment_finite);     // q = 2 < nu

  auto ca2 = check_conditions(TailDensity::cauchy(), grid, 2.0, 0.5);
  REQUIRE_FALSE(ca2.tail_bound_holds);  // H_bar ~ 1/(pi x): x^2 H_bar diverges
  auto ca1 = check_conditions(TailDensity::cauchy(), grid, 1.0, 0.5);
  REQUIRE(ca1.tail_bound_holds);
  REQUIRE_THAT(ca1.c2, Catch::Matchers::WithinAbs(1.0 / kPi, 0.05));

  auto ga = check_conditions(TailDensity::gaussian(), grid);
  REQUIRE_FALSE(ga.log_bound_holds);  // log(1/phi) ~ x^2/2 beats any polylog
  REQUIRE(ga.tail_bound_holds);
  REQUIRE(ga.symmetric);

  REQUIRE_THROWS_AS(check_conditions(TailDensity::gaussian(), {}), std::domain_error);
  REQUIRE_THROWS_AS(check_conditions(TailDensity::gaussian(), {2.0, 1.0}), std::domain_error);
}

TEST_CASE("declared moments and tail flags") {
  REQUIRE(TailDensity::student_t(3.0).q_moments() < 3.0);
  REQUIRE(TailDensity::student_t(3.0).q_moments() > 2.99);
  REQUIRE(TailDensity::cauchy().q_moments() < 1.0);
  REQUIRE(TailDensity::student_t(3.0).heavy_tailed());
  REQUIRE_FALSE(TailDensity::gaussian().heavy_tailed());
  REQUIRE_FALSE(TailDensity::laplace().heavy_tailed());
}

TEST_CASE("sample_prior determinism and marginal scale") {
  PriorSpec prior(ScaleSpec::ht(0.5, IndexLayout::single), TailDensity::gaussian(), 16);
  auto f1 = sample_prior(prior, 99);
  auto f2 = sample_prior(prior, 99);
  REQUIRE(f1.values == f2.values);

  // per-coordinate sd over many draws ~ k^{-1/2-alpha}
  const int R = 100000;
  std::vector<double> sum2(16, 0.0);
  for (int r = 0; r < R; ++r) {
    auto f = sample_prior(prior, derive_seed(7, r));
    for (int i = 0; i < 16; ++i) sum2[i] += f.values[i] * f.values[i];
  }
  for (int k = 1; k <= 16; ++k) {
    const double sd = std::sqrt(sum2[k - 1] / R);
    const double expected = std::pow(k, -1.0);
    // MC s.e. of sd estimate is sd/sqrt(2R)
    REQUIRE_THAT(sd, Catch::Matchers::WithinAbs(expected, 3.0 * expected / std::sqrt(2.0 * R)));
  }
}

TEST_CASE("sample_prior cauchy interquartile range") {
  PriorSpec prior(ScaleSpec::ht(0.5, IndexLayout::single), TailDensity::cauchy(), 8);
  const int R = 60000;
  std::vector<std::vector<double>> draws(8, std::vector<double>());
  for (auto& d : draws) d.reserve(R);
  for (int r = 0; r < R; ++r) {
    auto f = sample_prior(prior, derive_seed(11, r));
    for (int i = 0; i < 8; ++i) draws[i].push_back(f.values[i]);
  }
  for (int k = 1; k <= 8; ++k) {
    auto& d = draws[k - 1];
    std::sort(d.begin(), d.end());
    const double q25 = d[static_cast<std::size_t>(0.25 * R)];
    const double q50 = d[static_cast<std::size_t>(0.50 * R)];
    const double q75 = d[static_cast<std::size_t>(0.75 * R)];
    const double sigma = std::pow(k, -1.0);
    REQUIRE_THAT(q50, Catch::Matchers::WithinAbs(0.0, 0.03 * sigma));
    REQUIRE_THAT(q75 - q25, Catch::Matchers::WithinAbs(2.0 * sigma, 0.06 * sigma));
  }
}

TEST_CASE("wavelet prior draws scale by level") {
  PriorSpec prior(ScaleSpec::ot(1.0, 1.0, IndexLayout::wavelet), TailDensity::gaussian(), 5);
  auto f = sample_prior(prior, 3, 0);
  REQUIRE(f.values.size() == 64);
  REQUIRE(f.layout == IndexLayout::wavelet);
  REQUIRE(f.max_level == 5);
  // same seed, same field
  auto g = sample_prior(prior, 3, 0);
  REQUIRE(f.values == g.values);
}
