#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "htbnp/rng.hpp"
#include "htbnp/wavelet.hpp"

using namespace htbnp;

namespace {

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("filter tables are orthonormal scaling filters") {
  for (auto kind : {WaveletKind::haar, WaveletKind::symmlet8, WaveletKind::daubechies8}) {
    auto f = WaveletFilter::create(kind);
    const auto h = f.lowpass();
    double sum = 0.0, norm2 = 0.0;
    for (double v : h) {
      sum += v;
      norm2 += v * v;
    }
    REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(std::sqrt(2.0), 1e-12));
    REQUIRE_THAT(std::sqrt(norm2), Catch::Matchers::WithinAbs(1.0, 1e-12));
    // double-shift orthogonality of the lowpass
    for (std::size_t shift = 2; shift < h.size(); shift += 2) {
      double dot = 0.0;
      for (std::size_t m = 0; m + shift < h.size(); ++m) dot += h[m] * h[m + shift];
      REQUIRE_THAT(dot, Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
  }
}

TEST_CASE("symmlet8 has eight vanishing moments") {
  auto f = WaveletFilter::create(WaveletKind::symmlet8);
  const auto g = f.highpass();
  for (int p = 0; p < 8; ++p) {
    double m = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) m += g[k] * std::pow(static_cast<double>(k), p);
    REQUIRE_THAT(m, Catch::Matchers::WithinAbs(0.0, 1e-8));
  }
}

TEST_CASE("haar on a constant block") {
  std::vector<double> x = {1.0, 1.0, 1.0, 1.0};
  auto field = dwt_forward(x, WaveletFilter::create(WaveletKind::haar), 0);
  REQUIRE(field.scaling().size() == 1);
  REQUIRE_THAT(field.scaling()[0], Catch::Matchers::WithinRel(2.0, 1e-14));
  for (int l = 0; l <= field.max_level; ++l)
    for (double d : field.level(l)) REQUIRE_THAT(d, Catch::Matchers::WithinAbs(0.0, 1e-14));
}

TEST_CASE("parseval and perfect reconstruction") {
  Rng rng(5);
  for (auto kind : {WaveletKind::haar, WaveletKind::symmlet8, WaveletKind::daubechies8}) {
    auto f = WaveletFilter::create(kind);
    for (int coarse : {0, 3, 5}) {
      std::vector<double> x(256);
      for (auto& v : x) v = rng.normal();
      auto field = dwt_forward(x, f, coarse);
      REQUIRE_THAT(l2(field.values), Catch::Matchers::WithinAbs(l2(x), 1e-10));
      auto back = dwt_inverse(field, f);
      for (std::size_t i = 0; i < x.size(); ++i)
        REQUIRE_THAT(back[i], Catch::Matchers::WithinAbs(x[i], 1e-10));
    }
  }
}

TEST_CASE("all-zero coefficients synthesize to zero") {
  auto field = CoefficientField::wavelet(0, 5);
  auto x = dwt_inverse(field, WaveletFilter::create(WaveletKind::symmlet8));
  for (double v : x) REQUIRE(v == 0.0);
}

TEST_CASE("single unit detail coefficient has unit norm") {
  for (auto kind : {WaveletKind::symmlet8, WaveletKind::daubechies8}) {
    auto f = WaveletFilter::create(kind);
    auto field = CoefficientField::wavelet(0, 6);
    field.level(4)[3] = 1.0;
    auto x = dwt_inverse(field, f);
    REQUIRE_THAT(l2(x), Catch::Matchers::WithinAbs(1.0, 1e-10));
  }
}

TEST_CASE("gram matrix is the identity at J = 6") {
  const int J = 6;
  const std::size_t N = 1u << J;
  auto f = WaveletFilter::create(WaveletKind::symmlet8);
  std::vector<std::vector<double>> basis;
  for (std::size_t i = 0; i < N; ++i) {
    auto field = CoefficientField::wavelet(0, J - 1);
    field.values[i] = 1.0;
    basis.push_back(dwt_inverse(field, f));
  }
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i; j < N; ++j) {
      const double dot =
          std::inner_product(basis[i].begin(), basis[i].end(), basis[j].begin(), 0.0);
      REQUIRE_THAT(dot, Catch::Matchers::WithinAbs(i == j ? 1.0 : 0.0, 1e-8));
    }
}

TEST_CASE("energy is conserved under within-level permutations", "[property]") {
  Rng rng(21);
  auto f = WaveletFilter::create(WaveletKind::symmlet8);
  auto field = CoefficientField::wavelet(0, 5);
  for (auto& v : field.values) v = rng.normal();
  const double base = l2(dwt_inverse(field, f));
  for (int l = 2; l <= 5; ++l) {
    auto permuted = field;
    auto lev = permuted.level(l);
    std::rotate(lev.begin(), lev.begin() + 1, lev.end());
    REQUIRE_THAT(l2(dwt_inverse(permuted, f)), Catch::Matchers::WithinAbs(base, 1e-10));
  }
}

TEST_CASE("dwt errors") {
  auto f = WaveletFilter::create(WaveletKind::haar);
  std::vector<double> bad(6, 0.0);
  REQUIRE_THROWS_AS(dwt_forward(bad, f, 0), std::domain_error);
  std::vector<double> ok(8, 0.0);
  REQUIRE_THROWS_AS(dwt_forward(ok, f, 3), std::domain_error);

  auto field = CoefficientField::wavelet(0, 3);
  field.values.pop_back();  // level-size mismatch
  REQUIRE_THROWS_AS(dwt_inverse(field, f), std::domain_error);
}

TEST_CASE("eval_function: constants, linearity, dyadic agreement") {
  auto haar = WaveletFilter::create(WaveletKind::haar);

  // scaling-only Haar field synthesizes to a constant
  auto c = CoefficientField::wavelet(0, 4);
  c.scaling()[0] = 3.0;
  std::vector<double> grid = {0.0, 0.1, 0.25, 0.5, 0.9, 1.0};
  auto vals = eval_function(c, haar, grid);
  for (double v : vals) REQUIRE_THAT(v, Catch::Matchers::WithinRel(vals[0], 1e-12));

  // linear in coefficients
  Rng rng(9);
  auto a = CoefficientField::wavelet(0, 4);
  auto b = CoefficientField::wavelet(0, 4);
  for (auto& v : a.values) v = rng.normal();
  for (auto& v : b.values) v = rng.normal();
  auto ab = CoefficientField::wavelet(0, 4);
  for (std::size_t i = 0; i < ab.values.size(); ++i)
    ab.values[i] = 2.0 * a.values[i] - 3.0 * b.values[i];
  auto va = eval_function(a, haar, grid);
  auto vb = eval_function(b, haar, grid);
  auto vab = eval_function(ab, haar, grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    REQUIRE_THAT(vab[i], Catch::Matchers::WithinAbs(2.0 * va[i] - 3.0 * vb[i], 1e-12));

  // agreement with dwt_inverse at dyadic points for a native-resolution field
  auto sym = WaveletFilter::create(WaveletKind::symmlet8);
  auto field = CoefficientField::wavelet(0, kEvalFineLog2 - 1);
  for (auto& v : field.values) v = rng.normal();
  auto direct = dwt_inverse(field, sym);
  const std::size_t N = direct.size();
  std::vector<double> dyadic(N);
  for (std::size_t j = 0; j < N; ++j) dyadic[j] = static_cast<double>(j) / N;
  auto looked_up = eval_function(field, sym, dyadic);
  for (std::size_t j = 0; j < N; ++j)
    REQUIRE_THAT(looked_up[j], Catch::Matchers::WithinAbs(direct[j], 1e-10));

  REQUIRE_THROWS_AS(eval_function(c, haar, std::vector<double>{1.5}), std::domain_error);
  REQUIRE_THROWS_AS(eval_function(c, haar, std::vector<double>{-0.1}), std::domain_error);
}
