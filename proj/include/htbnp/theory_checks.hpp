#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "htbnp/coefficient_field.hpp"
#include "htbnp/priors.hpp"
#include "htbnp/rng.hpp"
#include "htbnp/special.hpp"

namespace htbnp {

enum class BallKind { sobolev, holder, besov };

/// Smoothness ball in coefficient space:
///   sobolev:  sum_k k^{2 beta} f_k^2 <= L^2                       (single layout)
///   holder:   max_k |f_lk| <= 2^{-l(1/2+beta)} L for every level   (wavelet)
///   besov:    sum_l 2^{r l (beta + 1/2 - 1/r)} sum_k |f_lk|^r < L^r (wavelet)
struct SmoothnessBall {
  BallKind kind = BallKind::sobolev;
  double beta = 1.0;
  double radius = 1.0;  // L
  double r = 2.0;       // besov only, in [1,2]

  static SmoothnessBall sobolev(double beta, double L) { return {BallKind::sobolev, beta, L, 2.0}; }
  static SmoothnessBall holder(double beta, double L) { return {BallKind::holder, beta, L, 2.0}; }
  static SmoothnessBall besov(double beta, double r, double L) {
    if (!(r >= 1.0 && r <= 2.0)) throw std::domain_error("besov: r in [1,2]");
    return {BallKind::besov, beta, L, r};
  }
};

/// The ball's defining norm (sobolev/besov) or the tightest levelwise
/// constant (holder: smallest L making the field a member).
inline double ball_norm(const CoefficientField& f, const SmoothnessBall& ball) {
  switch (ball.kind) {
    case BallKind::sobolev: {
      if (f.layout != IndexLayout::single)
        throw std::domain_error("ball_norm: sobolev needs single layout");
      double s = 0.0;
      for (std::size_t i = 0; i < f.values.size(); ++i) {
        const double k = static_cast<double>(i + 1);
        s += std::pow(k, 2.0 * ball.beta) * f.values[i] * f.values[i];
      }
      return std::sqrt(s);
    }
    case BallKind::holder: {
      if (f.layout != IndexLayout::wavelet)
        throw std::domain_error("ball_norm: holder needs wavelet layout");
      double worst = 0.0;
      for (double v : f.scaling())
        worst = std::max(worst, std::fabs(v) * std::exp2(f.coarse_level * (0.5 + ball.beta)));
      for (int l = f.coarse_level; l <= f.max_level; ++l) {
        const double w = std::exp2(l * (0.5 + ball.beta));
        for (double v : f.level(l)) worst = std::max(worst, std::fabs(v) * w);
      }
      return worst;
    }
    case BallKind::besov: {
      if (f.layout != IndexLayout::wavelet)
        throw std::domain_error("ball_norm: besov needs wavelet layout");
      const double r = ball.r;
      double s = 0.0;
      auto add_level = [&](int l, std::span<const double> vals) {
        const double w = std::exp2(r * l * (ball.beta + 0.5 - 1.0 / r));
        double lv = 0.0;
        for (double v : vals) lv += std::pow(std::fabs(v), r);
        s += w * lv;
      };
      add_level(f.coarse_level, f.scaling());
      for (int l = f.coarse_level; l <= f.max_level; ++l) add_level(l, f.level(l));
      return std::pow(s, 1.0 / r);
    }
  }
  return 0.0;
}

/// Membership: norm <= L for sobolev and holder (levelwise bound with <=),
/// strict < L for besov, matching the definitions above.
inline bool ball_membership(const CoefficientField& f, const SmoothnessBall& ball) {
  const double n = ball_norm(f, ball);
  return ball.kind == BallKind::besov ? n < ball.radius : n <= ball.radius;
}

enum class RateFlavor { l2_ht, l2_ot, linf_ht, linf_ot };

/// Contraction-rate formulas (natural logs):
///   l2_ht:   (log n)^{(1+(1+kappa) beta)/(2 beta+1)}                 n^{-beta/(2 beta+1)}
///   l2_ot:   (log n)^{((1+kappa)(1+delta) beta)/(2 beta+1)}          n^{-beta/(2 beta+1)}
///   linf_ht: (log log n)^{2/(1+2 beta)} (log n)^{(1+(1+kappa) beta)/(1+2 beta)} n^{-beta/(2 beta+1)}
///   linf_ot: (log n)^{(2+2 kappa) beta/(1+2 beta)}                   n^{-beta/(2 beta+1)}
struct RateSpec {
  RateFlavor flavor = RateFlavor::l2_ot;
  double beta = 1.0;
  double kappa = 0.0;
  double delta = 0.5;  // ot flavors only
};

inline double rate_epsilon_n(const RateSpec& spec, double n) {
  if (!(n > 1.0)) throw std::domain_error("rate_epsilon_n: n > 1 required");
  if (spec.flavor == RateFlavor::linf_ht && !(n > std::exp(1.0)))
    throw std::domain_error("rate_epsilon_n: linf_ht needs n > e (log log n > 0)");
  const double beta = spec.beta, kappa = spec.kappa;
  const double ln = std::log(n);
  const double poly = std::pow(n, -beta / (2.0 * beta + 1.0));
  switch (spec.flavor) {
    case RateFlavor::l2_ht:
      return std::pow(ln, (1.0 + (1.0 + kappa) * beta) / (2.0 * beta + 1.0)) * poly;
    case RateFlavor::l2_ot:
      return std::pow(ln, ((1.0 + kappa) * (1.0 + spec.delta) * beta) / (2.0 * beta + 1.0)) * poly;
    case RateFlavor::linf_ht:
      return std::pow(std::log(ln), 2.0 / (1.0 + 2.0 * beta)) *
             std::pow(ln, (1.0 + (1.0 + kappa) * beta) / (1.0 + 2.0 * beta)) * poly;
    case RateFlavor::linf_ot:
      return std::pow(ln, (2.0 + 2.0 * kappa) * beta / (1.0 + 2.0 * beta)) * poly;
  }
  return poly;
}

struct PriorMassEstimate {
  double p_hat = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
  long hits = 0;
  long n_mc = 0;
};

/// Direct Monte-Carlo estimate of Pi[ ||f - f0|| < eps ] with a Wilson score
/// interval. Norm is L2 by default; the holder-flavoured checks use Linf.
inline PriorMassEstimate prior_mass_estimate(const PriorSpec& prior, const CoefficientField& f0,
                                             double eps, long n_mc, std::uint64_t seed,
                                             bool linf = false) {
  if (!(eps >= 0.0)) throw std::domain_error("prior_mass_estimate: eps >= 0");
  if (n_mc < 1000) throw std::domain_error("prior_mass_estimate: n_mc >= 1000");
  long hits = 0;
  for (long r = 0; r < n_mc; ++r) {
    const CoefficientField f = sample_prior(prior, derive_seed(seed, static_cast<std::uint64_t>(r)),
                                            f0.layout == IndexLayout::wavelet ? f0.coarse_level : 0);
    const double d = linf ? linf_distance(f, f0) : l2_distance(f, f0);
    if (d < eps) ++hits;
  }
  PriorMassEstimate est;
  est.hits = hits;
  est.n_mc = n_mc;
  est.p_hat = static_cast<double>(hits) / static_cast<double>(n_mc);
  const double z = 1.959963984540054;  // 95%
  const double nn = static_cast<double>(n_mc), p = est.p_hat;
  const double denom = 1.0 + z * z / nn;
  const double center = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  est.wilson_lo = std::max(0.0, center - half);
  est.wilson_hi = std::min(1.0, center + half);
  return est;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least squares of log(error) on log(n); n must be strictly increasing and
/// errors positive.
inline SlopeFit fit_rate_slope(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3) throw std::domain_error("fit_rate_slope: need at least 3 pairs");
  double prev_n = 0.0;
  for (auto& [n, err] : pairs) {
    if (!(n > prev_n)) throw std::domain_error("fit_rate_slope: n must be strictly increasing");
    if (!(err > 0.0)) throw std::domain_error("fit_rate_slope: errors must be positive");
    prev_n = n;
  }
  const double m = static_cast<double>(pairs.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (auto& [n, err] : pairs) {
    const double x = std::log(n), y = std::log(err);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  SlopeFit fit;
  const double vxx = sxx - sx * sx / m;
  const double vxy = sxy - sx * sy / m;
  const double vyy = syy - sy * sy / m;
  fit.slope = vxy / vxx;
  fit.intercept = (sy - fit.slope * sx) / m;
  fit.r_squared = vyy > 0.0 ? vxy * vxy / (vxx * vyy) : 1.0;
  return fit;
}

/// Kolmogorov-Smirnov distance of a sample against the standard normal CDF
/// (fully specified, no parameter estimation).
inline double ks_statistic_normal(std::vector<double> sample) {
  if (sample.empty()) throw std::domain_error("ks_statistic_normal: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = normal_cdf(sample[i]);
    ks = std::max(ks, std::fabs(F - static_cast<double>(i + 1) / n));
    ks = std::max(ks, std::fabs(F - static_cast<double>(i) / n));
  }
  return ks;
}

/// Coordinatewise normality signature: KS statistic of sqrt(n) (f_c - X_c)
/// over posterior draws against N(0,1), per requested coordinate. Reported,
/// not thresholded (the underlying statement is asymptotic).
inline std::vector<double> bvm_coordinate_check(const std::vector<std::vector<double>>& draws,
                                                const std::vector<double>& x, double n,
                                                const std::vector<std::size_t>& coords) {
  std::vector<double> stats;
  stats.reserve(coords.size());
  for (std::size_t c : coords) {
    if (c >= x.size()) throw std::domain_error("bvm_coordinate_check: coordinate out of range");
    std::vector<double> centered;
    centered.reserve(draws.size());
    for (const auto& d : draws) {
      if (c >= d.size()) throw std::domain_error("bvm_coordinate_check: draw too short");
      centered.push_back(std::sqrt(n) * (d[c] - x[c]));
    }
    stats.push_back(ks_statistic_normal(std::move(centered)));
  }
  return stats;
}

}  // namespace htbnp
