#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "htbnp/rng.hpp"
#include "htbnp/special.hpp"

namespace htbnp {

enum class TailKind { student_t, cauchy, gaussian, laplace };

/// Symmetric coordinate density h of a series prior, together with its
/// declared tail-log exponent kappa (the exponent in the bound
/// log(1/h(x)) <= c1 (1 + log^{1+kappa}(1+x))) and the supremum q of finite
/// absolute moments. Gaussian and Laplace are light-tailed comparison
/// baselines; they carry a declared kappa but heavy_tailed() is false and
/// check_conditions flags the log bound as failing for them on wide grids.
class TailDensity {
 public:
  static TailDensity student_t(double nu) {
    if (!(nu > 0.0)) throw std::domain_error("student_t: nu must be positive");
    TailDensity h;
    h.kind_ = TailKind::student_t;
    h.nu_ = nu;
    h.kappa_ = 0.0;
    h.q_moments_ = std::nextafter(nu, 0.0);  // moments exist for q strictly below nu
    h.log_norm_ = std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0) -
                  0.5 * std::log(nu * kPi);
    return h;
  }
  static TailDensity cauchy() {
    TailDensity h;
    h.kind_ = TailKind::cauchy;
    h.kappa_ = 0.0;
    h.q_moments_ = std::nextafter(1.0, 0.0);
    return h;
  }
  static TailDensity gaussian() {
    TailDensity h;
    h.kind_ = TailKind::gaussian;
    h.kappa_ = 1.0;
    h.q_moments_ = std::numeric_limits<double>::infinity();
    return h;
  }
  static TailDensity laplace() {
    TailDensity h;
    h.kind_ = TailKind::laplace;
    h.kappa_ = 1.0;
    h.q_moments_ = std::numeric_limits<double>::infinity();
    return h;
  }

  TailKind kind() const { return kind_; }
  double nu() const { return nu_; }
  double kappa() const { return kappa_; }
  double q_moments() const { return q_moments_; }
  bool heavy_tailed() const {
    return kind_ == TailKind::student_t || kind_ == TailKind::cauchy;
  }

  std::string name() const {
    switch (kind_) {
      case TailKind::student_t: return "student_t(" + std::to_string(nu_) + ")";
      case TailKind::cauchy: return "cauchy";
      case TailKind::gaussian: return "gaussian";
      case TailKind::laplace: return "laplace";
    }
    return "?";
  }

  double log_pdf(double x) const {
    require_finite(x);
    const double a = std::fabs(x);  // evaluate through |x| so symmetry is exact
    switch (kind_) {
      case TailKind::student_t:
        return log_norm_ - 0.5 * (nu_ + 1.0) * std::log1p(a * a / nu_);
      case TailKind::cauchy:
        return -std::log(kPi) - std::log1p(a * a);
      case TailKind::gaussian:
        return log_normal_pdf(a);
      case TailKind::laplace:
        return -a - std::log(2.0);
    }
    return kNegInf;
  }

  double pdf(double x) const { return std::exp(log_pdf(x)); }

  double cdf(double x) const {
    require_finite(x);
    if (x < 0.0) return survival(-x);
    return 1.0 - survival(x);
  }

  /// Upper tail H_bar(x) = P(Z > x); accurate (no cancellation) for x >= 0.
  double survival(double x) const {
    require_finite(x);
    if (x < 0.0) return 1.0 - survival(-x);
    switch (kind_) {
      case TailKind::student_t: {
        boost::math::students_t_distribution<double> d(nu_);
        return boost::math::cdf(boost::math::complement(d, x));
      }
      case TailKind::cauchy:
        // 1/2 - atan(x)/pi, rewritten via atan(1/x) to stay accurate far out
        return x <= 1.0 ? 0.5 - std::atan(x) / kPi : std::atan(1.0 / x) / kPi;
      case TailKind::gaussian:
        return normal_survival(x);
      case TailKind::laplace:
        return 0.5 * std::exp(-x);
    }
    return 0.0;
  }

  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile: p must be in (0,1)");
    switch (kind_) {
      case TailKind::student_t: {
        boost::math::students_t_distribution<double> d(nu_);
        return boost::math::quantile(d, p);
      }
      case TailKind::cauchy:
        return std::tan(kPi * (p - 0.5));
      case TailKind::gaussian:
        return normal_quantile(p);
      case TailKind::laplace:
        return p < 0.5 ? std::log(2.0 * p) : -std::log(2.0 * (1.0 - p));
    }
    return 0.0;
  }

  /// Inverse-CDF sampling; monotone in the underlying uniform.
  double sample(Rng& rng) const { return quantile(rng.uniform()); }

 private:
  static void require_finite(double x) {
    if (!std::isfinite(x)) throw std::domain_error("tail density: non-finite argument");
  }

  TailKind kind_ = TailKind::gaussian;
  double nu_ = 0.0;
  double kappa_ = 0.0;
  double q_moments_ = 0.0;
  double log_norm_ = 0.0;
};

/// Result of probing the tail conditions on a finite grid. The constants c1
/// and c2 are the smallest values validating the respective bound over the
/// grid; "holds" means the implied constant has stabilised over the top of
/// the grid (ratio test), so the bound is plausibly uniform, while a
/// diverging constant is reported as failure.
struct ConditionReport {
  bool symmetric = false;
  bool decreasing = false;
  bool log_bound_holds = false;
  double c1 = 0.0;       // for the declared kappa
  bool tail_bound_holds = false;
  double c2 = 0.0;       // for the requested tail exponent
  double tail_exponent = 2.0;
  bool moment_finite = false;
  double moment_value = 0.0;  // partial integral of |x|^q h on the grid span
  double q = 0.0;
};

namespace detail {

/// True when g evaluated at the top of the grid has stabilised relative to
/// the value one decade (in x) earlier: max over the last decade within a
/// factor 1.5 of the max over everything before it.
inline bool ratio_stable(const std::vector<double>& xs, const std::vector<double>& gs) {
  const double x_hi = xs.back();
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] > x_hi / 10.0) tail = std::max(tail, gs[i]);
    else head = std::max(head, gs[i]);
  }
  if (head == 0.0) return tail == 0.0;
  return tail <= 1.5 * head;
}

}  // namespace detail

inline ConditionReport check_conditions(const TailDensity& h, const std::vector<double>& grid,
                                        double tail_exponent = 2.0, double moment_q = 2.0) {
  if (grid.empty()) throw std::domain_error("check_conditions: empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || (i > 0 && grid[i] <= grid[i - 1]))
      throw std::domain_error("check_conditions: grid must be sorted and positive");
  }

  ConditionReport rep;
  rep.tail_exponent = tail_exponent;
  rep.q = moment_q;

  rep.symmetric = true;
  for (double x : grid)
    if (h.pdf(x) != h.pdf(-x)) rep.symmetric = false;

  rep.decreasing = true;
  double prev = h.pdf(0.0);
  for (double x : grid) {
    const double p = h.pdf(x);
    if (p > prev * (1.0 + 1e-12)) rep.decreasing = false;
    prev = p;
  }

  // (1.6)-type log bound: c1(x) = log(1/h(x)) / (1 + log^{1+kappa}(1+x))
  std::vector<double> c1s;
  c1s.reserve(grid.size());
  for (double x : grid) {
    const double denom = 1.0 + std::pow(std::log1p(x), 1.0 + h.kappa());
    c1s.push_back(std::max(0.0, -h.log_pdf(x)) / denom);
  }
  rep.c1 = *std::max_element(c1s.begin(), c1s.end());
  rep.log_bound_holds = detail::ratio_stable(grid, c1s);

  // (3.3)-type tail bound: c2(x) = H_bar(x) * x^e
  std::vector<double> c2s;
  c2s.reserve(grid.size());
  for (double x : grid) c2s.push_back(h.survival(x) * std::pow(x, tail_exponent));
  rep.c2 = *std::max_element(c2s.begin(), c2s.end());
  rep.tail_bound_holds = detail::ratio_stable(grid, c2s);

  // Moment probe: trapezoid partial integrals of 2 |x|^q h(x); finite when the
  // running integral has stabilised over the last decade of the grid.
  std::vector<double> partial;
  partial.reserve(grid.size());
  double acc = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double a = grid[i - 1], b = grid[i];
    const double fa = 2.0 * std::pow(a, moment_q) * h.pdf(a);
    const double fb = 2.0 * std::pow(b, moment_q) * h.pdf(b);
    acc += 0.5 * (fa + fb) * (b - a);
    partial.push_back(acc);
  }
  rep.moment_value = acc;
  if (partial.size() >= 2) {
    const double x_hi = grid.back();
    double at_decade = partial.front();
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (grid[i] <= x_hi / 10.0) at_decade = partial[i - 1];
    rep.moment_finite = at_decade > 0.0 && acc <= 1.05 * at_decade;
  }
  return rep;
}

}  // namespace htbnp
