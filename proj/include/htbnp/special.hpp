#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace htbnp {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLogTwoPi = 1.8378770664093454836;
inline constexpr double kSqrtTwo = 1.4142135623730950488;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_normal_pdf(double x) { return -0.5 * (x * x + kLogTwoPi); }

inline double normal_pdf(double x) { return std::exp(log_normal_pdf(x)); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrtTwo); }

/// Upper tail of the standard normal, accurate for large x.
inline double normal_survival(double x) { return 0.5 * std::erfc(x / kSqrtTwo); }

/// Inverse standard normal CDF, algorithm AS241 (PPND16, Wichura 1988).
/// Relative error below 1e-15 across (0,1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must be in (0,1)");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -val : val;
}

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

/// Streaming log-sum-exp accumulator for nonnegative terms given in log form.
class LogSum {
 public:
  void add(double log_term) {
    if (log_term == kNegInf) return;
    if (log_term > max_) {
      acc_ = acc_ * std::exp(max_ - log_term) + 1.0;
      max_ = log_term;
    } else {
      acc_ += std::exp(log_term - max_);
    }
  }
  bool empty() const { return max_ == kNegInf; }
  double log() const { return empty() ? kNegInf : max_ + std::log(acc_); }

 private:
  double max_ = kNegInf;
  double acc_ = 0.0;
};

/// Signed quantity stored as (log|value|, sign); supports accumulation of
/// terms of either sign without leaving the log domain.
struct SignedLog {
  double log_abs = kNegInf;
  int sign = 0;

  static SignedLog from(double log_abs, int sign) { return {log_abs, log_abs == kNegInf ? 0 : sign}; }
  static SignedLog from_value(double v) {
    if (v == 0.0) return {kNegInf, 0};
    return {std::log(std::fabs(v)), v > 0 ? 1 : -1};
  }
  double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }
  /// value() scaled by exp(-shift); avoids overflow when log_abs is large.
  double value_scaled(double shift) const {
    return sign == 0 ? 0.0 : sign * std::exp(log_abs - shift);
  }
};

class SignedLogSum {
 public:
  void add(const SignedLog& t) {
    if (t.sign > 0) pos_.add(t.log_abs);
    else if (t.sign < 0) neg_.add(t.log_abs);
  }
  SignedLog total() const {
    const double lp = pos_.log(), ln = neg_.log();
    if (ln == kNegInf) return SignedLog::from(lp, 1);
    if (lp == kNegInf) return SignedLog::from(ln, -1);
    if (lp == ln) return {kNegInf, 0};
    const double hi = std::max(lp, ln), lo = std::min(lp, ln);
    const double l = hi + std::log1p(-std::exp(lo - hi));
    return SignedLog::from(l, lp > ln ? 1 : -1);
  }

 private:
  LogSum pos_, neg_;
};

}  // namespace htbnp
