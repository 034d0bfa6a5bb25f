#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "htbnp/coefficient_field.hpp"
#include "htbnp/special.hpp"
#include "htbnp/wavelet.hpp"

namespace htbnp {

/// All [0,1]-integrals in the density/classification models run on the fixed
/// dyadic grid shared with eval_function: function values live at
/// t_j = j/4096, j = 0..4095, and the trapezoid rule on the 2^12+1 points
/// (with the periodic wrap f(1) = f(0)) reduces to the sample mean. Keeping
/// the likelihood, the normalisation and eval_function on one grid makes
/// them mutually consistent.
///
/// Temperatures: rho = 1 is accepted everywhere operationally (the standard
/// posterior); the contraction guarantees behind the tempered construction
/// for these non-product models are established for rho < 1 only.
inline constexpr std::size_t kUnitGridN = std::size_t{1} << kEvalFineLog2;

inline std::size_t unit_grid_bin(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("unit grid: point outside [0,1]");
  return static_cast<std::size_t>(std::llround(x * static_cast<double>(kUnitGridN))) % kUnitGridN;
}

/// log of the trapezoid integral of exp(f) over [0,1] (periodic wrap).
inline double log_integral_exp(std::span<const double> f) {
  LogSum s;
  for (double v : f) s.add(v);
  return s.log() - std::log(static_cast<double>(f.size()));
}

/// g = exp(f) / int_0^1 exp(f), computed in the log domain. The returned
/// values integrate to 1 under the same trapezoid rule to within rounding.
inline std::vector<double> normalize_density(std::span<const double> f) {
  if (f.size() < 2) throw std::domain_error("normalize_density: need at least 2 values");
  const double log_z = log_integral_exp(f);
  std::vector<double> g(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) g[i] = std::exp(f[i] - log_z);
  return g;
}

inline double logistic_link(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

/// log Lambda(u); stable softplus form.
inline double log_logistic(double u) {
  return u >= 0.0 ? -std::log1p(std::exp(-u)) : u - std::log1p(std::exp(u));
}

/// Observations for density estimation on [0,1]. Points are pre-binned to
/// the unit grid so likelihood evaluations cost O(grid) independently of n.
class DensityData {
 public:
  explicit DensityData(std::vector<double> samples) : samples_(std::move(samples)) {
    counts_.assign(kUnitGridN, 0);
    for (double x : samples_) {
      if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("DensityData: sample outside [0,1]");
      ++counts_[unit_grid_bin(x)];
    }
  }
  const std::vector<double>& samples() const { return samples_; }
  const std::vector<long>& bin_counts() const { return counts_; }
  long n() const { return static_cast<long>(samples_.size()); }

 private:
  std::vector<double> samples_;
  std::vector<long> counts_;
};

/// Binary pairs (x in [0,1], y in {0,1}), pre-binned like DensityData.
class ClassificationData {
 public:
  ClassificationData(std::vector<double> x, std::vector<int> y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.size() != y_.size()) throw std::domain_error("ClassificationData: length mismatch");
    total_.assign(kUnitGridN, 0);
    positive_.assign(kUnitGridN, 0);
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if (!(x_[i] >= 0.0 && x_[i] <= 1.0))
        throw std::domain_error("ClassificationData: x outside [0,1]");
      if (y_[i] != 0 && y_[i] != 1) throw std::domain_error("ClassificationData: labels binary");
      const std::size_t b = unit_grid_bin(x_[i]);
      ++total_[b];
      positive_[b] += y_[i];
    }
  }
  const std::vector<double>& x() const { return x_; }
  const std::vector<int>& y() const { return y_; }
  const std::vector<long>& bin_total() const { return total_; }
  const std::vector<long>& bin_positive() const { return positive_; }
  long n() const { return static_cast<long>(x_.size()); }

 private:
  std::vector<double> x_;
  std::vector<int> y_;
  std::vector<long> total_, positive_;
};

namespace detail {

inline std::vector<double> synth_unit_grid(const CoefficientField& f, const WaveletFilter& filter) {
  std::vector<double> fine = synthesize_fine(f, filter);
  if (fine.size() != kUnitGridN)
    throw std::domain_error("model likelihood: field finer than the unit grid");
  return fine;
}

/// Adjoint of (zero-extend, synthesize): forward transform of the
/// sample-domain gradient, restricted to the field's levels. Exact because
/// the transform is orthogonal.
inline CoefficientField synth_adjoint(std::span<const double> grad_samples,
                                      const CoefficientField& shape, const WaveletFilter& filter) {
  CoefficientField full = dwt_forward(grad_samples, filter, shape.coarse_level);
  CoefficientField out = CoefficientField::wavelet(shape.coarse_level, shape.max_level);
  std::copy(full.values.begin(), full.values.begin() + out.values.size(), out.values.begin());
  return out;
}

inline void check_rho_unit(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::domain_error("loglik: rho in (0,1] required");
}

}  // namespace detail

/// Tempered density-estimation log likelihood,
/// rho ( sum_i f(X_i) - n log int_0^1 exp(f) ).
inline double density_loglik(const CoefficientField& f, const WaveletFilter& filter,
                             const DensityData& data, double rho) {
  detail::check_rho_unit(rho);
  const std::vector<double> fine = detail::synth_unit_grid(f, filter);
  const double log_z = log_integral_exp(fine);
  double s = 0.0;
  const auto& counts = data.bin_counts();
  for (std::size_t j = 0; j < kUnitGridN; ++j)
    if (counts[j] != 0) s += static_cast<double>(counts[j]) * fine[j];
  return rho * (s - static_cast<double>(data.n()) * log_z);
}

inline std::pair<double, CoefficientField> density_loglik_with_gradient(
    const CoefficientField& f, const WaveletFilter& filter, const DensityData& data, double rho) {
  detail::check_rho_unit(rho);
  const std::vector<double> fine = detail::synth_unit_grid(f, filter);
  const double log_z = log_integral_exp(fine);
  const double log_n_grid = std::log(static_cast<double>(kUnitGridN));
  const auto& counts = data.bin_counts();

  double s = 0.0;
  std::vector<double> grad(kUnitGridN);
  for (std::size_t j = 0; j < kUnitGridN; ++j) {
    if (counts[j] != 0) s += static_cast<double>(counts[j]) * fine[j];
    const double weight = std::exp(fine[j] - log_z - log_n_grid);  // d log_z / d f_j
    grad[j] = rho * (static_cast<double>(counts[j]) - static_cast<double>(data.n()) * weight);
  }
  const double value = rho * (s - static_cast<double>(data.n()) * log_z);
  return {value, detail::synth_adjoint(grad, f, filter)};
}

/// Tempered classification log likelihood with the logistic link; the
/// predictor marginal factorises out and is omitted.
inline double classification_loglik(const CoefficientField& f, const WaveletFilter& filter,
                                    const ClassificationData& data, double rho) {
  detail::check_rho_unit(rho);
  const std::vector<double> fine = detail::synth_unit_grid(f, filter);
  const auto& total = data.bin_total();
  const auto& pos = data.bin_positive();
  double s = 0.0;
  for (std::size_t j = 0; j < kUnitGridN; ++j) {
    if (total[j] == 0) continue;
    const double lp = log_logistic(fine[j]);
    const double lq = log_logistic(-fine[j]);  // log(1 - Lambda)
    s += static_cast<double>(pos[j]) * lp + static_cast<double>(total[j] - pos[j]) * lq;
  }
  return rho * s;
}

inline std::pair<double, CoefficientField> classification_loglik_with_gradient(
    const CoefficientField& f, const WaveletFilter& filter, const ClassificationData& data,
    double rho) {
  detail::check_rho_unit(rho);
  const std::vector<double> fine = detail::synth_unit_grid(f, filter);
  const auto& total = data.bin_total();
  const auto& pos = data.bin_positive();
  double s = 0.0;
  std::vector<double> grad(kUnitGridN, 0.0);
  for (std::size_t j = 0; j < kUnitGridN; ++j) {
    if (total[j] == 0) continue;
    s += static_cast<double>(pos[j]) * log_logistic(fine[j]) +
         static_cast<double>(total[j] - pos[j]) * log_logistic(-fine[j]);
    grad[j] = rho * (static_cast<double>(pos[j]) -
                     static_cast<double>(total[j]) * logistic_link(fine[j]));
  }
  return {rho * s, detail::synth_adjoint(grad, f, filter)};
}

namespace detail {

inline std::vector<double> trapezoid_weights(std::span<const double> grid) {
  if (grid.size() < 2) throw std::domain_error("divergence: need at least 2 grid points");
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double h = grid[i + 1] - grid[i];
    if (!(h > 0.0)) throw std::domain_error("divergence: grid must be strictly increasing");
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}

inline void check_normalized(std::span<const double> p, const std::vector<double>& w) {
  double mass = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) mass += w[i] * p[i];
  if (std::fabs(mass - 1.0) > 1e-6)
    throw std::domain_error("divergence: density not normalised on the grid");
}

}  // namespace detail

/// Renyi divergence D_rho(p, q) = -(1/(1-rho)) log int p^rho q^{1-rho},
/// by trapezoid quadrature on the supplied grid. Requires rho in (0,1) and
/// both inputs normalised on the grid (within 1e-6).
inline double renyi_divergence(std::span<const double> p, std::span<const double> q, double rho,
                               std::span<const double> grid) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::domain_error("renyi_divergence: rho in (0,1)");
  if (p.size() != q.size() || p.size() != grid.size())
    throw std::domain_error("renyi_divergence: size mismatch");
  const auto w = detail::trapezoid_weights(grid);
  detail::check_normalized(p, w);
  detail::check_normalized(q, w);
  LogSum s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0 || q[i] <= 0.0) continue;
    s.add(rho * std::log(p[i]) + (1.0 - rho) * std::log(q[i]) + std::log(w[i]));
  }
  return std::max(0.0, -s.log() / (1.0 - rho));
}

/// Kullback-Leibler divergence K(p_v, p_w) and the centred second moment V
/// used in prior-mass neighbourhoods, by trapezoid quadrature.
inline std::pair<double, double> kl_and_v(std::span<const double> pv, std::span<const double> pw,
                                          std::span<const double> grid) {
  if (pv.size() != pw.size() || pv.size() != grid.size())
    throw std::domain_error("kl_and_v: size mismatch");
  const auto w = detail::trapezoid_weights(grid);
  detail::check_normalized(pv, w);
  detail::check_normalized(pw, w);
  double k = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i] <= 0.0) continue;
    if (pw[i] <= 0.0) throw std::domain_error("kl_and_v: support mismatch");
    k += w[i] * pv[i] * std::log(pv[i] / pw[i]);
  }
  double v = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i] <= 0.0) continue;
    const double c = std::log(pv[i] / pw[i]) - k;
    v += w[i] * pv[i] * c * c;
  }
  return {k, v};
}

}  // namespace htbnp
