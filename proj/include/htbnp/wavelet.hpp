#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "htbnp/coefficient_field.hpp"

namespace htbnp {

enum class WaveletKind { haar, symmlet8, daubechies8 };

/// Orthonormal scaling (lowpass) filters. Symmlet-8 is the least-asymmetric
/// Daubechies filter with 8 vanishing moments (16 taps); Daubechies-8 is the
/// extremal-phase filter of length 8 (4 vanishing moments). Values were
/// obtained by spectral factorisation of the Daubechies polynomial in
/// 60-digit arithmetic and agree with the standard published tables
/// (Wavelab, PyWavelets) to 12+ digits.
class WaveletFilter {
 public:
  static WaveletFilter create(WaveletKind kind) {
    WaveletFilter f;
    f.kind_ = kind;
    switch (kind) {
      case WaveletKind::haar:
        f.h_ = {0.70710678118654752440, 0.70710678118654752440};
        break;
      case WaveletKind::daubechies8:
        f.h_ = {-1.05974017850690317e-02, 3.28830116668851966e-02,
                3.08413818355607640e-02,  -1.87034811719093086e-01,
                -2.79837694168598543e-02, 6.30880767929858921e-01,
                7.14846570552915672e-01,  2.30377813308896506e-01};
        break;
      case WaveletKind::symmlet8:
        f.h_ = {-3.38241595100500277e-03, -5.42132331800010718e-04,
                3.16950878115259890e-02,  7.60748732497660857e-03,
                -1.43294238351272668e-01, -6.12733590678110757e-02,
                4.81359651259053389e-01,  7.77185751699628002e-01,
                3.64441894836178948e-01,  -5.19458381078818018e-02,
                -2.72190299171034857e-02, 4.91371796737302899e-02,
                3.80875201389448961e-03,  -1.49522583370621989e-02,
                -3.02920514724133087e-04, 1.88995033276768911e-03};
        break;
    }
    // quadrature-mirror highpass: g[m] = (-1)^m h[L-1-m]
    const std::size_t L = f.h_.size();
    f.g_.resize(L);
    for (std::size_t m = 0; m < L; ++m)
      f.g_[m] = ((m % 2 == 0) ? 1.0 : -1.0) * f.h_[L - 1 - m];
    return f;
  }

  WaveletKind kind() const { return kind_; }
  std::span<const double> lowpass() const { return h_; }
  std::span<const double> highpass() const { return g_; }

 private:
  WaveletKind kind_ = WaveletKind::haar;
  std::vector<double> h_, g_;
};

namespace detail {

inline int log2_exact(std::size_t n) {
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::domain_error("dwt: length must be a power of two");
  int j = 0;
  while ((std::size_t{1} << j) < n) ++j;
  return j;
}

}  // namespace detail

/// Periodised orthonormal analysis of 2^J samples down to coarse_level.
/// Convention: approx[k] = sum_m h[m] x[(2k+m) mod n], likewise for details
/// with the mirrored highpass, applied per pyramid stage.
inline CoefficientField dwt_forward(std::span<const double> samples, const WaveletFilter& filter,
                                    int coarse_level) {
  const int J = detail::log2_exact(samples.size());
  if (coarse_level < 0 || coarse_level >= J)
    throw std::domain_error("dwt_forward: need 0 <= coarse_level < log2(n)");

  CoefficientField field = CoefficientField::wavelet(coarse_level, J - 1);
  std::vector<double> work(samples.begin(), samples.end());
  const auto h = filter.lowpass();
  const auto g = filter.highpass();
  const std::size_t L = h.size();

  for (int l = J - 1; l >= coarse_level; --l) {
    const std::size_t n = std::size_t{1} << (l + 1);
    const std::size_t half = n >> 1;
    std::vector<double> approx(half);
    auto det = field.level(l);
    for (std::size_t k = 0; k < half; ++k) {
      double a = 0.0, d = 0.0;
      for (std::size_t m = 0; m < L; ++m) {
        const double x = work[(2 * k + m) % n];
        a += h[m] * x;
        d += g[m] * x;
      }
      approx[k] = a;
      det[k] = d;
    }
    std::copy(approx.begin(), approx.end(), work.begin());
  }
  auto sc = field.scaling();
  std::copy(work.begin(), work.begin() + sc.size(), sc.begin());
  return field;
}

/// Exact inverse of dwt_forward (transpose of the orthogonal analysis).
inline std::vector<double> dwt_inverse(const CoefficientField& field, const WaveletFilter& filter) {
  if (field.layout != IndexLayout::wavelet)
    throw std::domain_error("dwt_inverse: wavelet layout required");
  const int J = field.max_level + 1;
  const std::size_t N = std::size_t{1} << J;
  if (field.values.size() != N) throw std::domain_error("dwt_inverse: level-size mismatch");

  const auto h = filter.lowpass();
  const auto g = filter.highpass();
  const std::size_t L = h.size();

  std::vector<double> work(N, 0.0);
  auto sc = field.scaling();
  std::copy(sc.begin(), sc.end(), work.begin());

  for (int l = field.coarse_level; l <= field.max_level; ++l) {
    const std::size_t half = std::size_t{1} << l;
    const std::size_t n = half << 1;
    auto det = field.level(l);
    std::vector<double> next(n, 0.0);
    for (std::size_t k = 0; k < half; ++k) {
      const double a = work[k], d = det[k];
      for (std::size_t m = 0; m < L; ++m)
        next[(2 * k + m) % n] += h[m] * a + g[m] * d;
    }
    std::copy(next.begin(), next.end(), work.begin());
  }
  return work;
}

inline constexpr int kEvalFineLog2 = 12;  // synthesis resolution for eval_function

/// Zero-extend a field to finer detail levels (used to synthesise on the
/// fixed evaluation grid).
inline CoefficientField extend_levels(const CoefficientField& field, int new_max_level) {
  if (new_max_level < field.max_level) throw std::domain_error("extend_levels: cannot shrink");
  CoefficientField out = CoefficientField::wavelet(field.coarse_level, new_max_level);
  std::copy(field.values.begin(), field.values.end(), out.values.begin());
  return out;
}

/// Synthesis of the field on the fixed dyadic grid t_j = j / 2^12 (or the
/// field's native resolution if finer). Deterministic and linear in the
/// coefficients.
inline std::vector<double> synthesize_fine(const CoefficientField& field,
                                           const WaveletFilter& filter) {
  const int J = std::max(kEvalFineLog2, field.max_level + 1);
  if (J == field.max_level + 1) return dwt_inverse(field, filter);
  return dwt_inverse(extend_levels(field, J - 1), filter);
}

/// Evaluate the synthesised function at points of [0,1] by nearest-sample
/// lookup on the fine dyadic grid (periodic at the right endpoint).
inline std::vector<double> eval_function(const CoefficientField& field, const WaveletFilter& filter,
                                         std::span<const double> grid) {
  const std::vector<double> fine = synthesize_fine(field, filter);
  const std::size_t N = fine.size();
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("eval_function: point outside [0,1]");
    const std::size_t j = static_cast<std::size_t>(std::llround(x * static_cast<double>(N))) % N;
    out[i] = fine[j];
  }
  return out;
}

}  // namespace htbnp
