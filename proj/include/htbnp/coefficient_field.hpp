#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace htbnp {

enum class IndexLayout { single, wavelet };

/// Coefficients of a series expansion. Single layout stores f_k for
/// k = 1..K in a flat array. Wavelet layout stores, contiguously,
/// the scaling block (2^c entries, c = coarse_level) followed by detail
/// levels l = c..L with 2^l entries each; level l then occupies the flat
/// range [2^l, 2^{l+1}), and the total size is 2^{L+1}.
struct CoefficientField {
  IndexLayout layout = IndexLayout::single;
  int coarse_level = 0;  // wavelet only
  int max_level = -1;    // wavelet only: finest detail level L
  std::vector<double> values;

  static CoefficientField single(std::vector<double> v) {
    CoefficientField f;
    f.layout = IndexLayout::single;
    f.values = std::move(v);
    return f;
  }

  static CoefficientField wavelet(int coarse_level, int max_level) {
    if (coarse_level < 0 || max_level < coarse_level)
      throw std::domain_error("CoefficientField: need 0 <= coarse_level <= max_level");
    CoefficientField f;
    f.layout = IndexLayout::wavelet;
    f.coarse_level = coarse_level;
    f.max_level = max_level;
    f.values.assign(std::size_t{1} << (max_level + 1), 0.0);
    return f;
  }

  std::size_t size() const { return values.size(); }

  // single layout: f_k, k = 1..K
  double& at(std::size_t k) { return values.at(k - 1); }
  double at(std::size_t k) const { return values.at(k - 1); }

  std::span<double> scaling() {
    return std::span<double>(values).subspan(0, std::size_t{1} << coarse_level);
  }
  std::span<const double> scaling() const {
    return std::span<const double>(values).subspan(0, std::size_t{1} << coarse_level);
  }
  std::span<double> level(int l) {
    check_level(l);
    return std::span<double>(values).subspan(std::size_t{1} << l, std::size_t{1} << l);
  }
  std::span<const double> level(int l) const {
    check_level(l);
    return std::span<const double>(values).subspan(std::size_t{1} << l, std::size_t{1} << l);
  }

  bool same_shape(const CoefficientField& o) const {
    return layout == o.layout && coarse_level == o.coarse_level &&
           max_level == o.max_level && values.size() == o.values.size();
  }

 private:
  void check_level(int l) const {
    if (layout != IndexLayout::wavelet) throw std::domain_error("level(): single layout");
    if (l < coarse_level || l > max_level) throw std::domain_error("level(): out of range");
  }
};

inline double l2_distance(const CoefficientField& a, const CoefficientField& b) {
  if (!a.same_shape(b)) throw std::domain_error("l2_distance: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double linf_distance(const CoefficientField& a, const CoefficientField& b) {
  if (!a.same_shape(b)) throw std::domain_error("linf_distance: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    m = std::max(m, std::fabs(a.values[i] - b.values[i]));
  return m;
}

}  // namespace htbnp
