#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "htbnp/coefficient_field.hpp"
#include "htbnp/rng.hpp"
#include "htbnp/tail_density.hpp"

namespace htbnp {

enum class ScaleKind { ot, ht, gaussian_scale };

/// Deterministic scale sequence of a series prior.
///
///   ot:             sigma_k = exp(-a (log k)^{1+delta})     (single, k >= 1)
///                   s_l     = 2^{-a l^{1+delta}}            (wavelet, l >= 0)
///   ht:             sigma_k = k^{-1/2-alpha},  s_l = 2^{-l(1/2+alpha)}
///   gaussian_scale: same sequence as ht; tags a Gaussian-coordinate prior
///                   (used by the hierarchical samplers).
///
/// Logs are natural throughout. sigma_1 = 1 and s_0 = 1 for every kind.
class ScaleSpec {
 public:
  static ScaleSpec ot(double a, double delta, IndexLayout layout) {
    if (!(a > 0.0) || !(delta > 0.0)) throw std::domain_error("ScaleSpec::ot: a, delta > 0 required");
    return ScaleSpec(ScaleKind::ot, a, delta, layout);
  }
  static ScaleSpec ht(double alpha, IndexLayout layout) {
    if (!(alpha > 0.0)) throw std::domain_error("ScaleSpec::ht: alpha > 0 required");
    return ScaleSpec(ScaleKind::ht, alpha, 0.0, layout);
  }
  static ScaleSpec gaussian_scale(double alpha, IndexLayout layout) {
    if (!(alpha > 0.0)) throw std::domain_error("ScaleSpec::gaussian_scale: alpha > 0 required");
    return ScaleSpec(ScaleKind::gaussian_scale, alpha, 0.0, layout);
  }

  ScaleKind kind() const { return kind_; }
  IndexLayout layout() const { return layout_; }
  double a() const { return a_; }
  double delta() const { return delta_; }
  double alpha() const { return a_; }

  /// sigma_k (single layout, k >= 1) or s_l (wavelet layout, l >= 0).
  double operator()(std::int64_t index) const {
    if (layout_ == IndexLayout::single) {
      if (index < 1) throw std::domain_error("eval_scale: single layout needs k >= 1");
      const double lk = std::log(static_cast<double>(index));
      switch (kind_) {
        case ScaleKind::ot: return std::exp(-a_ * std::pow(lk, 1.0 + delta_));
        case ScaleKind::ht:
        case ScaleKind::gaussian_scale: return std::pow(static_cast<double>(index), -0.5 - a_);
      }
    } else {
      if (index < 0) throw std::domain_error("eval_scale: wavelet layout needs l >= 0");
      const double l = static_cast<double>(index);
      switch (kind_) {
        case ScaleKind::ot: return std::exp2(-a_ * std::pow(l, 1.0 + delta_));
        case ScaleKind::ht:
        case ScaleKind::gaussian_scale: return std::exp2(-l * (0.5 + a_));
      }
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind_) {
      case ScaleKind::ot: return "ot(a=" + std::to_string(a_) + ",delta=" + std::to_string(delta_) + ")";
      case ScaleKind::ht: return "ht(alpha=" + std::to_string(a_) + ")";
      case ScaleKind::gaussian_scale: return "gaussian_scale(alpha=" + std::to_string(a_) + ")";
    }
    return "?";
  }

 private:
  ScaleSpec(ScaleKind k, double a, double delta, IndexLayout layout)
      : kind_(k), a_(a), delta_(delta), layout_(layout) {}

  ScaleKind kind_;
  double a_;      // ot: a; ht/gaussian: alpha
  double delta_;  // ot only
  IndexLayout layout_;
};

inline double eval_scale(const ScaleSpec& spec, std::int64_t index) { return spec(index); }

/// A series prior: scale sequence, coordinate tail density, and a mandatory
/// truncation (number of coefficients K in single layout; finest detail
/// level L in wavelet layout).
struct PriorSpec {
  ScaleSpec scale;
  TailDensity tail;
  int truncation;

  PriorSpec(ScaleSpec s, TailDensity t, int trunc) : scale(s), tail(t), truncation(trunc) {
    if (trunc < 1) throw std::domain_error("PriorSpec: truncation >= 1 required");
    if (s.layout() == IndexLayout::wavelet && trunc < 0)
      throw std::domain_error("PriorSpec: wavelet truncation is the max level L >= 0");
  }

  IndexLayout layout() const { return scale.layout(); }
};

/// Scale applied to position i of the flattened field: index k = i+1 for
/// single layout. For wavelet layout the scale index is the level RELATIVE
/// to the coarsest scale of the expansion (the scaling block and the
/// coarsest detail level share s_0 = 1, detail level l gets s_{l - c}).
/// With coarse level 0 this is the plain absolute-level indexing; with a
/// coarser start the prior keeps its coarsest scale at 1 instead of pinning
/// order-one coefficients under scales like 2^{-25}.
inline double scale_at_flat(const ScaleSpec& spec, const CoefficientField& shape, std::size_t i) {
  if (spec.layout() == IndexLayout::single) return spec(static_cast<std::int64_t>(i) + 1);
  const std::size_t scaling_end = std::size_t{1} << shape.coarse_level;
  if (i < scaling_end) return spec(0);
  int l = 0;
  while ((std::size_t{1} << (l + 1)) <= i) ++l;
  return spec(l - shape.coarse_level);
}

/// Draw a coefficient field from the prior: i.i.d. tail-density draws scaled
/// coordinatewise, truncated at K (single) or max level L (wavelet).
inline CoefficientField sample_prior(const PriorSpec& prior, std::uint64_t seed,
                                     int coarse_level = 0) {
  Rng rng(seed);
  if (prior.layout() == IndexLayout::single) {
    std::vector<double> v(static_cast<std::size_t>(prior.truncation));
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = prior.scale(static_cast<std::int64_t>(i) + 1) * prior.tail.sample(rng);
    return CoefficientField::single(std::move(v));
  }
  CoefficientField f = CoefficientField::wavelet(coarse_level, prior.truncation);
  for (std::size_t i = 0; i < f.values.size(); ++i)
    f.values[i] = scale_at_flat(prior.scale, f, i) * prior.tail.sample(rng);
  return f;
}

}  // namespace htbnp
