#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "htbnp/coefficient_field.hpp"
#include "htbnp/priors.hpp"
#include "htbnp/rng.hpp"
#include "htbnp/special.hpp"
#include "htbnp/wavelet.hpp"

namespace htbnp {

enum class Dj94Signal { blocks, bumps, heavisine, doppler };

inline const char* dj94_name(Dj94Signal s) {
  switch (s) {
    case Dj94Signal::blocks: return "blocks";
    case Dj94Signal::bumps: return "bumps";
    case Dj94Signal::heavisine: return "heavisine";
    case Dj94Signal::doppler: return "doppler";
  }
  return "?";
}

namespace dj94 {

// Closed-form test signals of Donoho & Johnstone (1994), Table 1 constants.
inline constexpr double kT[11] = {0.10, 0.13, 0.15, 0.23, 0.25, 0.40,
                                  0.44, 0.65, 0.76, 0.78, 0.81};
inline constexpr double kHBlocks[11] = {4.0, -5.0, 3.0, -4.0, 5.0, -4.2,
                                        2.1, 4.3,  -3.1, 2.1, -4.2};
inline constexpr double kHBumps[11] = {4.0, 5.0, 3.0, 4.0, 5.0, 4.2,
                                       2.1, 4.3, 3.1, 5.1, 4.2};
inline constexpr double kWBumps[11] = {0.005, 0.005, 0.006, 0.01,  0.01, 0.03,
                                       0.01,  0.01,  0.005, 0.008, 0.005};

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline double blocks(double t) {
  double v = 0.0;
  for (int j = 0; j < 11; ++j) v += kHBlocks[j] * 0.5 * (1.0 + sgn(t - kT[j]));
  return v;
}

inline double bumps(double t) {
  double v = 0.0;
  for (int j = 0; j < 11; ++j) {
    const double u = std::fabs((t - kT[j]) / kWBumps[j]);
    v += kHBumps[j] * std::pow(1.0 + u, -4.0);
  }
  return v;
}

inline double heavisine(double t) {
  return 4.0 * std::sin(4.0 * kPi * t) - sgn(t - 0.3) - sgn(0.72 - t);
}

inline double doppler(double t) {
  const double eps = 0.05;
  return std::sqrt(t * (1.0 - t)) * std::sin(2.0 * kPi * (1.0 + eps) / (t + eps));
}

}  // namespace dj94

inline double dj94_eval(Dj94Signal s, double t) {
  switch (s) {
    case Dj94Signal::blocks: return dj94::blocks(t);
    case Dj94Signal::bumps: return dj94::bumps(t);
    case Dj94Signal::heavisine: return dj94::heavisine(t);
    case Dj94Signal::doppler: return dj94::doppler(t);
  }
  return 0.0;
}

/// Rescale a signal so that ||signal||_2 / (noise_sd * sqrt(length)) equals
/// target_snr exactly (the L2-norm-ratio convention for unit-variance noise).
inline std::vector<double> snr_rescale(std::span<const double> samples, double noise_sd,
                                       double target_snr) {
  if (!(noise_sd > 0.0) || !(target_snr > 0.0))
    throw std::domain_error("snr_rescale: positive noise_sd and target required");
  double norm2 = 0.0;
  for (double v : samples) norm2 += v * v;
  if (norm2 == 0.0) throw std::domain_error("snr_rescale: all-zero signal");
  const double factor =
      target_snr * noise_sd * std::sqrt(static_cast<double>(samples.size())) / std::sqrt(norm2);
  std::vector<double> out(samples.begin(), samples.end());
  for (double& v : out) v *= factor;
  return out;
}

/// Singular values of the Volterra operator Kf(t) = int_0^t f, in the basis
/// of its eigenfunctions e_k(t) = sqrt(2) cos(pi (k - 1/2) t):
/// kappa_k = 1 / ((k - 1/2) pi), decaying like k^{-1} (ill-posedness nu = 1).
inline std::vector<double> volterra_multipliers(int K) {
  if (K < 1) throw std::domain_error("volterra_multipliers: K >= 1 required");
  std::vector<double> kappa(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k)
    kappa[static_cast<std::size_t>(k - 1)] = 1.0 / ((k - 0.5) * kPi);
  return kappa;
}

/// The eigenvalue formula pi / (k-1/2) found printed in some sources; same
/// k^{-1} decay but off by pi^2 from the operator's singular values. Kept
/// selectable for side-by-side comparison.
inline std::vector<double> volterra_multipliers_reciprocal(int K) {
  if (K < 1) throw std::domain_error("volterra_multipliers_reciprocal: K >= 1 required");
  std::vector<double> kappa(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) kappa[static_cast<std::size_t>(k - 1)] = kPi / (k - 0.5);
  return kappa;
}

struct TruthSpec {
  enum class Kind { sobolev_sin, density_log, dj94, custom };

  Kind kind = Kind::sobolev_sin;
  Dj94Signal signal = Dj94Signal::blocks;
  double target_snr = 7.0;
  CoefficientField custom;

  static TruthSpec sobolev_sin() { return {}; }
  static TruthSpec density_log() {
    TruthSpec t;
    t.kind = Kind::density_log;
    return t;
  }
  static TruthSpec dj94(Dj94Signal s, double snr = 7.0) {
    TruthSpec t;
    t.kind = Kind::dj94;
    t.signal = s;
    t.target_snr = snr;
    return t;
  }
  static TruthSpec custom_field(CoefficientField f) {
    TruthSpec t;
    t.kind = Kind::custom;
    t.custom = std::move(f);
    return t;
  }
};

inline constexpr int kDj94SampleLog2 = 11;  // 2048 samples
inline constexpr int kDj94CoarseLevel = 5;

/// Deterministic ground-truth coefficient fields.
///   sobolev_sin  (single, K coeffs):  f_k = k^{-3/2} sin k           (~Sobolev beta = 1)
///   density_log  (wavelet, levels 0..L): f_lk = 4 cos^3(k) 2^{-5l/2} (~Holder  beta = 2)
///                 on detail levels; scaling block zero.
///   dj94         (wavelet): signal sampled at t_i = (i+1)/2048, rescaled to
///                 the target SNR against unit-variance noise, analysed with
///                 the Symmlet-8 periodised DWT at coarse level 5.
inline CoefficientField make_truth(const TruthSpec& spec, int truncation) {
  switch (spec.kind) {
    case TruthSpec::Kind::sobolev_sin: {
      if (truncation < 1) throw std::domain_error("make_truth: truncation >= 1");
      std::vector<double> v(static_cast<std::size_t>(truncation));
      for (int k = 1; k <= truncation; ++k)
        v[static_cast<std::size_t>(k - 1)] = std::pow(static_cast<double>(k), -1.5) * std::sin(k);
      return CoefficientField::single(std::move(v));
    }
    case TruthSpec::Kind::density_log: {
      CoefficientField f = CoefficientField::wavelet(0, truncation);
      for (int l = 0; l <= truncation; ++l) {
        auto lev = f.level(l);
        const double sl = std::exp2(-2.5 * l);
        for (std::size_t k = 0; k < lev.size(); ++k) {
          const double c = std::cos(static_cast<double>(k));
          lev[k] = 4.0 * c * c * c * sl;
        }
      }
      return f;
    }
    case TruthSpec::Kind::dj94: {
      const std::size_t N = std::size_t{1} << kDj94SampleLog2;
      std::vector<double> samples(N);
      for (std::size_t i = 0; i < N; ++i)
        samples[i] = dj94_eval(spec.signal, static_cast<double>(i + 1) / static_cast<double>(N));
      samples = snr_rescale(samples, 1.0, spec.target_snr);
      return dwt_forward(samples, WaveletFilter::create(WaveletKind::symmlet8), kDj94CoarseLevel);
    }
    case TruthSpec::Kind::custom:
      return spec.custom;
  }
  throw std::domain_error("make_truth: unknown kind");
}

/// Observation of a Gaussian sequence model: x = kappa .* f + eps / sqrt(n).
struct SequenceObservation {
  std::vector<double> x;
  double n = 1.0;  // noise precision: per-coordinate variance 1/n
  std::optional<std::vector<double>> forward;
  IndexLayout layout = IndexLayout::single;
  int coarse_level = 0;
  int max_level = -1;
  std::uint64_t seed = 0;

  CoefficientField shape() const {
    if (layout == IndexLayout::single)
      return CoefficientField::single(std::vector<double>(x.size(), 0.0));
    return CoefficientField::wavelet(coarse_level, max_level);
  }
};

inline SequenceObservation simulate(const CoefficientField& truth, double n,
                                    const std::optional<std::vector<double>>& forward,
                                    std::uint64_t seed) {
  if (!(n > 0.0)) throw std::domain_error("simulate: noise precision n must be positive");
  if (forward && forward->size() != truth.values.size())
    throw std::domain_error("simulate: forward multiplier length mismatch");
  Rng rng(seed);
  SequenceObservation obs;
  obs.n = n;
  obs.forward = forward;
  obs.layout = truth.layout;
  obs.coarse_level = truth.coarse_level;
  obs.max_level = truth.max_level;
  obs.seed = seed;
  obs.x.resize(truth.values.size());
  const double sd = 1.0 / std::sqrt(n);
  for (std::size_t i = 0; i < obs.x.size(); ++i) {
    const double kappa = forward ? (*forward)[i] : 1.0;
    obs.x[i] = kappa * truth.values[i] + sd * rng.normal();
  }
  return obs;
}

}  // namespace htbnp
