#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "htbnp/special.hpp"

namespace htbnp {

/// Thrown when adaptive refinement exhausts its budget before reaching the
/// requested accuracy; carries the error estimate actually achieved.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double achieved_rel_error)
      : std::runtime_error(what), achieved_rel_error_(achieved_rel_error) {}
  double achieved_rel_error() const { return achieved_rel_error_; }

 private:
  double achieved_rel_error_;
};

namespace gk {

// 15-point Kronrod abscissae/weights and the embedded 7-point Gauss weights
// (QUADPACK dqk15 constants). Even-index abscissae are the Gauss points.
inline constexpr double kNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double kWeightsK[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWeightsG[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

}  // namespace gk

/// One integrand evaluation shared by all weighted components: g is the
/// log-density factor, weights[i] multiplies exp(g) for component i
/// (component 0 uses weight 1 implicitly).
struct LogQuadOptions {
  double rel_tol = 1e-10;
  int max_segments = 4000;
  int initial_splits = 8;    // pre-split each seed segment this many times
  bool export_segments = false;  // return the refined partition with masses
};

struct LogQuadComponent {
  SignedLog integral;
  double abs_error_log = kNegInf;  // log of the absolute error estimate
};

struct QuadSegmentMass {
  double a, b;
  double log_mass;  // of component 0 over [a, b]
};

struct LogQuadResult {
  std::vector<LogQuadComponent> components;  // [0] is the plain integral of exp(g)
  bool converged = false;
  int n_eval = 0;
  int n_segments = 0;
  double rel_error = 0.0;  // achieved max relative error across components
  std::vector<QuadSegmentMass> segments;  // filled when export_segments is set
};

namespace detail {

struct Segment {
  double a, b;
  // per-component K15 estimate (signed log) and error bound log|K15-G7|
  std::vector<SignedLog> est;
  std::vector<double> err_log;
  double worst_err = kNegInf;
};

/// K15/G7 on [a,b] for components w_i(x) exp(g(x)); all in the log domain.
template <typename G, typename W>
inline Segment gk15_log(const G& g, const W& weights, int n_comp, double a, double b) {
  Segment s;
  s.a = a;
  s.b = b;
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double log_h = std::log(h);

  double xs[15];
  double gs[15];
  for (int j = 0; j < 7; ++j) {
    xs[2 * j] = c - h * gk::kNodes[j];
    xs[2 * j + 1] = c + h * gk::kNodes[j];
  }
  xs[14] = c;
  for (int j = 0; j < 15; ++j) gs[j] = g(xs[j]);

  s.est.resize(n_comp);
  s.err_log.resize(n_comp);
  for (int i = 0; i < n_comp; ++i) {
    SignedLogSum k15, g7;
    auto add = [&](double x, double lg, double wk, double wg_or_neg) {
      const double w = weights(i, x);
      if (w == 0.0 || lg == kNegInf) return;
      const double lw = std::log(std::fabs(w));
      const int sg = w > 0 ? 1 : -1;
      k15.add(SignedLog::from(lg + lw + std::log(wk), sg));
      if (wg_or_neg > 0.0) g7.add(SignedLog::from(lg + lw + std::log(wg_or_neg), sg));
    };
    for (int j = 0; j < 7; ++j) {
      const double wk = gk::kWeightsK[j];
      const double wg = (j % 2 == 1) ? gk::kWeightsG[j / 2] : 0.0;
      add(xs[2 * j], gs[2 * j], wk, wg);
      add(xs[2 * j + 1], gs[2 * j + 1], wk, wg);
    }
    add(xs[14], gs[14], gk::kWeightsK[7], gk::kWeightsG[3]);

    SignedLog k = k15.total(), gq = g7.total();
    k.log_abs += log_h;
    gq.log_abs += log_h;
    s.est[i] = k;
    // |K15 - G7| as the error proxy for this segment/component
    SignedLogSum diff;
    diff.add(k);
    diff.add(SignedLog::from(gq.log_abs, -gq.sign));
    s.err_log[i] = diff.total().log_abs;
    s.worst_err = std::max(s.worst_err, s.err_log[i]);
  }
  return s;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of I_i = int w_i(x) exp(g(x)) dx over a
/// union of segments, carried out entirely in the log domain so that g may
/// range over [-1e12, 700] without under- or overflow. Refinement splits the
/// segment with the largest K15-G7 discrepancy until every component's error
/// estimate is below rel_tol times the magnitude of component 0 (the
/// normalising mass), or the segment budget is exhausted.
template <typename G, typename W>
inline LogQuadResult integrate_log(const G& g, const W& weights, int n_comp,
                                   std::vector<std::pair<double, double>> segments,
                                   const LogQuadOptions& opt = {}) {
  if (segments.empty()) throw std::domain_error("integrate_log: no segments");
  for (auto& [a, b] : segments)
    if (!(a < b)) throw std::domain_error("integrate_log: empty segment");

  std::vector<detail::Segment> segs;
  int n_eval = 0;
  auto push = [&](double a, double b) {
    segs.push_back(detail::gk15_log(g, weights, n_comp, a, b));
    n_eval += 15;
  };
  for (auto& [a, b] : segments) {
    const int m = std::max(1, opt.initial_splits);
    for (int j = 0; j < m; ++j)
      push(a + (b - a) * j / m, a + (b - a) * (j + 1) / m);
  }

  auto totals = [&]() {
    std::vector<SignedLogSum> acc(n_comp);
    std::vector<LogSum> err(n_comp);
    for (const auto& s : segs)
      for (int i = 0; i < n_comp; ++i) {
        acc[i].add(s.est[i]);
        err[i].add(s.err_log[i]);
      }
    LogQuadResult r;
    r.components.resize(n_comp);
    for (int i = 0; i < n_comp; ++i) {
      r.components[i].integral = acc[i].total();
      r.components[i].abs_error_log = err[i].log();
    }
    return r;
  };

  while (true) {
    LogQuadResult r = totals();
    const double log_scale = r.components[0].integral.log_abs;
    double worst = 0.0;
    for (int i = 0; i < n_comp; ++i)
      worst = std::max(worst, std::exp(r.components[i].abs_error_log - log_scale));
    r.rel_error = worst;
    r.n_eval = n_eval;
    r.n_segments = static_cast<int>(segs.size());
    const bool done = worst <= opt.rel_tol || static_cast<int>(segs.size()) >= opt.max_segments;
    if (done) {
      r.converged = worst <= opt.rel_tol;
      if (opt.export_segments) {
        for (const auto& s : segs)
          r.segments.push_back({s.a, s.b, s.est[0].log_abs});
        std::sort(r.segments.begin(), r.segments.end(),
                  [](const QuadSegmentMass& x, const QuadSegmentMass& y) { return x.a < y.a; });
      }
      return r;
    }
    // split the worst segment
    std::size_t worst_idx = 0;
    for (std::size_t j = 1; j < segs.size(); ++j)
      if (segs[j].worst_err > segs[worst_idx].worst_err) worst_idx = j;
    const double a = segs[worst_idx].a, b = segs[worst_idx].b, m = 0.5 * (a + b);
    segs[worst_idx] = detail::gk15_log(g, weights, n_comp, a, m);
    n_eval += 15;
    push(m, b);
  }
}

/// Convenience wrapper: log of int_a^b exp(g) dx with default weights.
template <typename G>
inline double integrate_log_scalar(const G& g, double a, double b, double rel_tol = 1e-10,
                                   int max_segments = 4000) {
  LogQuadOptions opt;
  opt.rel_tol = rel_tol;
  opt.max_segments = max_segments;
  auto w = [](int, double) { return 1.0; };
  auto r = integrate_log(g, w, 1, {{a, b}}, opt);
  if (!r.converged)
    throw NumericalError("integrate_log_scalar: did not converge", r.rel_error);
  return r.components[0].integral.log_abs;
}

}  // namespace htbnp
