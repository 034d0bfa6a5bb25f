// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Statistical tolerances are pinned here; measured wall
// times are printed next to each budget for reference.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "htbnp/config.hpp"
#include "htbnp/coordinate_posterior.hpp"
#include "htbnp/function_samplers.hpp"
#include "htbnp/harness.hpp"
#include "htbnp/io.hpp"
#include "htbnp/model_likelihoods.hpp"
#include "htbnp/priors.hpp"
#include "htbnp/sequence_models.hpp"
#include "htbnp/theory_checks.hpp"
#include "htbnp/wavelet.hpp"

using namespace htbnp;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
 public:
  Criterion(int id, std::string name, double budget_seconds)
      : id_(id), name_(std::move(name)), budget_(budget_seconds),
        start_(std::chrono::steady_clock::now()) {}

  void finish(bool pass, const std::string& detail) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::printf("%s  criterion %2d: %-34s  [%s]  (%.1fs / budget %.0fs)\n",
                pass ? "PASS" : "FAIL", id_, name_.c_str(), detail.c_str(), secs, budget_);
    std::fflush(stdout);
    if (!pass) ++g_failures;
  }

 private:
  int id_;
  std::string name_;
  double budget_;
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

// 1. Gaussian conjugacy of the quadrature posterior on a (sigma, X) grid.
void criterion_conjugacy() {
  Criterion cr(1, "conjugacy oracle", 1.0);
  const double n = 1e4;
  double worst = 0.0;
  for (int si = 0; si < 10; ++si) {
    const double sigma = std::pow(10.0, -3.0 + 3.5 * si / 9.0);  // 1e-3 .. ~3
    for (int xi = 0; xi < 10; ++xi) {
      const double x = -2.0 + 4.0 * xi / 9.0;
      CoordProblem p;
      p.x = x;
      p.n = n;
      p.sigma = sigma;
      p.tail = TailDensity::gaussian();
      const auto s = coord_summary_quadrature(p, {});
      const double expected = n * sigma * sigma * x / (1.0 + n * sigma * sigma);
      worst = std::max(worst, std::fabs(s.mean - expected));
    }
  }
  cr.finish(worst < 1e-8, fmt("max |mean - closed form| = %.2e, tol 1e-8", worst));
}

// 2. Figure-1 thresholding signature of the Student-t3 prior.
void criterion_thresholding() {
  Criterion cr(2, "thresholding signature", 1.0);
  CoordProblem p;
  p.n = 1e7;
  p.sigma = 1e-5;
  p.tail = TailDensity::student_t(3.0);

  p.x = 0.0005;
  const double small_mean = coord_summary_quadrature(p, {}).mean;
  p.x = 0.004;
  const double large_mean = coord_summary_quadrature(p, {}).mean;

  const bool pass = std::fabs(small_mean) < 0.1 * 0.0005 &&
                    std::fabs(large_mean - 0.004) < 0.1 * 0.004;
  cr.finish(pass, fmt("E[.0005] = %.2e (<5e-5), |E[.004]-.004| = %.2e (<4e-4)",
                      small_mean, std::fabs(large_mean - 0.004)));
}

double rate_slope(bool volterra, int seeds) {
  const PriorSpec prior(ScaleSpec::ot(1.0, 0.5, IndexLayout::single), TailDensity::cauchy(), 200);
  const auto truth = make_truth(TruthSpec::sobolev_sin(), 200);
  const auto kappa = volterra ? std::optional<std::vector<double>>(volterra_multipliers(200))
                              : std::nullopt;
  const std::vector<double> n_grid = {1e2, 1e3, 1e4, 1e5, 1e6};
  std::vector<std::pair<double, double>> pts;
  for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
    double mean_err = 0.0;
    std::vector<double> errs(static_cast<std::size_t>(seeds));
    parallel_for(static_cast<std::size_t>(seeds), effective_threads(0), [&](std::size_t s) {
      const auto obs = simulate(truth, n_grid[ni], kappa, derive_seed(42, ni * 100 + s));
      SequencePosteriorConfig sp;
      sp.quantile_levels = {};
      sp.threads = 1;
      errs[s] = *sequence_posterior(obs, prior, 1.0, sp, &truth).l2_error;
    });
    for (double e : errs) mean_err += e;
    pts.push_back({n_grid[ni], mean_err / seeds});
  }
  return fit_rate_slope(pts).slope;
}

// 3. Contraction-rate slope in the direct model.
void criterion_rate_direct() {
  Criterion cr(3, "contraction slope (direct)", 120.0);
  const double slope = rate_slope(false, 20);
  cr.finish(slope > -0.40 && slope < -0.26, fmt("slope %.4f in [-0.40, -0.26]", slope));
}

// 4. Contraction-rate slope in the Volterra inverse model.
void criterion_rate_inverse() {
  Criterion cr(4, "contraction slope (inverse)", 120.0);
  const double slope = rate_slope(true, 20);
  cr.finish(slope > -0.33 && slope < -0.18, fmt("slope %.4f in [-0.33, -0.18]", slope));
}

// 5. DJ94 denoising errors against the reference values for this benchmark.
void criterion_dj94() {
  Criterion cr(5, "dj94 posterior-mean errors", 600.0);
  const fs::path dir = fs::temp_directory_path() / "htbnp_acceptance_dj94";
  fs::remove_all(dir);
  json j = {{"experiment", "dj94_denoise"},
            {"seed", 1},
            {"output_dir", dir.string()},
            {"priors",
             json::array({json{{"label", "ot_cauchy"},
                               {"scale", {{"kind", "ot"}, {"a", 1.0}, {"delta", 0.5}}},
                               {"tail", {{"kind", "cauchy"}}},
                               {"truncation", 10}}})},
            {"sampler",
             {{"algorithm", "whitened_mala"}, {"beta", 0.05}, {"n_draws", 20000},
              {"burn_in", 10000}, {"thin", 10}}},
            {"emit_plots", false}};
  run(parse_config(j));

  const std::map<std::string, double> reference = {
      {"blocks", 0.50}, {"bumps", 0.54}, {"heavisine", 0.21}, {"doppler", 0.33}};
  const double tol = 0.25;  // desk scale; +-0.15 at --paper-scale chain lengths
  const auto table = read_csv(dir / "dj94_errors.csv");
  bool pass = true;
  std::string detail;
  for (const auto& row : table.rows) {
    if (row[1] != "ot_cauchy") continue;
    const double err = std::stod(row[2]);
    const double ref = reference.at(row[0]);
    if (std::fabs(err - ref) > tol) pass = false;
    detail += row[0].substr(0, 2) + "=" + fmt("%.2f/%.2f ", err, ref);
  }
  cr.finish(pass, detail + "tol 0.25");
}

// 6. The whitening transform pushes standard normals to standard Cauchy.
void criterion_whitening_law() {
  Criterion cr(6, "whitened-transform law", 5.0);
  Rng rng(7);
  auto cauchy = TailDensity::cauchy();
  const int N = 100000;
  std::vector<double> draws(N);
  for (auto& d : draws) d = whiten_transform(rng.normal());
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (int i = 0; i < N; ++i) {
    const double F = cauchy.cdf(draws[i]);
    ks = std::max(ks, std::fabs(F - (i + 1.0) / N));
    ks = std::max(ks, std::fabs(F - static_cast<double>(i) / N));
  }
  cr.finish(ks < 0.01, fmt("KS = %.4f < 0.01 over 1e5 draws", ks));
}

// 7. pCN prior invariance: zero likelihood, whitened chain, quartiles match
//    the scaled Cauchy prior within 3 MC standard errors.
void criterion_pcn_invariance() {
  Criterion cr(7, "pCN prior invariance", 30.0);
  const int K = 8;
  std::vector<double> scales(K);
  auto spec = ScaleSpec::ht(1.0, IndexLayout::single);
  for (int k = 1; k <= K; ++k) scales[k - 1] = spec(k);

  FunctionTarget target;
  target.loglik = [](std::span<const double>) { return 0.0; };
  SamplerConfig cfg;
  cfg.algorithm = FsAlgorithm::whitened_pcn;
  cfg.beta = 0.7;
  cfg.adapt = false;
  cfg.n_draws = 205000;
  cfg.burn_in = 5000;
  cfg.thin = 2;  // 1e5 kept draws
  cfg.seed = 11;
  auto out = run_function_chain(target, scales, CoordinateMap::cauchy_whitening, cfg);

  auto cauchy = TailDensity::cauchy();
  // integrated autocorrelation of the thinned beta = 0.7 chain
  const double rho1 = std::pow(std::sqrt(1.0 - 0.7 * 0.7), cfg.thin);
  const double tau = (1.0 + rho1) / (1.0 - rho1);
  const double n_eff = static_cast<double>(out.draws.size()) / tau;
  bool pass = true;
  double worst_ratio = 0.0;
  for (int k = 0; k < K; ++k) {
    std::vector<double> coord;
    coord.reserve(out.draws.size());
    for (const auto& d : out.draws) coord.push_back(d[k]);
    std::sort(coord.begin(), coord.end());
    for (double level : {0.25, 0.5, 0.75}) {
      const double emp = coord[static_cast<std::size_t>(level * coord.size())];
      const double expected = scales[k] * cauchy.quantile(level);
      const double dens = cauchy.pdf(cauchy.quantile(level)) / scales[k];
      const double se = std::sqrt(level * (1.0 - level) / n_eff) / dens;
      const double ratio = std::fabs(emp - expected) / se;
      worst_ratio = std::max(worst_ratio, ratio);
      if (ratio > 3.0) pass = false;
    }
  }
  cr.finish(pass, fmt("max |quartile error| = %.2f MC s.e. (<3)", worst_ratio));
}

// 8. White-noise Renyi identity for Gaussian coordinate laws.
void criterion_renyi_identity() {
  Criterion cr(8, "Renyi white-noise identity", 1.0);
  const double n = 400.0, sd = 1.0 / std::sqrt(n);
  const std::vector<double> f = {0.3, -0.2, 0.15, 0.0, 0.05};
  const std::vector<double> f0 = {0.25, -0.1, 0.2, 0.02, 0.0};
  double worst_rel = 0.0;
  for (double rho : {0.2, 0.5, 0.8}) {
    double total = 0.0, l2 = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double lo = std::min(f[k], f0[k]) - 10.0 * sd;
      const double hi = std::max(f[k], f0[k]) + 10.0 * sd;
      const std::size_t m = 16385;
      std::vector<double> grid(m), p(m), q(m);
      for (std::size_t i = 0; i < m; ++i) {
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / (m - 1);
        p[i] = normal_pdf((grid[i] - f[k]) / sd) / sd;
        q[i] = normal_pdf((grid[i] - f0[k]) / sd) / sd;
      }
      total += renyi_divergence(p, q, rho, grid);
      l2 += (f[k] - f0[k]) * (f[k] - f0[k]);
    }
    worst_rel = std::max(worst_rel, std::fabs(total - n * rho * l2 / 2.0) / (n * rho * l2 / 2.0));
  }
  cr.finish(worst_rel < 1e-6, fmt("max relative error = %.2e < 1e-6", worst_rel));
}

// 9. Prior-mass trend: log p-hat / (n eps_n^2) bounded below by -1 (d2 = 1)
//    across the n-grid, with d1 calibrated and frozen here.
void criterion_prior_mass() {
  Criterion cr(9, "prior-mass trend", 60.0);
  const PriorSpec prior(ScaleSpec::ot(1.0, 1.0, IndexLayout::single), TailDensity::cauchy(), 200);
  const auto truth = make_truth(TruthSpec::sobolev_sin(), 200);
  RateSpec rate{RateFlavor::l2_ot, 1.0, 0.0, 1.0};
  const double d1 = 3.0;  // calibrated once so p-hat is measurable at n = 200
  bool pass = true;
  std::string detail = "log p/(n eps^2):";
  for (double n : {50.0, 100.0, 200.0}) {
    const double eps_n = rate_epsilon_n(rate, n);
    const auto est = prior_mass_estimate(prior, truth, d1 * eps_n, 40000,
                                         derive_seed(99, static_cast<std::uint64_t>(n)));
    const double ratio = est.p_hat > 0.0 ? std::log(est.p_hat) / (n * eps_n * eps_n) : -1e18;
    detail += fmt(" %.3f", ratio);
    if (!(ratio >= -1.0)) pass = false;
  }
  cr.finish(pass, detail + " all >= -1");
}

// 10. Likelihood gradients against central finite differences.
void criterion_gradients() {
  Criterion cr(10, "likelihood gradient checks", 10.0);
  const auto filter = WaveletFilter::create(WaveletKind::daubechies8);
  Rng data_rng(3);
  std::vector<double> xs(80);
  std::vector<int> ys(80);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = data_rng.uniform();
    ys[i] = data_rng.uniform() < 0.5 ? 1 : 0;
  }
  DensityData ddata(xs);
  ClassificationData cdata(xs, ys);

  double worst = 0.0;
  int states = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CoefficientField f = CoefficientField::wavelet(0, 5);
    Rng rng(seed);
    for (auto& v : f.values) v = 0.7 * rng.normal();
    ++states;

    auto check = [&](auto&& loglik, const CoefficientField& grad) {
      double gnorm = 0.0;
      for (double v : grad.values) gnorm = std::max(gnorm, std::fabs(v));
      Rng pick(seed + 1000);
      for (int rep = 0; rep < 4; ++rep) {
        const std::size_t i = static_cast<std::size_t>(pick.uniform() * f.values.size());
        // h chosen so both truncation (h^2) and roundoff (eps |L| / h) sit
        // well below the 1e-5 tolerance being certified
        const double h = 1e-4;
        auto fp = f, fm = f;
        fp.values[i] += h;
        fm.values[i] -= h;
        const double fd = (loglik(fp) - loglik(fm)) / (2.0 * h);
        const double g = grad.values[i];
        const double rel = std::fabs(g - fd) / std::max(std::fabs(fd), 1e-4 * gnorm);
        worst = std::max(worst, rel);
      }
    };
    auto [dv, dg] = density_loglik_with_gradient(f, filter, ddata, 0.8);
    check([&](const CoefficientField& x) { return density_loglik(x, filter, ddata, 0.8); }, dg);
    auto [cv, cg] = classification_loglik_with_gradient(f, filter, cdata, 0.8);
    check([&](const CoefficientField& x) { return classification_loglik(x, filter, cdata, 0.8); },
          cg);
  }
  cr.finish(worst < 1e-5,
            fmt("max relative error %.2e < 1e-5 at %.0f states", worst, states));
}

// 11. Wavelet suite: reconstruction, Parseval, Gram identity.
void criterion_wavelets() {
  Criterion cr(11, "wavelet suite", 1.0);
  Rng rng(5);
  double worst_recon = 0.0, worst_parseval = 0.0, worst_gram = 0.0;
  for (auto kind : {WaveletKind::haar, WaveletKind::symmlet8, WaveletKind::daubechies8}) {
    auto f = WaveletFilter::create(kind);
    std::vector<double> x(512);
    for (auto& v : x) v = rng.normal();
    auto field = dwt_forward(x, f, 3);
    double nx = 0.0, nc = 0.0;
    for (double v : x) nx += v * v;
    for (double v : field.values) nc += v * v;
    worst_parseval = std::max(worst_parseval, std::fabs(std::sqrt(nx) - std::sqrt(nc)));
    auto back = dwt_inverse(field, f);
    for (std::size_t i = 0; i < x.size(); ++i)
      worst_recon = std::max(worst_recon, std::fabs(back[i] - x[i]));
  }
  {
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
        worst_gram = std::max(worst_gram, std::fabs(dot - (i == j ? 1.0 : 0.0)));
      }
  }
  const bool pass = worst_recon < 1e-10 && worst_parseval < 1e-10 && worst_gram < 1e-8;
  cr.finish(pass, fmt("recon %.1e, parseval %.1e, gram %.1e", worst_recon, worst_parseval,
                      worst_gram));
}

}  // namespace

int main() {
  std::printf("acceptance suite (htbnp %s, rng %s)\n", kVersion, kRngAlgorithm);
  criterion_conjugacy();
  criterion_thresholding();
  criterion_rate_direct();
  criterion_rate_inverse();
  criterion_dj94();
  criterion_whitening_law();
  criterion_pcn_invariance();
  criterion_renyi_identity();
  criterion_prior_mass();
  criterion_gradients();
  criterion_wavelets();
  if (g_failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criteria FAILED\n", g_failures);
  return 1;
}
