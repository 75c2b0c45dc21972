// Acceptance criteria 1-10. Usage: acceptance <n>|all. Prints one PASS/FAIL
// line per criterion; the exit status is non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "fetomo/bayes.hpp"
#include "fetomo/diagnostics.hpp"
#include "fetomo/error.hpp"
#include "fetomo/forward_model.hpp"
#include "fetomo/io.hpp"
#include "fetomo/mle.hpp"
#include "fetomo/phase_space.hpp"

using namespace fetomo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (ok ? "" : "[miss] ") << what << "; ";
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

EnergyWindow centred(int d) { return EnergyWindow(-(d / 2), d - 1 - d / 2); }

// 1. interaction_unitary against the matrix exponential of the truncated
// generator. The generator lives on the window padded by
// truncation_padding(|g|) and the result is cropped, which is how every
// unitary application in the library treats the window edges.
void unitary_oracle(Outcome& out) {
  const EnergyWindow w(-16, 16);
  double worst = 0.0;
  double unpadded = 0.0;
  for (double mag : {0.05, 0.3, 0.7, 1.0, 1.4, 1.8, 2.0}) {
    for (double phase : {0.0, 0.9, -2.2}) {
      const Coupling g(mag, phase);
      const CMatrix u = interaction_unitary(g, w).entries;
      const int pad = truncation_padding(mag);
      const CMatrix b = oracle::lowering(w.n_min() - pad, w.n_max() + pad);
      const CMatrix ref = oracle::expm(g.value() * b.adjoint() - std::conj(g.value()) * b).block(pad, pad, w.dim(), w.dim());
      worst = std::max(worst, max_abs(u - ref));
      const CMatrix b0 = oracle::lowering(w.n_min(), w.n_max());
      unpadded = std::max(unpadded, max_abs(u - oracle::expm(g.value() * b0.adjoint() - std::conj(g.value()) * b0)));
    }
  }
  out.require(worst < 1e-10, "max|U - expm| = " + fmt(worst) + " (< 1e-10)");
  out.detail << "unpadded generator differs by " << fmt(unpadded) << " at the window edges; ";
}

// 2. Wigner validity on 100 random states.
void wigner_validity(Outcome& out) {
  std::mt19937_64 rng(2024);
  const PositionGrid grid(1024);
  double imag = 0, norm = 0, xmarg = 0, pmarg = 0, kernel = 0;
  for (int t = 0; t < 100; ++t) {
    const int d = 1 + t % 10;
    int shift = t % 3 - 1;
    if (-(d / 2) + shift > 0 || d - 1 - d / 2 + shift < 0) shift = 0;
    const EnergyWindow win(-(d / 2) + shift, d - 1 - d / 2 + shift);
    const auto rho = random_density(win, rng, 1 + static_cast<int>(rng() % d));
    const EnergyWindow momenta = win.padded(3);
    const auto w = wigner(rho, grid, momenta);
    imag = std::max(imag, w.max_imaginary);
    norm = std::max(norm, std::abs(w.normalization() - 1.0));
    xmarg = std::max(xmarg, (w.position_marginal() - temporal_density(rho, grid)).cwiseAbs().maxCoeff());
    const RVector pm = w.momentum_marginal();
    for (int p = momenta.n_min(); p <= momenta.n_max(); ++p) {
      const double expect = win.contains(p) ? rho.at(p, p).real() : 0.0;
      pmarg = std::max(pmarg, std::abs(pm[momenta.offset(p)] - expect));
    }
    for (int k = 5; k < grid.size(); k += 97) {
      const auto ref = oracle::wigner_quadrature_row(rho.matrix(), win.n_min(), grid[k], momenta.n_min(), momenta.n_max());
      for (int p = momenta.n_min(); p <= momenta.n_max(); ++p) {
        kernel = std::max(kernel, std::abs(w.at(k, p) - ref[momenta.offset(p)]));
      }
    }
  }
  out.require(imag < 1e-12, "max imaginary part " + fmt(imag) + " (< 1e-12)");
  out.require(norm < 1e-8, "normalization error " + fmt(norm) + " (< 1e-8)");
  out.require(xmarg < 1e-8, "position marginal error " + fmt(xmarg) + " (< 1e-8)");
  out.require(pmarg < 1e-8, "momentum marginal error " + fmt(pmarg) + " (< 1e-8)");
  out.require(kernel < 1e-6, "kernel vs 1e4-point quadrature " + fmt(kernel) + " (< 1e-6)");
}

// 3. MLE round trip.
void mle_round_trip(Outcome& out) {
  std::mt19937_64 rng(3);
  const PhaseGrid phases = PhaseGrid::uniform(100);
  double worst_clean = 1.0;
  double worst_step = 0.0;
  std::vector<double> noisy;
  for (int t = 0; t < 50; ++t) {
    const int d = 2 + t % 5;
    const EnergyWindow w = centred(d);
    const auto truth = random_density(w, rng, 1 + t % d);
    const auto probs = simulate_spectrogram(truth, 1.2, phases);
    MleConfig cfg;
    cfg.window = w;
    worst_clean = std::min(worst_clean, fidelity(mle_reconstruct(probs, cfg).rho, truth));

    MleConfig diluted = cfg;
    diluted.dilution = 0.5;
    const auto res = mle_reconstruct(sample_counts(probs, 10000, 100 + t), diluted);
    noisy.push_back(fidelity(res.rho, truth));
    for (std::size_t i = 1; i < res.log_likelihood_trace.size(); ++i) {
      worst_step = std::min(worst_step, res.log_likelihood_trace[i] - res.log_likelihood_trace[i - 1]);
    }
  }
  std::sort(noisy.begin(), noisy.end());
  const double median = 0.5 * (noisy[24] + noisy[25]);
  out.require(worst_clean >= 0.99, "noiseless min fidelity " + fmt(worst_clean) + " (>= 0.99)");
  out.require(median >= 0.97, "shot-noise median fidelity " + fmt(median) + " (>= 0.97)");
  out.require(worst_step >= -1e-9, "largest log-likelihood decrease " + fmt(std::max(0.0, -worst_step)) + " (<= 1e-9)");
}

PosteriorModel synthetic_model(int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const EnergyWindow w = centred(d);
  const auto truth = random_density(w, rng);
  return PosteriorModel(sample_counts(simulate_spectrogram(truth, 1.0, PhaseGrid::uniform(20)), 2000, seed), w);
}

// 4. Gradient and Hessian against finite differences.
void derivative_checks(Outcome& out) {
  double grad = 0.0, hess = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int d = 2 + t % 3;
    const auto model = synthetic_model(d, 40 + d);
    const ParamVector x = default_init(model.dimension(), 500 + t);
    const auto f = [&](const RVector& v) { return log_posterior(model, v); };
    const RVector fd = oracle::central_gradient(f, x);
    grad = std::max(grad, (grad_log_posterior(model, x) - fd).norm() / fd.norm());
    if (t < 6) {
      const RMatrix h = model.hessian(x);
      const RMatrix h_fd = oracle::second_differences(f, x);
      hess = std::max(hess, (h - h_fd).cwiseAbs().maxCoeff() / h_fd.cwiseAbs().maxCoeff());
    }
  }
  out.require(grad < 1e-5, "gradient relative error " + fmt(grad) + " (< 1e-5, 20 points)");
  out.require(hess < 1e-4, "Hessian relative error " + fmt(hess) + " (< 1e-4, 6 points)");
}

// 5. pCN on its own Gaussian reference is exact. Whitened coordinates of the
// chain are AR(1) with coefficient sqrt(1 - beta^2), which sets the standard
// errors of the pooled moments.
void pcn_exactness(Outcome& out) {
  const auto model = synthetic_model(2, 51);
  const MapResult map = find_map(model, default_init(model.dimension(), 1));
  const GaussianTarget target(map.x_map, map.curvature.hessian);
  const double beta = 0.3;
  const int n = static_cast<int>(map.x_map.size());
  constexpr int kChains = 4;
  constexpr int kSteps = 25000;
  double worst = 0.0;
  RVector sum = RVector::Zero(n), sum2 = RVector::Zero(n);
  for (int c = 0; c < kChains; ++c) {
    std::mt19937_64 rng(900 + c);
    ParamVector x = gaussian_draw(map, rng);
    double lp = target.log_density(x);
    for (int i = 0; i < kSteps; ++i) {
      const auto step = mh_step(target, map, beta, x, lp, rng);
      worst = std::max(worst, std::abs(step.log_alpha));
      x = step.next;
      lp = step.log_density;
      const RVector z = map.curvature.cholesky.transpose() * (x - map.x_map);
      sum += z;
      sum2 += z.cwiseAbs2();
    }
  }
  const double total = static_cast<double>(kChains) * kSteps;
  const double a = std::sqrt(1 - beta * beta);
  const double se_mean = std::sqrt((1 + a) / (1 - a) / total);
  const double se_var = std::sqrt(2.0 * (1 + a * a) / (1 - a * a) / total);
  double mean_z = 0.0, var_z = 0.0;
  for (int i = 0; i < n; ++i) {
    const double m = sum[i] / total;
    mean_z = std::max(mean_z, std::abs(m) / se_mean);
    var_z = std::max(var_z, std::abs(sum2[i] / total - m * m - 1.0) / se_var);
  }
  out.require(worst < 1e-8, "max |log alpha| " + fmt(worst) + " over 1e5 steps (< 1e-8)");
  out.require(mean_z < 4.0, "worst mean deviation " + fmt(mean_z) + " SE (< 4)");
  out.require(var_z < 4.0, "worst variance deviation " + fmt(var_z) + " SE (< 4)");
}

// 6. Bayesian round trip at desk scale.
void bayes_round_trip(Outcome& out) {
  std::mt19937_64 rng(6);
  const EnergyWindow w(-1, 1);
  const auto truth = random_density(w, rng);
  const auto data = sample_counts(simulate_spectrogram(truth, 1.2, PhaseGrid::uniform(50)), 10000, 6);
  const PosteriorModel model(data, w);
  const MapResult map = find_map(model, default_init(model.dimension(), 1));
  const auto tuned = tune_beta(model, map, 0.4, 200000, 7);
  ChainConfig cfg;
  cfg.beta = tuned.beta;
  cfg.n_chains = 4;
  cfg.thinning = kDefaultThinning;
  cfg.n_steps = 50000LL * cfg.thinning;
  const auto chains = run_chains(model, map, cfg);
  const std::int64_t burn_in = cfg.n_steps / 10;
  double lo = 1.0, hi = 0.0;
  for (const auto& c : chains) {
    lo = std::min(lo, c.acceptance_rate());
    hi = std::max(hi, c.acceptance_rate());
  }
  const auto summary = posterior_summary(chains, burn_in);
  const double fid = fidelity(summary.mean_density, truth);
  const auto rhat = gelman_rubin_map(chains, burn_in);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, r] : rhat) {
    if (name.rfind("re(", 0) == 0 || name.rfind("im(", 0) == 0 || name == "zero_loss") {
      if (r > worst) {
        worst = r;
        worst_name = name;
      }
    }
  }
  out.detail << "beta " << fmt(tuned.beta) << "; ";
  out.require(lo >= 0.2 && hi <= 0.6, "acceptance in [" + fmt(lo) + ", " + fmt(hi) + "] (within [0.2, 0.6])");
  out.require(fid >= 0.95, "posterior-mean fidelity " + fmt(fid) + " (>= 0.95)");
  out.require(worst < 1.1, "max R-hat " + fmt(worst) + " at " + worst_name + " (< 1.1)");
}

// 7. Largest first-order coherence of a single interaction after dispersion.
void coherence_maximum(Outcome& out) {
  const EnergyWindow w(-40, 40);
  double best_g = 0.5;
  ChirpOptimum best = maximize_coherence_over_chirp(best_g, w);
  for (int i = 1; i <= 550; ++i) {
    const double g = 0.5 + 0.01 * i;
    const auto c = maximize_coherence_over_chirp(g, w);
    if (c.coherence > best.coherence) {
      best = c;
      best_g = g;
    }
  }
  double a = std::max(0.5, best_g - 0.01), b = std::min(6.0, best_g + 0.01);
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 60; ++it) {
    const double g1 = b - golden * (b - a), g2 = a + golden * (b - a);
    if (maximize_coherence_over_chirp(g1, w).coherence > maximize_coherence_over_chirp(g2, w).coherence) {
      b = g2;
    } else {
      a = g1;
    }
  }
  const auto refined = maximize_coherence_over_chirp(0.5 * (a + b), w);
  if (refined.coherence > best.coherence) {
    best = refined;
    best_g = 0.5 * (a + b);
  }
  ForwardParams p;
  p.g_lo = p.g_hi = best_g;
  p.chirp = best.chirp;
  const double via_model = std::abs(coherence_moments(model_density(p, w), 1)[0]);
  out.detail << "argmax g = " << fmt(best_g) << ", chirp = " << fmt(best.chirp) << "; ";
  out.require(std::abs(via_model - best.coherence) < 1e-10, "model_density agrees (" + fmt(via_model) + ")");
  out.require(std::abs(best.coherence - 0.58) <= 0.02, "max |<b>| = " + fmt(best.coherence) + " (0.58 +- 0.02)");
}

// 8. Forward-model self-consistency and the compressed pulse width.
void forward_self_consistency(Outcome& out) {
  const EnergyWindow w(-30, 30);
  const PositionGrid grid(1024);
  ForwardParams truth;
  truth.g_lo = 3.73;
  truth.g_hi = 4.52;
  truth.phase_noise = 0.064;
  // Chirp of strongest compression: smallest FWHM of the temporal density.
  auto width = [&](double c) {
    ForwardParams p = truth;
    p.chirp = c;
    try {
      return fwhm(temporal_density(model_density(p, w), grid));
    } catch (const NumericalError&) {
      return 1.0;
    }
  };
  double best_c = 0.005, best_w = width(best_c);
  for (int i = 1; i < 400; ++i) {
    const double c = 0.005 + 0.5 * i / 400;
    const double v = width(c);
    if (v < best_w) {
      best_w = v;
      best_c = c;
    }
  }
  truth.chirp = best_c;
  const auto target = model_density(truth, w);

  ForwardParams init;
  init.g_lo = 3.4;
  init.g_hi = 4.9;
  init.chirp = best_c * 1.15;
  init.phase_noise = 0.05;
  FitOptions opt;
  opt.restarts = 5;
  opt.seed = 8;
  const auto fit = fit_forward_model(target, init, opt);
  const auto rel = [](double a, double b) { return std::abs(a / b - 1.0); };
  out.detail << "generating chirp " << fmt(best_c) << "; ";
  out.require(rel(fit.params.g_lo, truth.g_lo) < 0.02, "g_lo " + fmt(fit.params.g_lo) + " (2%)");
  out.require(rel(fit.params.g_hi, truth.g_hi) < 0.02, "g_hi " + fmt(fit.params.g_hi) + " (2%)");
  out.require(rel(fit.params.phase_noise, truth.phase_noise) < 0.05, "phase noise " + fmt(fit.params.phase_noise) + " (5%)");
  out.detail << "chirp " << fmt(fit.params.chirp) << ", fidelity " << fmt(fit.fidelity) << "; ";
  double f = -1.0;
  try {
    f = fwhm(temporal_density(model_density(fit.params, w), grid));
  } catch (const NumericalError& e) {
    out.detail << "FWHM undefined: " << e.what() << "; ";
  }
  out.require(f >= 0.06 && f <= 0.12, "FWHM " + fmt(f) + " of the period (within [0.06, 0.12])");
}

// 9. Diagnostics examples.
void diagnostics_examples(Outcome& out) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z;
  auto normal_chains = [&](int m, int n, double shift) {
    std::vector<Series> c(m, Series(n));
    for (int i = 0; i < m; ++i)
      for (auto& v : c[i]) v = z(rng) + shift * i;
    return c;
  };
  Series s(200);
  for (int i = 0; i < 200; ++i) s[i] = std::cos(0.1 * i) + 0.01 * i;
  const double same = gelman_rubin(std::vector<Series>{s, s, s, s});
  out.require(std::abs(same - std::sqrt(199.0 / 200.0)) < 1e-12, "identical chains R-hat " + fmt(same));
  const double iid = gelman_rubin(normal_chains(4, 10000, 0.0));
  out.require(iid >= 0.99 && iid <= 1.05, "iid R-hat " + fmt(iid) + " (in [0.99, 1.05])");
  const double shifted = gelman_rubin(normal_chains(2, 10000, 10.0));
  out.require(shifted > 1.2, "shifted-mean R-hat " + fmt(shifted) + " (> 1.2)");

  const Series noise = normal_chains(1, 100000, 0.0)[0];
  const auto acf = autocorrelation(noise, 50);
  int inside = 0;
  for (int k = 1; k <= 50; ++k) inside += std::abs(acf[k]) < 3.0 / std::sqrt(1e5);
  out.require(acf[0] == 1.0, "lag-0 autocorrelation " + fmt(acf[0]));
  out.require(inside >= 48, std::to_string(inside) + "/50 white-noise lags inside 3/sqrt(n) (>= 95%)");

  Series ar(1000000);
  double x = 0.0;
  for (int i = 0; i < 1000; ++i) x = 0.9 * x + z(rng);
  for (auto& v : ar) v = x = 0.9 * x + z(rng);
  const auto r = autocorrelation(ar, 20);
  double dev = 0.0;
  for (int k = 0; k <= 20; ++k) dev = std::max(dev, std::abs(r[k] - std::pow(0.9, k)));
  out.require(dev < 0.02, "AR(1) deviation from 0.9^k " + fmt(dev) + " (< 0.02)");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 10. Golden files and round trips for all three formats.
void io_golden(Outcome& out) {
  const fs::path golden = FETOMO_GOLDEN_DIR;
  const fs::path tmp = fs::temp_directory_path() / ("fetomo_accept_" + std::to_string(std::random_device{}()));
  fs::create_directories(tmp);

  const auto s = io::read_spectrogram(golden / "spectrogram.json");
  io::write_spectrogram(tmp / "s.json", s);
  const auto s2 = io::read_spectrogram(tmp / "s.json");
  out.require(s.counts(2, 1) == 90.0 && s.coupling_magnitude == 0.75 && s.window == EnergyWindow(-1, 1),
              "golden spectrogram contents");
  out.require(s2.counts == s.counts && s2.coupling_magnitude == s.coupling_magnitude &&
                  s2.total_per_phase == s.total_per_phase && s2.window == s.window,
              "spectrogram round trip");

  const auto rho = io::read_density(golden / "density.json");
  io::write_density(tmp / "r.json", rho);
  const auto rho2 = io::read_density(tmp / "r.json");
  out.require(rho.at(0, 1) == Complex(0.25, -0.125), "golden density contents");
  out.require(max_abs(rho2.matrix() - rho.matrix()) <= 1e-15, "density round trip");

  const auto c = io::read_chain(golden / "chain.json");
  io::write_chain(tmp / "chain_0.json", c);
  const auto c2 = io::read_chain(tmp / "chain_0.json");
  const std::string golden_bytes = slurp(golden / "chain.bin");
  out.require(c.samples.size() == 3 && c.seed == 12345u && c.beta == 0.02, "golden chain header");
  out.require(slurp(tmp / "chain_0.bin") == golden_bytes, "chain payload byte-exact");
  bool same = c2.samples.size() == c.samples.size();
  for (std::size_t i = 0; same && i < c.samples.size(); ++i) {
    same = std::memcmp(c.samples[i].data(), c2.samples[i].data(), sizeof(double) * c.samples[i].size()) == 0;
  }
  out.require(same && c2.acceptance_count == c.acceptance_count && c2.thinning == c.thinning, "chain round trip");
  fs::remove_all(tmp);
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // 0: no stated bound
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "unitary oracle", 1.0, unitary_oracle},
      {2, "Wigner validity", 30.0, wigner_validity},
      {3, "MLE round trip", 300.0, mle_round_trip},
      {4, "gradient/Hessian checks", 60.0, derivative_checks},
      {5, "pCN exactness", 0.0, pcn_exactness},
      {6, "Bayesian round trip", 1800.0, bayes_round_trip},
      {7, "coherence maximum", 120.0, coherence_maximum},
      {8, "forward-model self-consistency", 600.0, forward_self_consistency},
      {9, "diagnostics", 60.0, diagnostics_examples},
      {10, "I/O golden files", 0.0, io_golden},
  };
  const std::string which = argc > 1 ? argv[1] : "all";
  set_warning_handler([](std::string_view) {});
  bool ok = true;
  for (const auto& c : all) {
    if (which != "all" && which != std::to_string(c.id)) continue;
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << "exception: " << e.what() << "; ";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_seconds > 0) out.require(secs < c.limit_seconds, "runtime " + fmt(secs) + " s (< " + fmt(c.limit_seconds) + " s)");
    else out.detail << "runtime " << fmt(secs) << " s";
    std::printf("criterion %2d %-32s %s  %s\n", c.id, c.name, out.pass ? "PASS" : "FAIL", out.detail.str().c_str());
    std::fflush(stdout);
    ok = ok && out.pass;
  }
  return ok ? 0 : 1;
}
