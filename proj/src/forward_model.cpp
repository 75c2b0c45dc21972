#include "fetomo/forward_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "fetomo/error.hpp"
#include "fetomo/phase_space.hpp"
#include "fetomo/quadrature.hpp"

namespace fetomo {

void ForwardParams::validate() const {
  if (!(g_lo >= 0.0) || !(g_hi >= g_lo)) throw InvalidArgument("need 0 <= g_lo <= g_hi");
  if (!(phase_noise >= 0.0)) throw InvalidArgument("phase noise must be non-negative");
  if (!std::isfinite(g_hi) || !std::isfinite(chirp) || !std::isfinite(phase_noise)) {
    throw InvalidArgument("forward parameters must be finite");
  }
}

namespace {

void check_truncation(const ForwardParams& params, const EnergyWindow& window) {
  const int support = bessel_support(params.g_hi, 1e-14);
  if (-window.n_min() < support || window.n_max() < support) {
    warn("forward-model window [" + std::to_string(window.n_min()) + ", " +
         std::to_string(window.n_max()) + "] truncates sidebands of g = " +
         std::to_string(params.g_hi));
  }
}

DensityMatrix build_density(const ForwardParams& params, const EnergyWindow& window,
                            QuadratureOrders orders) {
  const int d = window.dim();
  const int reach = std::max(-window.n_min(), window.n_max());

  QuadratureRule couplings;
  if (params.g_hi > params.g_lo) {
    couplings = gauss_legendre(orders.coupling, params.g_lo, params.g_hi);
    for (auto& w : couplings.weights) w /= (params.g_hi - params.g_lo);
  } else {
    couplings = {{params.g_lo}, {1.0}};
  }

  // Average of e^{i (N-M) delta} per index difference.
  std::vector<Complex> dephasing(2 * d - 1, Complex(1.0, 0.0));
  if (params.phase_noise > 0.0) {
    const QuadratureRule jitter = gauss_hermite_normal(orders.phase);
    const double sigma = kTwoPi * params.phase_noise;
    for (int diff = -(d - 1); diff <= d - 1; ++diff) {
      Complex sum(0.0, 0.0);
      for (std::size_t j = 0; j < jitter.nodes.size(); ++j) {
        sum += jitter.weights[j] * std::polar(1.0, diff * sigma * jitter.nodes[j]);
      }
      dephasing[diff + d - 1] = sum;
    }
  }

  RMatrix populations = RMatrix::Zero(d, d);  // sum_g w J_N J_M
  RVector amp(d);
  for (std::size_t q = 0; q < couplings.nodes.size(); ++q) {
    const auto j = bessel_j_orders(reach, 2.0 * couplings.nodes[q]);
    for (int a = 0; a < d; ++a) {
      const int n = window.label(a);
      amp[a] = (n < 0 && (-n) % 2 != 0) ? -j[-n] : j[std::abs(n)];
    }
    populations.noalias() += couplings.weights[q] * amp * amp.transpose();
  }

  CMatrix rho(d, d);
  for (int a = 0; a < d; ++a) {
    const int n = window.label(a);
    for (int b = 0; b < d; ++b) {
      const int m = window.label(b);
      const double phase = params.chirp * (static_cast<double>(n) * n - static_cast<double>(m) * m);
      rho(a, b) = populations(a, b) * std::polar(1.0, phase) * dephasing[n - m + d - 1];
    }
  }
  return trusted_density(window, std::move(rho));
}

}  // namespace

DensityMatrix model_density(const ForwardParams& params, const EnergyWindow& window,
                            QuadratureOrders orders) {
  params.validate();
  if (orders.coupling < 1 || orders.phase < 1) throw InvalidArgument("quadrature orders must be positive");
  check_truncation(params, window);
  return build_density(params, window, orders);
}

namespace {

using Point = std::array<double, 4>;

ForwardParams decode(const Point& u) {
  ForwardParams p;
  p.g_lo = std::abs(u[0]);
  p.g_hi = p.g_lo + std::abs(u[1]);
  p.chirp = u[2];
  p.phase_noise = std::abs(u[3]);
  return p;
}

Point encode(const ForwardParams& p) { return {p.g_lo, p.g_hi - p.g_lo, p.chirp, p.phase_noise}; }

struct NmResult {
  Point best;
  double value;
  bool converged;
};

NmResult nelder_mead(const std::function<double(const Point&)>& f, const Point& start,
                     int max_evals, double tol) {
  constexpr int n = 4;
  std::array<Point, n + 1> simplex;
  std::array<double, n + 1> values;
  simplex[0] = start;
  for (int i = 0; i < n; ++i) {
    simplex[i + 1] = start;
    const double h = std::abs(start[i]) > 1e-3 ? 0.1 * std::abs(start[i]) : 0.02;
    simplex[i + 1][i] += h;
  }
  int evals = 0;
  for (int i = 0; i <= n; ++i) {
    values[i] = f(simplex[i]);
    ++evals;
  }
  bool converged = false;
  while (evals < max_evals) {
    std::array<int, n + 1> order;
    for (int i = 0; i <= n; ++i) order[i] = i;
    // Stable sort keeps the incumbent first on ties.
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
    std::array<Point, n + 1> s2;
    std::array<double, n + 1> v2;
    for (int i = 0; i <= n; ++i) {
      s2[i] = simplex[order[i]];
      v2[i] = values[order[i]];
    }
    simplex = s2;
    values = v2;

    double size = 0.0;
    for (int i = 1; i <= n; ++i) {
      for (int k = 0; k < n; ++k) size = std::max(size, std::abs(simplex[i][k] - simplex[0][k]));
    }
    if (values[n] - values[0] <= tol && size <= 1e-9) {
      converged = true;
      break;
    }

    Point centroid{};
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) centroid[k] += simplex[i][k] / n;
    }
    auto along = [&](double t) {
      Point p;
      for (int k = 0; k < n; ++k) p[k] = centroid[k] + t * (simplex[n][k] - centroid[k]);
      return p;
    };
    const Point xr = along(-1.0);
    const double fr = f(xr);
    ++evals;
    if (fr < values[0]) {
      const Point xe = along(-2.0);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        simplex[n] = xe;
        values[n] = fe;
      } else {
        simplex[n] = xr;
        values[n] = fr;
      }
    } else if (fr < values[n - 1]) {
      simplex[n] = xr;
      values[n] = fr;
    } else {
      const bool outside = fr < values[n];
      const Point xc = along(outside ? -0.5 : 0.5);
      const double fc = f(xc);
      ++evals;
      if (fc < (outside ? fr : values[n])) {
        simplex[n] = xc;
        values[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          for (int k = 0; k < n; ++k) simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
          values[i] = f(simplex[i]);
          ++evals;
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i) {
    if (values[i] < values[best]) best = i;
  }
  return {simplex[best], values[best], converged};
}

}  // namespace

ForwardFit fit_forward_model(const DensityMatrix& target, const ForwardParams& init,
                             const FitOptions& options) {
  init.validate();
  if (options.restarts < 1) throw InvalidArgument("need at least one restart");
  if (options.orders.coupling < 1 || options.orders.phase < 1) throw InvalidArgument("quadrature orders must be positive");
  const EnergyWindow window = target.window();
  const auto objective = [&](const Point& u) {
    return (build_density(decode(u), window, options.orders).matrix() - target.matrix()).norm();
  };

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  ForwardFit fit;
  NmResult best{encode(init), objective(encode(init)), true};
  bool any_converged = false;
  for (int r = 0; r < options.restarts; ++r) {
    Point start = encode(init);
    if (r > 0) {
      for (int k : {0, 1, 3}) start[k] *= std::exp(options.restart_spread * normal(rng));
      start[2] += options.restart_spread * (std::abs(start[2]) + 0.05) * normal(rng);
    }
    const NmResult run = nelder_mead(objective, start, options.max_evaluations, options.tolerance);
    any_converged = any_converged || run.converged;
    fit.restart_params.push_back(decode(run.best));
    fit.restart_distances.push_back(run.value);
    if (run.value < best.value) best = run;
  }
  const NmResult polish = nelder_mead(objective, best.best, options.max_evaluations, options.tolerance);
  if (polish.value < best.value) best = polish;

  fit.params = decode(best.best);
  fit.frobenius_distance = best.value;
  fit.fidelity = fidelity(model_density(fit.params, window, options.orders), target);  // warns once if truncated
  fit.converged = any_converged || polish.converged;
  if (!fit.converged) warn("forward-model fit did not meet its tolerance");
  return fit;
}

ChirpOptimum maximize_coherence_over_chirp(double g, const EnergyWindow& window) {
  const CVector psi = pinem_amplitudes(Coupling(g, 0.0), window);
  const int d = window.dim();
  auto coherence = [&](double c) {
    Complex sum(0.0, 0.0);
    for (int a = 1; a < d; ++a) {
      const double n = window.label(a);
      // psi_N conj(psi_{N-1}) e^{i c (N^2 - (N-1)^2)}
      sum += psi[a] * std::conj(psi[a - 1]) * std::polar(1.0, c * (2.0 * n - 1.0));
    }
    return std::abs(sum);
  };
  // |<b>| has period pi in the chirp.
  constexpr int kScan = 720;
  ChirpOptimum best{0.0, coherence(0.0)};
  for (int i = 0; i < kScan; ++i) {
    const double c = -0.5 * kPi + kPi * i / kScan;
    const double v = coherence(c);
    if (v > best.coherence) best = {c, v};
  }
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = best.chirp - kPi / kScan;
  double b = best.chirp + kPi / kScan;
  for (int it = 0; it < 80; ++it) {
    const double c1 = b - golden * (b - a);
    const double c2 = a + golden * (b - a);
    if (coherence(c1) > coherence(c2)) {
      b = c2;
    } else {
      a = c1;
    }
  }
  const double c = 0.5 * (a + b);
  const double v = coherence(c);
  if (v > best.coherence) best = {c, v};
  return best;
}

}  // namespace fetomo
