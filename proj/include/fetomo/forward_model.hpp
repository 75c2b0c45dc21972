#pragma once

#include <cstdint>
#include <vector>

#include "fetomo/ladder.hpp"

namespace fetomo {

/// Decoherence model of a single interaction followed by dispersion.
struct ForwardParams {
  double g_lo = 0.0;         // coupling interval, uniformly mixed
  double g_hi = 0.0;
  double chirp = 0.0;        // dispersive phase e^{i chirp N^2}
  double phase_noise = 0.0;  // std of optical-phase jitter, fraction of a period

  void validate() const;
};

struct QuadratureOrders {
  int coupling = 33;  // Gauss-Legendre nodes over [g_lo, g_hi]
  int phase = 61;     // Gauss-Hermite nodes over the phase jitter
};

/// Average of D U_{g,delta} |0><0| U_{g,delta}^dagger D^dagger over
/// g ~ Uniform[g_lo, g_hi] and delta ~ Normal(0, 2 pi phase_noise), with
/// D = diag(e^{i chirp N^2}) and arg g = delta.
DensityMatrix model_density(const ForwardParams& params, const EnergyWindow& window,
                            QuadratureOrders orders = {});

struct FitOptions {
  int restarts = 5;
  std::uint64_t seed = 0;
  int max_evaluations = 4000;  // per Nelder-Mead run
  double tolerance = 1e-13;
  // Relative spread of the random restart points around the initial guess.
  double restart_spread = 0.2;
  QuadratureOrders orders;
};

struct ForwardFit {
  ForwardParams params;
  double frobenius_distance = 0.0;
  double fidelity = 0.0;
  bool converged = true;
  std::vector<ForwardParams> restart_params;
  std::vector<double> restart_distances;
};

/// Nelder-Mead minimization of |model_density(p) - target|_F from `init`
/// and restarts - 1 randomly perturbed copies of it, followed by a polish
/// run from the best point.
ForwardFit fit_forward_model(const DensityMatrix& target, const ForwardParams& init,
                             const FitOptions& options = {});

struct ChirpOptimum {
  double chirp = 0.0;
  double coherence = 0.0;  // |<b>|
};

/// Chirp maximizing |<b>| for a pure single-interaction state with coupling g.
ChirpOptimum maximize_coherence_over_chirp(double g, const EnergyWindow& window);

}  // namespace fetomo
