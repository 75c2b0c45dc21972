#pragma once

#include <optional>
#include <vector>

#include "fetomo/ladder.hpp"
#include "fetomo/spectrogram.hpp"

namespace fetomo {

struct MleConfig {
  int max_iterations = 5000;
  // Relative change of the log-likelihood below which the iteration stops.
  double tolerance = 1e-10;
  // Mixing weight of R against its trace-normalized identity; 1 is undiluted.
  double dilution = 1.0;
  // Starting point; maximally mixed on the reconstruction window when unset.
  std::optional<DensityMatrix> initial_state;
  // Reconstruction window; the data window when unset.
  std::optional<EnergyWindow> window;

  void validate() const;
};

struct MleResult {
  DensityMatrix rho;
  // Log-likelihood of the starting point followed by every accepted iterate.
  std::vector<double> log_likelihood_trace;
  int iterations = 0;
  bool converged = false;
  // Dilution in effect when the iteration stopped (may be below the request
  // after automatic fallback).
  double final_dilution = 1.0;
};

/// R = sum_{phi,N} S(phi,N)/p(phi,N) U_phi^dagger |N><N| U_phi.
ComplexMatrix r_operator(const Spectrogram& data, const DensityMatrix& rho);
CMatrix r_operator(const SweepOperators& ops, const RMatrix& exponents, const CMatrix& rho);

/// One diluted step rho -> R' rho R' / Tr(R' rho R') with
/// R' = (1 - dilution) Tr(R)/d I + dilution R.
CMatrix mle_step(const SweepOperators& ops, const RMatrix& exponents, const CMatrix& rho,
                 double dilution);

MleResult mle_reconstruct(const Spectrogram& data, const MleConfig& config = {});

}  // namespace fetomo
