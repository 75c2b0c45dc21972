#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fetomo/ladder.hpp"

namespace fetomo {

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr int kDefaultPhaseCount = 100;

/// Strictly increasing sweep phases in [0, 2pi).
class PhaseGrid {
 public:
  explicit PhaseGrid(std::vector<double> values);
  static PhaseGrid uniform(int count = kDefaultPhaseCount);

  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

 private:
  std::vector<double> values_;
};

/// Phase-swept energy spectra S(phi, N): one row per phase, one column per
/// energy index of `window`. Rows are either probabilities or counts.
///
/// When `total_per_phase` is set, the rows are frequencies and the likelihood
/// exponents are `counts * total_per_phase`; otherwise counts are used as-is.
struct Spectrogram {
  Spectrogram(EnergyWindow window, PhaseGrid phases, RMatrix counts, double coupling_magnitude,
              std::optional<double> total_per_phase = std::nullopt);

  EnergyWindow window;
  PhaseGrid phases;
  RMatrix counts;
  double coupling_magnitude;
  std::optional<double> total_per_phase;

  RMatrix exponents() const;
  double total() const { return exponents().sum(); }
  // True when every row sums to one within `tol`.
  bool rows_normalized(double tol = 1e-6) const;
};

/// Precomputed rectangular blocks V_phi = <N| U_phi |M> for N in the data
/// window and M in the state window. Shared by the forward model, the
/// likelihood and the reconstructions.
class SweepOperators {
 public:
  SweepOperators(double coupling_magnitude, const PhaseGrid& phases, EnergyWindow data_window,
                 EnergyWindow state_window);

  const EnergyWindow& data_window() const { return data_window_; }
  const EnergyWindow& state_window() const { return state_window_; }
  int phase_count() const { return static_cast<int>(blocks_.size()); }
  const CMatrix& block(int phase) const { return blocks_[phase]; }

  // p(phi, N) = <N| U_phi rho U_phi^dagger |N>, unfloored.
  RMatrix probabilities(const CMatrix& rho) const;

  // sum_{phi,N} weight(phi,N) U_phi^dagger |N><N| U_phi
  CMatrix weighted_projector_sum(const RMatrix& weights) const;

 private:
  EnergyWindow data_window_;
  EnergyWindow state_window_;
  std::vector<CMatrix> blocks_;
};

/// Expected spectra of `rho` on its window padded by truncation_padding(|g|).
Spectrogram simulate_spectrogram(const DensityMatrix& rho, double coupling_magnitude,
                                 const PhaseGrid& phases);
Spectrogram simulate_spectrogram(const DensityMatrix& rho, double coupling_magnitude,
                                 const PhaseGrid& phases, EnergyWindow data_window);

/// One multinomial draw of `total_per_phase` electrons per phase row.
Spectrogram sample_counts(const Spectrogram& probabilities, std::int64_t total_per_phase,
                          std::uint64_t seed);

/// Noiseless counterpart of sample_counts: total_per_phase * probabilities.
Spectrogram expected_counts(const Spectrogram& probabilities, double total_per_phase);

/// sum S(phi,N) log p(phi,N), with p floored at kProbabilityFloor.
double log_likelihood(const Spectrogram& data, const DensityMatrix& rho);
double log_likelihood(const SweepOperators& ops, const RMatrix& exponents, const CMatrix& rho);

}  // namespace fetomo
