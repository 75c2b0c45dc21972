#include "fetomo/spectrogram.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "fetomo/error.hpp"

namespace fetomo {

PhaseGrid::PhaseGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidArgument("phase grid is empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0 && values_[i] < kTwoPi)) {
      throw InvalidArgument("phase " + std::to_string(values_[i]) + " outside [0, 2pi)");
    }
    if (i > 0 && !(values_[i] > values_[i - 1])) {
      throw InvalidArgument("phases must be strictly increasing");
    }
  }
}

PhaseGrid PhaseGrid::uniform(int count) {
  if (count < 1) throw InvalidArgument("phase count must be positive");
  std::vector<double> v(count);
  for (int i = 0; i < count; ++i) v[i] = kTwoPi * i / count;
  return PhaseGrid(std::move(v));
}

Spectrogram::Spectrogram(EnergyWindow w, PhaseGrid p, RMatrix c, double g_abs,
                         std::optional<double> total)
    : window(w), phases(std::move(p)), counts(std::move(c)), coupling_magnitude(g_abs),
      total_per_phase(total) {
  if (counts.rows() != phases.size() || counts.cols() != window.dim()) {
    throw DimensionError("counts are " + std::to_string(counts.rows()) + "x" +
                         std::to_string(counts.cols()) + ", expected " +
                         std::to_string(phases.size()) + "x" + std::to_string(window.dim()));
  }
  if (!counts.allFinite() || (counts.array() < 0.0).any()) {
    throw InvalidArgument("counts must be finite and non-negative");
  }
  if (!(coupling_magnitude >= 0.0) || !std::isfinite(coupling_magnitude)) {
    throw InvalidArgument("coupling magnitude must be finite and non-negative");
  }
  if (total_per_phase && !(*total_per_phase > 0.0 && std::isfinite(*total_per_phase))) {
    throw InvalidArgument("total_per_phase must be positive");
  }
}

RMatrix Spectrogram::exponents() const {
  return total_per_phase ? RMatrix(counts * *total_per_phase) : counts;
}

bool Spectrogram::rows_normalized(double tol) const {
  const RVector sums = counts.rowwise().sum();
  return ((sums.array() - 1.0).abs() <= tol).all();
}

SweepOperators::SweepOperators(double g_abs, const PhaseGrid& phases, EnergyWindow data_window,
                               EnergyWindow state_window)
    : data_window_(data_window), state_window_(state_window) {
  blocks_.reserve(phases.size());
  const CMatrix base = interaction_block(Coupling(g_abs, 0.0), data_window, state_window);
  for (int i = 0; i < phases.size(); ++i) {
    // Phase shift multiplies entry (N, M) by e^{i (N - M) phi}.
    CMatrix b(base.rows(), base.cols());
    for (int c = 0; c < base.cols(); ++c) {
      for (int r = 0; r < base.rows(); ++r) {
        const int k = data_window.label(r) - state_window.label(c);
        b(r, c) = base(r, c) * std::polar(1.0, k * phases[i]);
      }
    }
    blocks_.push_back(std::move(b));
  }
}

RMatrix SweepOperators::probabilities(const CMatrix& rho) const {
  RMatrix p(phase_count(), data_window_.dim());
  for (int i = 0; i < phase_count(); ++i) {
    const CMatrix& v = blocks_[i];
    const CMatrix vr = v * rho;
    p.row(i) = vr.cwiseProduct(v.conjugate()).rowwise().sum().real().transpose();
  }
  return p;
}

CMatrix SweepOperators::weighted_projector_sum(const RMatrix& weights) const {
  const int d = state_window_.dim();
  CMatrix r = CMatrix::Zero(d, d);
  for (int i = 0; i < phase_count(); ++i) {
    const CMatrix& v = blocks_[i];
    r.noalias() += v.adjoint() * (weights.row(i).transpose().asDiagonal() * v);
  }
  return 0.5 * (r + r.adjoint());
}

Spectrogram simulate_spectrogram(const DensityMatrix& rho, double g_abs, const PhaseGrid& phases) {
  return simulate_spectrogram(rho, g_abs, phases,
                              rho.window().padded(truncation_padding(g_abs)));
}

Spectrogram simulate_spectrogram(const DensityMatrix& rho, double g_abs, const PhaseGrid& phases,
                                 EnergyWindow data_window) {
  const SweepOperators ops(g_abs, phases, data_window, rho.window());
  RMatrix p = ops.probabilities(rho.matrix()).cwiseMax(0.0);
  return {data_window, phases, std::move(p), g_abs};
}

Spectrogram sample_counts(const Spectrogram& probs, std::int64_t total_per_phase,
                          std::uint64_t seed) {
  if (total_per_phase <= 0) throw InvalidArgument("total_per_phase must be positive");
  if (!probs.rows_normalized(1e-6)) {
    throw InvalidArgument("spectrogram rows must be normalized probabilities");
  }
  std::mt19937_64 rng(seed);
  RMatrix counts = RMatrix::Zero(probs.counts.rows(), probs.counts.cols());
  for (Eigen::Index i = 0; i < probs.counts.rows(); ++i) {
    std::int64_t remaining = total_per_phase;
    double mass_left = probs.counts.row(i).sum();
    for (Eigen::Index j = 0; j < probs.counts.cols() && remaining > 0; ++j) {
      const double pj = probs.counts(i, j);
      if (j + 1 == probs.counts.cols()) {
        counts(i, j) = static_cast<double>(remaining);
        break;
      }
      const double q = mass_left > 0.0 ? std::clamp(pj / mass_left, 0.0, 1.0) : 0.0;
      std::binomial_distribution<std::int64_t> draw(remaining, q);
      const std::int64_t k = draw(rng);
      counts(i, j) = static_cast<double>(k);
      remaining -= k;
      mass_left -= pj;
    }
  }
  return {probs.window, probs.phases, std::move(counts), probs.coupling_magnitude};
}

Spectrogram expected_counts(const Spectrogram& probs, double total_per_phase) {
  if (!(total_per_phase > 0.0)) throw InvalidArgument("total_per_phase must be positive");
  return {probs.window, probs.phases, probs.counts * total_per_phase, probs.coupling_magnitude};
}

double log_likelihood(const SweepOperators& ops, const RMatrix& exponents, const CMatrix& rho) {
  const RMatrix p = ops.probabilities(rho);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double w = exponents(i, j);
      if (w != 0.0) sum += w * std::log(std::max(p(i, j), kProbabilityFloor));
    }
  }
  return sum;
}

double log_likelihood(const Spectrogram& data, const DensityMatrix& rho) {
  const SweepOperators ops(data.coupling_magnitude, data.phases, data.window, rho.window());
  return log_likelihood(ops, data.exponents(), rho.matrix());
}

}  // namespace fetomo
