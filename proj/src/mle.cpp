#include "fetomo/mle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fetomo/error.hpp"

namespace fetomo {

namespace {

constexpr double kFallbackDilution = 0.5;
constexpr double kMinimumDilution = 1e-8;

RMatrix likelihood_weights(const RMatrix& exponents, const RMatrix& p) {
  RMatrix w(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      w(i, j) = exponents(i, j) == 0.0 ? 0.0 : exponents(i, j) / std::max(p(i, j), kProbabilityFloor);
    }
  }
  return w;
}

double log_likelihood_from(const RMatrix& exponents, const RMatrix& p) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (exponents(i, j) != 0.0) sum += exponents(i, j) * std::log(std::max(p(i, j), kProbabilityFloor));
    }
  }
  return sum;
}

CMatrix step_with(const CMatrix& r, const CMatrix& rho, double dilution) {
  const auto d = static_cast<double>(rho.rows());
  CMatrix rt = dilution * r;
  rt.diagonal().array() += (1.0 - dilution) * r.trace().real() / d;
  CMatrix next = rt * rho * rt;
  next = 0.5 * (next + next.adjoint()).eval();
  return next / next.trace().real();
}

}  // namespace

void MleConfig::validate() const {
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be at least 1");
  if (!(tolerance > 0.0)) throw InvalidArgument("tolerance must be positive");
  if (!(dilution > 0.0 && dilution <= 1.0)) throw InvalidArgument("dilution must lie in (0, 1]");
  if (initial_state && window && !(initial_state->window() == *window)) {
    throw DimensionError("initial state does not live on the reconstruction window");
  }
}

CMatrix r_operator(const SweepOperators& ops, const RMatrix& exponents, const CMatrix& rho) {
  return ops.weighted_projector_sum(likelihood_weights(exponents, ops.probabilities(rho)));
}

ComplexMatrix r_operator(const Spectrogram& data, const DensityMatrix& rho) {
  const SweepOperators ops(data.coupling_magnitude, data.phases, data.window, rho.window());
  return {rho.window(), r_operator(ops, data.exponents(), rho.matrix())};
}

CMatrix mle_step(const SweepOperators& ops, const RMatrix& exponents, const CMatrix& rho,
                 double dilution) {
  return step_with(r_operator(ops, exponents, rho), rho, dilution);
}

MleResult mle_reconstruct(const Spectrogram& data, const MleConfig& config) {
  config.validate();
  const RMatrix exponents = data.exponents();
  if (!(exponents.sum() > 0.0)) throw InvalidArgument("spectrogram has no counts");

  const EnergyWindow window =
      config.window ? *config.window
                    : (config.initial_state ? config.initial_state->window() : data.window);
  const SweepOperators ops(data.coupling_magnitude, data.phases, data.window, window);

  CMatrix rho = config.initial_state ? config.initial_state->matrix()
                                     : DensityMatrix::maximally_mixed(window).matrix();
  RMatrix p = ops.probabilities(rho);
  double ll = log_likelihood_from(exponents, p);

  MleResult result{trusted_density(window, rho), {ll}, 0, false, config.dilution};
  double dilution = config.dilution;

  for (int it = 0; it < config.max_iterations; ++it) {
    const CMatrix r = ops.weighted_projector_sum(likelihood_weights(exponents, p));
    CMatrix next = step_with(r, rho, dilution);
    RMatrix p_next = ops.probabilities(next);
    double ll_next = log_likelihood_from(exponents, p_next);
    while (ll_next < ll && dilution > kMinimumDilution) {
      dilution = dilution > kFallbackDilution ? kFallbackDilution : 0.5 * dilution;
      next = step_with(r, rho, dilution);
      p_next = ops.probabilities(next);
      ll_next = log_likelihood_from(exponents, p_next);
    }
    if (ll_next < ll) {
      // Even a vanishing step lowers the likelihood: rho is stationary.
      result.converged = true;
      break;
    }
    const double change = ll_next - ll;
    rho = std::move(next);
    p = std::move(p_next);
    ll = ll_next;
    result.log_likelihood_trace.push_back(ll);
    result.iterations = it + 1;
    if (change < config.tolerance * std::max(1.0, std::abs(ll))) {
      result.converged = true;
      break;
    }
  }
  result.rho = trusted_density(window, rho);
  result.final_dilution = dilution;
  if (!result.converged) {
    warn("maximum-likelihood iteration stopped after " + std::to_string(result.iterations) +
         " iterations without meeting the tolerance");
  }
  return result;
}

}  // namespace fetomo
