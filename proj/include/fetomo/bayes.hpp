#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "fetomo/error.hpp"
#include "fetomo/ladder.hpp"
#include "fetomo/spectrogram.hpp"

namespace fetomo {

// Real vector of length 2 d^2 holding (Re A_ij, Im A_ij) pairs of a complex
// d x d matrix A in row-major order. rho = A A^dagger / Tr(A A^dagger).
using ParamVector = RVector;

inline constexpr double kDefaultBeta = 0.02;
inline constexpr int kDefaultThinning = 10;
inline constexpr double kHessianJitter = 1e-8;

int param_dimension(int d);
CMatrix param_matrix(const ParamVector& x, int d);
ParamVector matrix_param(const CMatrix& a);

DensityMatrix param_to_density(const ParamVector& x, const EnergyWindow& window);

/// A = sqrt(rho), scaled so that |x| = radius. param_to_density inverts it.
ParamVector density_to_param(const DensityMatrix& rho, double radius);

enum class Prior { StandardNormal, Flat };

/// log pi(x) = log L(S | rho(x)) - |x|^2 / 2 (the prior term is dropped for
/// Prior::Flat). Immutable and safe to share between chains.
class PosteriorModel {
 public:
  PosteriorModel(Spectrogram data, EnergyWindow state_window, Prior prior = Prior::StandardNormal);

  const Spectrogram& data() const { return data_; }
  const EnergyWindow& window() const { return ops_.state_window(); }
  Prior prior() const { return prior_; }
  int dimension() const { return param_dimension(window().dim()); }
  bool has_data() const { return total_ > 0.0; }

  double log_likelihood(const ParamVector& x) const;
  double log_density(const ParamVector& x) const;
  ParamVector likelihood_gradient(const ParamVector& x) const;
  ParamVector gradient(const ParamVector& x) const;
  // Second derivatives of the log-likelihood term, computed analytically by
  // differentiating the gradient along each coordinate.
  RMatrix likelihood_hessian(const ParamVector& x) const;
  RMatrix hessian(const ParamVector& x) const;

 private:
  struct Pieces;
  Pieces evaluate(const ParamVector& x) const;

  Spectrogram data_;
  SweepOperators ops_;
  RMatrix exponents_;
  Prior prior_;
  double total_;
};

double log_posterior(const PosteriorModel& model, const ParamVector& x);
ParamVector grad_log_posterior(const PosteriorModel& model, const ParamVector& x);

/// Symmetric positive-definite curvature H with its lower Cholesky factor.
struct Curvature {
  RMatrix hessian;
  RMatrix cholesky;
  double jitter = 0.0;

  // Symmetrizes, floors the spectrum at kHessianJitter * largest eigenvalue
  // by diagonal jitter and factors.
  static Curvature from(const RMatrix& negative_hessian);
};

struct MapResult {
  ParamVector x_map;
  Curvature curvature;
  double log_posterior_at_map = 0.0;
  bool converged = true;
  int steps = 0;
  double gradient_norm = 0.0;
};

struct MapOptions {
  double gradient_tolerance = 1e-6;
  int max_steps = 100000;
  // Gradient-ascent steps before switching to curvature-preconditioned steps.
  int gradient_steps = 2000;
};

/// Random standard-normal starting point.
ParamVector default_init(int dimension, std::uint64_t seed = 0);

/// Maximum a-posteriori point. With data, the likelihood depends only on the
/// direction of x while the prior factorizes into radius and direction, so the
/// search runs on the sphere |x|^2 = n - 1 (the radial mode) and maximizes the
/// likelihood over directions. Without data the Cartesian mode 0 is returned.
MapResult find_map(const PosteriorModel& model, const ParamVector& init,
                   const MapOptions& options = {});

/// H = -grad^2 log pi at x_map, symmetrized and jittered.
Curvature hessian_at_map(const PosteriorModel& model, const ParamVector& x_map);

/// Multivariate normal N(mean, precision^-1) as a sampling target.
class GaussianTarget {
 public:
  GaussianTarget(ParamVector mean, RMatrix precision);
  double log_density(const ParamVector& x) const;
  const ParamVector& mean() const { return mean_; }

 private:
  ParamVector mean_;
  RMatrix precision_;
};

template <class T>
concept LogDensity = requires(const T& t, const ParamVector& x) {
  { t.log_density(x) } -> std::convertible_to<double>;
};

/// Draw from N(x_map + sqrt(1 - beta^2)(current - x_map), beta^2 H^-1).
ParamVector pcn_propose(const ParamVector& current, const MapResult& map, double beta,
                        std::mt19937_64& rng);

/// log q(to | from) up to a constant.
double pcn_log_density(const ParamVector& to, const ParamVector& from, const MapResult& map,
                       double beta);

/// Draw from the Gaussian approximation N(x_map, H^-1).
ParamVector gaussian_draw(const MapResult& map, std::mt19937_64& rng);

struct MhOutcome {
  ParamVector next;
  double log_density = 0.0;
  bool accepted = false;
  double log_alpha = 0.0;
};

namespace detail {
void check_beta(double beta);
}

/// log alpha = min(0, log pi(x') - log pi(x) + log q(x | x') - log q(x' | x)).
/// A non-finite proposal density or a NaN ratio gives -inf (certain reject).
double mh_log_alpha(double proposal_log_density, double current_log_density,
                    const ParamVector& proposal, const ParamVector& current, const MapResult& map,
                    double beta);

template <LogDensity Target>
MhOutcome mh_step(const Target& target, const MapResult& map, double beta,
                  const ParamVector& current, double current_log_density, std::mt19937_64& rng) {
  detail::check_beta(beta);
  ParamVector proposal = pcn_propose(current, map, beta, rng);
  const double proposal_log_density = target.log_density(proposal);
  const double log_alpha =
      mh_log_alpha(proposal_log_density, current_log_density, proposal, current, map, beta);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  if (std::log(u) < log_alpha) {
    return {std::move(proposal), proposal_log_density, true, log_alpha};
  }
  return {current, current_log_density, false, log_alpha};
}

template <LogDensity Target>
MhOutcome mh_step(const Target& target, const MapResult& map, double beta,
                  const ParamVector& current, std::mt19937_64& rng) {
  return mh_step(target, map, beta, current, target.log_density(current), rng);
}

struct ChainRecord {
  std::vector<ParamVector> samples;
  std::vector<double> log_densities;  // parallel to samples; may be empty
  std::int64_t acceptance_count = 0;
  std::int64_t proposal_count = 0;
  std::uint64_t seed = 0;
  double beta = kDefaultBeta;
  int thinning = kDefaultThinning;
  std::optional<EnergyWindow> window;

  double acceptance_rate() const {
    return proposal_count == 0 ? 0.0 : static_cast<double>(acceptance_count) / proposal_count;
  }
};

struct ChainConfig {
  double beta = kDefaultBeta;
  int n_chains = 4;
  // MH steps per chain; every `thinning`-th state is stored.
  std::int64_t n_steps = 10000;
  int thinning = kDefaultThinning;
  std::vector<std::uint64_t> seeds;  // defaults to 0 .. n_chains-1

  void validate() const;
  std::uint64_t seed_for(int chain) const;
};

template <LogDensity Target>
ChainRecord run_chain(const Target& target, const MapResult& map, const ChainConfig& config,
                      int chain) {
  ChainRecord rec;
  rec.seed = config.seed_for(chain);
  rec.beta = config.beta;
  rec.thinning = config.thinning;
  std::mt19937_64 rng(rec.seed);
  ParamVector x = gaussian_draw(map, rng);
  double lp = target.log_density(x);
  rec.samples.reserve(static_cast<std::size_t>(config.n_steps / config.thinning));
  for (std::int64_t step = 1; step <= config.n_steps; ++step) {
    MhOutcome out = mh_step(target, map, config.beta, x, lp, rng);
    ++rec.proposal_count;
    if (out.accepted) {
      ++rec.acceptance_count;
      x = std::move(out.next);
      lp = out.log_density;
    }
    if (step % config.thinning == 0) {
      rec.samples.push_back(x);
      rec.log_densities.push_back(lp);
    }
  }
  return rec;
}

/// Independent chains, one thread each; chain i starts from a draw of
/// N(x_map, H^-1) seeded with config.seed_for(i).
template <LogDensity Target>
std::vector<ChainRecord> run_chains(const Target& target, const MapResult& map,
                                    const ChainConfig& config) {
  config.validate();
  std::vector<ChainRecord> records(config.n_chains);
  {
    std::vector<std::jthread> workers;
    workers.reserve(config.n_chains);
    for (int i = 0; i < config.n_chains; ++i) {
      workers.emplace_back([&, i] { records[i] = run_chain(target, map, config, i); });
    }
  }
  return records;
}

std::vector<ChainRecord> run_chains(const PosteriorModel& model, const MapResult& map,
                                    const ChainConfig& config);

struct BetaTuning {
  double beta = kDefaultBeta;
  double acceptance = 0.0;
};

/// Adapts log(beta) by stochastic approximation along one pilot chain that
/// starts like run_chain, from a draw of N(x_map, H^-1). The chain drifts
/// away from the mode for a long time, so acceptance measured at x_map alone
/// overstates it. After pilot_steps adaptive steps, beta is frozen and the
/// chain continues for pilot_steps more; their acceptance is reported.
template <LogDensity Target>
BetaTuning tune_beta(const Target& target, const MapResult& map, double target_acceptance,
                     std::int64_t pilot_steps, std::uint64_t seed) {
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
    throw InvalidArgument("target acceptance must lie in (0, 1)");
  }
  if (pilot_steps < 1) throw InvalidArgument("pilot_steps must be positive");
  const double log_lo = std::log(1e-4);
  std::mt19937_64 rng(seed);
  ParamVector x = gaussian_draw(map, rng);
  double lp = target.log_density(x);
  double log_beta = std::log(kDefaultBeta);
  auto step = [&](double beta) {
    MhOutcome out = mh_step(target, map, beta, x, lp, rng);
    const bool accepted = out.accepted;
    const double prob = std::isnan(out.log_alpha) ? 0.0 : std::exp(std::min(0.0, out.log_alpha));
    if (accepted) {
      x = std::move(out.next);
      lp = out.log_density;
    }
    return std::pair{accepted, prob};
  };
  for (std::int64_t t = 0; t < pilot_steps; ++t) {
    const double prob = step(std::exp(log_beta)).second;
    const double gain = 1.0 / std::pow(1.0 + t / 100.0, 0.6);
    log_beta = std::clamp(log_beta + gain * (prob - target_acceptance), log_lo, 0.0);
  }
  const double beta = std::exp(log_beta);
  std::int64_t accepted = 0;
  for (std::int64_t t = 0; t < pilot_steps; ++t) accepted += step(beta).first ? 1 : 0;
  return {beta, static_cast<double>(accepted) / static_cast<double>(pilot_steps)};
}

}  // namespace fetomo
