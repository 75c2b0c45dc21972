#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "fetomo/bayes.hpp"
#include "fetomo/ladder.hpp"

namespace fetomo {

// Burn-in in pre-thinning MH steps.
inline constexpr std::int64_t kDefaultBurnIn = 20000;

using Series = std::vector<double>;

/// Potential scale reduction sqrt((n-1)/n + B/(n W)) over equal-length chains.
double gelman_rubin(std::span<const Series> chains);

/// Biased (divide-by-n) normalized autocorrelation for lags 0..max_lag.
std::vector<double> autocorrelation(std::span<const double> series, int max_lag);

struct PosteriorSummary {
  DensityMatrix mean_density;
  RMatrix std_real;
  RMatrix std_imag;
  // name -> one series per chain, over the retained samples.
  std::map<std::string, std::vector<Series>> scalar_traces;
  std::size_t retained = 0;
};

/// Maps retained samples (after dropping `burn_in` pre-thinning steps) through
/// param_to_density. Traces: "zero_loss" (<0|rho|0>), "purity", and
/// "log_posterior" when every chain carries log densities.
PosteriorSummary posterior_summary(std::span<const ChainRecord> chains, std::int64_t burn_in);

/// Per-chain series of a named functional of the retained densities. Names:
/// "zero_loss", "purity", "re(N,M)", "im(N,M)", "log_posterior".
std::vector<Series> functional_series(std::span<const ChainRecord> chains, std::int64_t burn_in,
                                      const std::string& name);

/// R-hat for every density-matrix entry ("re(N,M)", "im(N,M)" for N >= M;
/// identically-zero imaginary diagonals are skipped) and every scalar trace.
/// Chains are cut to the shortest retained length.
std::map<std::string, double> gelman_rubin_map(std::span<const ChainRecord> chains,
                                               std::int64_t burn_in);

}  // namespace fetomo
