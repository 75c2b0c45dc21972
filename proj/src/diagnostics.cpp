#include "fetomo/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <regex>

#include "fetomo/error.hpp"

namespace fetomo {

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::size_t first_retained(const ChainRecord& c, std::int64_t burn_in) {
  return static_cast<std::size_t>(burn_in / c.thinning);
}

void check_burn_in(std::span<const ChainRecord> chains, std::int64_t burn_in) {
  if (chains.empty()) throw InvalidArgument("no chains given");
  if (burn_in < 0) throw InvalidArgument("burn-in must be non-negative");
  for (const auto& c : chains) {
    const auto length = static_cast<std::int64_t>(c.samples.size()) * c.thinning;
    if (burn_in >= length) {
      throw InvalidArgument("burn-in of " + std::to_string(burn_in) +
                            " steps leaves no samples in a chain of " + std::to_string(length));
    }
    if (!c.window) throw InvalidArgument("chain has no energy window attached");
  }
}

// Densities of the retained samples, chain by chain.
std::vector<std::vector<CMatrix>> retained_densities(std::span<const ChainRecord> chains,
                                                     std::int64_t burn_in) {
  check_burn_in(chains, burn_in);
  std::vector<std::vector<CMatrix>> out;
  out.reserve(chains.size());
  for (const auto& c : chains) {
    std::vector<CMatrix> rhos;
    for (std::size_t i = first_retained(c, burn_in); i < c.samples.size(); ++i) {
      rhos.push_back(param_to_density(c.samples[i], *c.window).matrix());
    }
    out.push_back(std::move(rhos));
  }
  return out;
}

std::string entry_name(const char* part, int n, int m) {
  return std::string(part) + "(" + std::to_string(n) + "," + std::to_string(m) + ")";
}

}  // namespace

double gelman_rubin(std::span<const Series> chains) {
  if (chains.size() < 2) throw InvalidArgument("Gelman-Rubin needs at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 10) throw InvalidArgument("Gelman-Rubin needs at least 10 samples per chain");
  for (const auto& c : chains) {
    if (c.size() != n) throw InvalidArgument("chains must have equal length");
  }
  const auto m = static_cast<double>(chains.size());
  const auto nd = static_cast<double>(n);
  std::vector<double> means;
  double within = 0.0;
  for (const auto& c : chains) {
    const double mu = mean_of(c);
    means.push_back(mu);
    double ss = 0.0;
    for (double v : c) ss += (v - mu) * (v - mu);
    within += ss / (nd - 1.0);
  }
  within /= m;
  if (!(within > 0.0)) throw UndefinedStatistic("zero within-chain variance");
  const double grand = mean_of(means);
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= nd / (m - 1.0);
  return std::sqrt((nd - 1.0) / nd + between / (nd * within));
}

std::vector<double> autocorrelation(std::span<const double> series, int max_lag) {
  if (max_lag < 0) throw InvalidArgument("max_lag must be non-negative");
  const std::size_t n = series.size();
  if (n <= 2 * static_cast<std::size_t>(max_lag)) {
    throw InvalidArgument("series too short for the requested lag");
  }
  const double mu = mean_of(series);
  std::vector<double> centred(series.begin(), series.end());
  for (auto& v : centred) v -= mu;
  double c0 = 0.0;
  for (double v : centred) c0 += v * v;
  if (!(c0 > 0.0)) throw UndefinedStatistic("autocorrelation of a constant series");
  std::vector<double> acf(max_lag + 1);
  for (int k = 0; k <= max_lag; ++k) {
    double ck = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) ck += centred[i] * centred[i + k];
    acf[k] = ck / c0;
  }
  return acf;
}

PosteriorSummary posterior_summary(std::span<const ChainRecord> chains, std::int64_t burn_in) {
  const auto rhos = retained_densities(chains, burn_in);
  const EnergyWindow window = *chains.front().window;
  const int d = window.dim();
  CMatrix sum = CMatrix::Zero(d, d);
  std::size_t count = 0;
  for (const auto& chain : rhos) {
    for (const auto& r : chain) {
      sum += r;
      ++count;
    }
  }
  if (count == 0) throw InvalidArgument("no retained samples");
  const auto nc = static_cast<double>(count);
  const CMatrix mean = sum / nc;
  RMatrix var_re = RMatrix::Zero(d, d);
  RMatrix var_im = RMatrix::Zero(d, d);
  for (const auto& chain : rhos) {
    for (const auto& r : chain) {
      var_re += (r - mean).real().cwiseAbs2();
      var_im += (r - mean).imag().cwiseAbs2();
    }
  }
  var_re /= nc;
  var_im /= nc;

  PosteriorSummary out{trusted_density(window, mean), var_re.cwiseSqrt(), var_im.cwiseSqrt(), {},
                       count};
  const bool has_zero = window.contains(0);
  for (const char* name : {"zero_loss", "purity"}) {
    if (std::string(name) == "zero_loss" && !has_zero) continue;
    out.scalar_traces[name] = functional_series(chains, burn_in, name);
  }
  const bool all_lp = std::all_of(chains.begin(), chains.end(), [](const ChainRecord& c) {
    return c.log_densities.size() == c.samples.size();
  });
  if (all_lp) out.scalar_traces["log_posterior"] = functional_series(chains, burn_in, "log_posterior");
  return out;
}

std::vector<Series> functional_series(std::span<const ChainRecord> chains, std::int64_t burn_in,
                                      const std::string& name) {
  check_burn_in(chains, burn_in);
  std::vector<Series> out;
  if (name == "log_posterior") {
    for (const auto& c : chains) {
      if (c.log_densities.size() != c.samples.size()) {
        throw InvalidArgument("chain carries no log densities");
      }
      out.emplace_back(c.log_densities.begin() + first_retained(c, burn_in), c.log_densities.end());
    }
    return out;
  }

  const EnergyWindow window = *chains.front().window;
  std::function<double(const CMatrix&)> f;
  static const std::regex entry_re(R"((re|im)\((-?\d+),(-?\d+)\))");
  std::smatch match;
  if (name == "zero_loss") {
    if (!window.contains(0)) throw InvalidArgument("window has no zero-loss index");
    const int o = window.offset(0);
    f = [o](const CMatrix& r) { return r(o, o).real(); };
  } else if (name == "purity") {
    f = [](const CMatrix& r) { return (r * r).trace().real(); };
  } else if (std::regex_match(name, match, entry_re)) {
    const int n = std::stoi(match[2]);
    const int m = std::stoi(match[3]);
    if (!window.contains(n) || !window.contains(m)) {
      throw InvalidArgument("entry " + name + " outside the chain window");
    }
    const int a = window.offset(n);
    const int b = window.offset(m);
    if (match[1] == "re") {
      f = [a, b](const CMatrix& r) { return r(a, b).real(); };
    } else {
      f = [a, b](const CMatrix& r) { return r(a, b).imag(); };
    }
  } else {
    throw InvalidArgument("unknown functional '" + name + "'");
  }
  for (const auto& chain : retained_densities(chains, burn_in)) {
    Series s;
    s.reserve(chain.size());
    for (const auto& r : chain) s.push_back(f(r));
    out.push_back(std::move(s));
  }
  return out;
}

std::map<std::string, double> gelman_rubin_map(std::span<const ChainRecord> chains,
                                               std::int64_t burn_in) {
  const auto rhos = retained_densities(chains, burn_in);
  std::size_t n = rhos.front().size();
  for (const auto& c : rhos) n = std::min(n, c.size());
  const EnergyWindow window = *chains.front().window;
  const int d = window.dim();

  std::map<std::string, double> out;
  auto add = [&](const std::string& name, auto&& extract) {
    std::vector<Series> series;
    for (const auto& c : rhos) {
      Series s(n);
      for (std::size_t i = 0; i < n; ++i) s[i] = extract(c[i]);
      series.push_back(std::move(s));
    }
    out[name] = gelman_rubin(series);
  };
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b <= a; ++b) {
      add(entry_name("re", window.label(a), window.label(b)),
          [a, b](const CMatrix& r) { return r(a, b).real(); });
      if (a != b) {
        add(entry_name("im", window.label(a), window.label(b)),
            [a, b](const CMatrix& r) { return r(a, b).imag(); });
      }
    }
  }
  if (window.contains(0)) {
    const int o = window.offset(0);
    add("zero_loss", [o](const CMatrix& r) { return r(o, o).real(); });
  }
  add("purity", [](const CMatrix& r) { return (r * r).trace().real(); });
  const bool all_lp = std::all_of(chains.begin(), chains.end(), [](const ChainRecord& c) {
    return c.log_densities.size() == c.samples.size();
  });
  if (all_lp) {
    std::vector<Series> series;
    for (const auto& c : chains) {
      const auto first = c.log_densities.begin() + first_retained(c, burn_in);
      series.emplace_back(first, first + n);
    }
    out["log_posterior"] = gelman_rubin(series);
  }
  return out;
}

}  // namespace fetomo
