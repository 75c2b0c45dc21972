// Command-line front end: simulation, reconstruction, sampling, diagnostics
// and phase-space analysis on the JSON/binary file formats of fetomo::io.

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fetomo/bayes.hpp"
#include "fetomo/diagnostics.hpp"
#include "fetomo/error.hpp"
#include "fetomo/forward_model.hpp"
#include "fetomo/io.hpp"
#include "fetomo/mle.hpp"
#include "fetomo/phase_space.hpp"

using namespace fetomo;
namespace fs = std::filesystem;
using io::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> split_numbers(const std::string& text, std::size_t count, const char* flag) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string piece = text.substr(pos, comma - pos);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(piece, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (piece.empty() || used != piece.size()) throw UsageError(std::string(flag) + ": cannot parse '" + text + "'");
    out.push_back(v);
    pos = comma + 1;
  }
  if (out.size() != count) throw UsageError(std::string(flag) + ": expected " + std::to_string(count) + " comma-separated values");
  return out;
}

EnergyWindow parse_window(const std::string& text) {
  const auto v = split_numbers(text, 2, "--window");
  if (v[0] != static_cast<int>(v[0]) || v[1] != static_cast<int>(v[1])) throw UsageError("--window: bounds must be integers");
  return EnergyWindow(static_cast<int>(v[0]), static_cast<int>(v[1]));
}

void emit(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    io::write_json(out, j);
  }
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string state, pinem_g, forward_params, window, out;
  double g_abs = 0.0;
  int phases = kDefaultPhaseCount;
  std::int64_t counts = 0;
  std::uint64_t seed = 0;
};

int simulate(const SimulateArgs& a) {
  const int sources = !a.state.empty() + !a.pinem_g.empty() + !a.forward_params.empty();
  if (sources != 1) throw UsageError("simulate needs exactly one of --state, --pinem-g, --forward-params");
  std::optional<DensityMatrix> rho;
  std::optional<EnergyWindow> data_window;
  if (!a.state.empty()) {
    rho = io::read_density(a.state);
    if (!a.window.empty()) data_window = parse_window(a.window);
  } else {
    if (a.window.empty()) throw UsageError("--window is required with --pinem-g and --forward-params");
    const EnergyWindow w = parse_window(a.window);
    if (!a.pinem_g.empty()) {
      const auto g = split_numbers(a.pinem_g, 2, "--pinem-g");
      rho = pinem_state(Coupling(std::hypot(g[0], g[1]), std::atan2(g[1], g[0])), w);
    } else {
      rho = model_density(io::forward_params_from_json(io::read_json(a.forward_params)), w);
    }
  }
  const PhaseGrid grid = PhaseGrid::uniform(a.phases);
  Spectrogram s = data_window ? simulate_spectrogram(*rho, a.g_abs, grid, *data_window)
                              : simulate_spectrogram(*rho, a.g_abs, grid);
  if (a.counts > 0) s = sample_counts(s, a.counts, a.seed);
  io::write_spectrogram(a.out, s);
  return kOk;
}

// --- reconstruct-mle ----------------------------------------------------------

struct MleArgs {
  std::string spectrogram, window, out;
  MleConfig config;
};

int reconstruct_mle(MleArgs a) {
  const Spectrogram data = io::read_spectrogram(a.spectrogram);
  if (!a.window.empty()) a.config.window = parse_window(a.window);
  const MleResult r = mle_reconstruct(data, a.config);
  json j = io::density_to_json(r.rho);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["log_likelihood"] = r.log_likelihood_trace.back();
  j["dilution"] = r.final_dilution;
  io::write_json(a.out, j);
  return kOk;
}

// --- reconstruct-bayes ----------------------------------------------------------

struct MapArgs {
  std::string spectrogram, window, out;
  std::uint64_t seed = 0;
};

int bayes_map(const MapArgs& a) {
  const Spectrogram data = io::read_spectrogram(a.spectrogram);
  const EnergyWindow w = a.window.empty() ? data.window : parse_window(a.window);
  const PosteriorModel model(data, w);
  const MapResult map = find_map(model, default_init(model.dimension(), a.seed));
  io::write_json(a.out, io::map_to_json({data, w, map}));
  if (!map.converged) {
    std::cerr << "warning: MAP search stopped with gradient norm " << map.gradient_norm << '\n';
  }
  return kOk;
}

struct SampleArgs {
  std::string map, seeds, out_dir;
  double beta = kDefaultBeta;
  double tune = 0.0;
  std::int64_t tune_steps = 20000;
  int chains = 4;
  std::int64_t samples = 1000;
  int thinning = kDefaultThinning;
};

int bayes_sample(const SampleArgs& a) {
  const io::MapFile mf = io::map_from_json(io::read_json(a.map));
  const PosteriorModel model(mf.data, mf.window);
  ChainConfig cfg;
  cfg.n_chains = a.chains;
  cfg.thinning = a.thinning;
  cfg.n_steps = a.samples * a.thinning;
  cfg.beta = a.beta;
  if (!a.seeds.empty()) {
    for (double s : split_numbers(a.seeds, static_cast<std::size_t>(a.chains), "--seeds")) {
      if (s < 0 || s != static_cast<double>(static_cast<std::uint64_t>(s))) throw UsageError("--seeds: need non-negative integers");
      cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  if (a.tune > 0.0) {
    const auto tuned = tune_beta(model, mf.map, a.tune, a.tune_steps, cfg.seed_for(0));
    cfg.beta = tuned.beta;
    std::cerr << "tuned beta " << tuned.beta << " (pilot acceptance " << tuned.acceptance << ")\n";
  }
  const auto chains = run_chains(model, mf.map, cfg);
  fs::create_directories(a.out_dir);
  for (std::size_t i = 0; i < chains.size(); ++i) {
    io::write_chain(fs::path(a.out_dir) / ("chain_" + std::to_string(i) + ".json"), chains[i]);
    std::cerr << "chain " << i << ": acceptance " << chains[i].acceptance_rate() << '\n';
  }
  return kOk;
}

struct SummarizeArgs {
  std::string chains, out;
  std::int64_t burn_in = 0;
};

int bayes_summarize(const SummarizeArgs& a) {
  const auto chains = io::read_chain_dir(a.chains);
  const auto summary = posterior_summary(chains, a.burn_in);
  std::map<std::string, double> rhat;
  if (chains.size() >= 2) rhat = gelman_rubin_map(chains, a.burn_in);
  emit(io::summary_to_json(summary, rhat), a.out);
  return kOk;
}

// --- diagnose -------------------------------------------------------------------

struct DiagnoseArgs {
  std::string chains, functional = "zero_loss", out;
  bool gelman_rubin = false;
  bool autocorrelation = false;
  int max_lag = 50;
  std::int64_t burn_in = 0;
};

int diagnose(const DiagnoseArgs& a) {
  if (!a.gelman_rubin && !a.autocorrelation) throw UsageError("diagnose needs --gelman-rubin and/or --autocorrelation");
  const auto chains = io::read_chain_dir(a.chains);
  const auto series = functional_series(chains, a.burn_in, a.functional);
  json j;
  j["functional"] = a.functional;
  if (a.gelman_rubin) j["gelman_rubin"] = gelman_rubin(series);
  if (a.autocorrelation) {
    json per_chain = json::array();
    for (const auto& s : series) per_chain.push_back(autocorrelation(s, a.max_lag));
    j["autocorrelation"] = per_chain;
  }
  emit(j, a.out);
  return kOk;
}

// --- analyze --------------------------------------------------------------------

struct AnalyzeArgs {
  std::string state, out;
  bool wigner = false, temporal = false, fwhm = false, coherence = false;
  int grid = 1024;
  int n_max = 1;
};

int analyze(const AnalyzeArgs& a) {
  if (a.wigner + a.temporal + a.fwhm + a.coherence != 1) {
    throw UsageError("analyze needs exactly one of --wigner, --temporal, --fwhm, --coherence");
  }
  const DensityMatrix rho = io::read_density(a.state);
  const PositionGrid grid(a.grid);
  if ((a.wigner || a.temporal) && a.out.empty()) throw UsageError("--out is required for CSV output");
  if (a.wigner) {
    io::write_wigner_csv(a.out, fetomo::wigner(rho, grid));
  } else if (a.temporal) {
    io::write_temporal_csv(a.out, grid, temporal_density(rho, grid));
  } else if (a.fwhm) {
    emit(json{{"fwhm", fetomo::fwhm(temporal_density(rho, grid))}}, a.out);
  } else {
    json moments = json::array();
    int n = 1;
    for (const Complex& m : coherence_moments(rho, a.n_max)) {
      moments.push_back({{"n", n++}, {"re", m.real()}, {"im", m.imag()}, {"abs", std::abs(m)}});
    }
    emit(json{{"coherence", moments}}, a.out);
  }
  return kOk;
}

// --- fit-forward ----------------------------------------------------------------

struct FitArgs {
  std::string target, init, out;
  int restarts = 5;
  std::uint64_t seed = 0;
};

int fit_forward(const FitArgs& a) {
  const DensityMatrix target = io::read_density(a.target);
  const ForwardParams init = io::forward_params_from_json(io::read_json(a.init));
  FitOptions opt;
  opt.restarts = a.restarts;
  opt.seed = a.seed;
  const ForwardFit fit = fit_forward_model(target, init, opt);
  json j = io::forward_params_to_json(fit.params);
  j["frobenius_distance"] = fit.frobenius_distance;
  j["fidelity"] = fit.fidelity;
  j["converged"] = fit.converged;
  emit(j, a.out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free-electron quantum state tomography"};
  app.require_subcommand(1);
  int status = kOk;
  auto run = [&status](auto fn, auto& args) { return [fn, &args, &status] { status = fn(args); }; };

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Phase-swept spectrogram of a state");
  s->add_option("--state", sim.state, "density matrix file");
  s->add_option("--pinem-g", sim.pinem_g, "pure interaction state with coupling re,im");
  s->add_option("--forward-params", sim.forward_params, "forward-model parameter file");
  s->add_option("--g-abs", sim.g_abs, "coupling magnitude of the sweep")->required()->check(CLI::NonNegativeNumber);
  s->add_option("--phases", sim.phases, "number of uniform sweep phases")->check(CLI::PositiveNumber);
  s->add_option("--window", sim.window, "n_min,n_max (state window, or data window with --state)");
  s->add_option("--counts-per-phase", sim.counts, "electrons per phase; 0 writes probabilities")->check(CLI::NonNegativeNumber);
  s->add_option("--seed", sim.seed);
  s->add_option("--out", sim.out)->required();
  s->callback(run(simulate, sim));

  MleArgs mle;
  auto* m = app.add_subcommand("reconstruct-mle", "Maximum-likelihood reconstruction");
  m->add_option("--spectrogram", mle.spectrogram)->required();
  m->add_option("--max-iter", mle.config.max_iterations)->check(CLI::PositiveNumber);
  m->add_option("--tol", mle.config.tolerance)->check(CLI::PositiveNumber);
  m->add_option("--dilution", mle.config.dilution)->check(CLI::Range(0.0, 1.0));
  m->add_option("--window", mle.window, "reconstruction window n_min,n_max");
  m->add_option("--out", mle.out)->required();
  m->callback(run(reconstruct_mle, mle));

  auto* b = app.add_subcommand("reconstruct-bayes", "Bayesian reconstruction");
  b->require_subcommand(1);
  MapArgs map;
  auto* bm = b->add_subcommand("map", "Posterior mode and curvature");
  bm->add_option("--spectrogram", map.spectrogram)->required();
  bm->add_option("--window", map.window, "state window n_min,n_max");
  bm->add_option("--seed", map.seed);
  bm->add_option("--out-map", map.out)->required();
  bm->callback(run(bayes_map, map));

  SampleArgs smp;
  auto* bs = b->add_subcommand("sample", "pCN Metropolis-Hastings chains");
  bs->add_option("--map", smp.map)->required();
  bs->add_option("--beta", smp.beta)->check(CLI::Range(0.0, 1.0));
  bs->add_option("--tune", smp.tune, "tune beta towards this acceptance rate")->check(CLI::Range(0.0, 1.0));
  bs->add_option("--tune-steps", smp.tune_steps, "adaptive pilot length")->check(CLI::PositiveNumber);
  bs->add_option("--chains", smp.chains)->check(CLI::PositiveNumber);
  bs->add_option("--samples", smp.samples, "stored samples per chain")->check(CLI::PositiveNumber);
  bs->add_option("--thinning", smp.thinning)->check(CLI::PositiveNumber);
  bs->add_option("--seeds", smp.seeds, "comma-separated, one per chain");
  bs->add_option("--out-dir", smp.out_dir)->required();
  bs->callback(run(bayes_sample, smp));

  SummarizeArgs sum;
  auto* bz = b->add_subcommand("summarize", "Posterior mean, spread and R-hat");
  bz->add_option("--chains", sum.chains)->required();
  bz->add_option("--burn-in", sum.burn_in, "steps dropped before thinning")->check(CLI::NonNegativeNumber);
  bz->add_option("--out", sum.out);
  bz->callback(run(bayes_summarize, sum));

  DiagnoseArgs dg;
  auto* d = app.add_subcommand("diagnose", "Convergence diagnostics of one functional");
  d->add_option("--chains", dg.chains)->required();
  d->add_option("--functional", dg.functional, "zero_loss, purity, log_posterior, re(N,M), im(N,M)");
  d->add_flag("--gelman-rubin", dg.gelman_rubin);
  d->add_flag("--autocorrelation", dg.autocorrelation);
  d->add_option("--max-lag", dg.max_lag)->check(CLI::NonNegativeNumber);
  d->add_option("--burn-in", dg.burn_in)->check(CLI::NonNegativeNumber);
  d->add_option("--out", dg.out);
  d->callback(run(diagnose, dg));

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Phase-space quantities of a state");
  a->add_option("--state", an.state)->required();
  a->add_flag("--wigner", an.wigner);
  a->add_flag("--temporal", an.temporal);
  a->add_flag("--fwhm", an.fwhm);
  a->add_flag("--coherence", an.coherence);
  a->add_option("--grid", an.grid);
  a->add_option("--n-max", an.n_max)->check(CLI::PositiveNumber);
  a->add_option("--out", an.out);
  a->callback(run(analyze, an));

  FitArgs ft;
  auto* f = app.add_subcommand("fit-forward", "Fit the decoherence model to a state");
  f->add_option("--target", ft.target)->required();
  f->add_option("--init", ft.init)->required();
  f->add_option("--restarts", ft.restarts)->check(CLI::PositiveNumber);
  f->add_option("--seed", ft.seed);
  f->add_option("--out", ft.out);
  f->callback(run(fit_forward, ft));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return status;
}
