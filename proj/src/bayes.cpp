#include "fetomo/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fetomo {

int param_dimension(int d) { return 2 * d * d; }

CMatrix param_matrix(const ParamVector& x, int d) {
  if (x.size() != param_dimension(d)) {
    throw DimensionError("parameter vector has length " + std::to_string(x.size()) +
                         ", expected " + std::to_string(param_dimension(d)));
  }
  CMatrix a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const int k = 2 * (i * d + j);
      a(i, j) = Complex(x[k], x[k + 1]);
    }
  }
  return a;
}

ParamVector matrix_param(const CMatrix& a) {
  const auto d = static_cast<int>(a.rows());
  ParamVector x(param_dimension(d));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const int k = 2 * (i * d + j);
      x[k] = a(i, j).real();
      x[k + 1] = a(i, j).imag();
    }
  }
  return x;
}

DensityMatrix param_to_density(const ParamVector& x, const EnergyWindow& window) {
  const CMatrix a = param_matrix(x, window.dim());
  if (!a.allFinite()) throw InvalidArgument("parameter vector has non-finite entries");
  if (!(a.squaredNorm() > 0.0)) throw DegenerateInput("zero parameter vector");
  return trusted_density(window, a * a.adjoint());
}

ParamVector density_to_param(const DensityMatrix& rho, double radius) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho.matrix());
  const RVector s = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const CMatrix root = eig.eigenvectors() * s.asDiagonal() * eig.eigenvectors().adjoint();
  return matrix_param(root * (radius / root.norm()));
}

struct PosteriorModel::Pieces {
  CMatrix a;
  double t = 0.0;
  CMatrix rho;
  RMatrix p;
  RMatrix weights;  // S / p on bins above the floor, else 0
  CMatrix r;
  double s = 0.0;  // Tr(R rho)
  CMatrix c;       // (R A - s A) / t
  double log_likelihood = 0.0;
};

PosteriorModel::PosteriorModel(Spectrogram data, EnergyWindow state_window, Prior prior)
    : data_(std::move(data)),
      ops_(data_.coupling_magnitude, data_.phases, data_.window, state_window),
      exponents_(data_.exponents()),
      prior_(prior),
      total_(exponents_.sum()) {
  if (!data_.total_per_phase && total_ > 0.0 && data_.rows_normalized(1e-6)) {
    throw InvalidArgument(
        "spectrogram rows are normalized frequencies; declare total_per_phase so the likelihood "
        "uses counts");
  }
}

PosteriorModel::Pieces PosteriorModel::evaluate(const ParamVector& x) const {
  Pieces q;
  const int d = window().dim();
  q.a = param_matrix(x, d);
  q.t = q.a.squaredNorm();
  if (!(q.t > 0.0)) throw DegenerateInput("zero parameter vector");
  q.rho = q.a * q.a.adjoint() / q.t;
  q.p = ops_.probabilities(q.rho);
  q.weights = RMatrix::Zero(q.p.rows(), q.p.cols());
  for (Eigen::Index i = 0; i < q.p.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.p.cols(); ++j) {
      const double e = exponents_(i, j);
      if (e == 0.0) continue;
      const double pij = q.p(i, j);
      if (pij > kProbabilityFloor) {
        q.weights(i, j) = e / pij;
        q.log_likelihood += e * std::log(pij);
      } else {
        q.log_likelihood += e * std::log(kProbabilityFloor);
      }
    }
  }
  return q;
}

double PosteriorModel::log_likelihood(const ParamVector& x) const {
  if (!has_data()) {
    param_matrix(x, window().dim());
    return 0.0;
  }
  return evaluate(x).log_likelihood;
}

double PosteriorModel::log_density(const ParamVector& x) const {
  const double prior = prior_ == Prior::StandardNormal ? -0.5 * x.squaredNorm() : 0.0;
  return log_likelihood(x) + prior;
}

ParamVector PosteriorModel::likelihood_gradient(const ParamVector& x) const {
  if (!has_data()) return ParamVector::Zero(x.size());
  Pieces q = evaluate(x);
  q.r = ops_.weighted_projector_sum(q.weights);
  q.s = (q.r * q.rho).trace().real();
  q.c = (q.r * q.a - q.s * q.a) / q.t;
  return 2.0 * matrix_param(q.c);
}

ParamVector PosteriorModel::gradient(const ParamVector& x) const {
  ParamVector g = likelihood_gradient(x);
  if (prior_ == Prior::StandardNormal) g -= x;
  return g;
}

RMatrix PosteriorModel::likelihood_hessian(const ParamVector& x) const {
  const int n = static_cast<int>(x.size());
  RMatrix h = RMatrix::Zero(n, n);
  if (!has_data()) return h;
  Pieces q = evaluate(x);
  q.r = ops_.weighted_projector_sum(q.weights);
  q.s = (q.r * q.rho).trace().real();
  q.c = (q.r * q.a - q.s * q.a) / q.t;

  // d w / d p on unfloored bins: -S / p^2 = -w / p.
  RMatrix dw_dp = RMatrix::Zero(q.p.rows(), q.p.cols());
  for (Eigen::Index i = 0; i < q.p.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.p.cols(); ++j) {
      if (q.weights(i, j) != 0.0) dw_dp(i, j) = -q.weights(i, j) / q.p(i, j);
    }
  }

  const int d = window().dim();
  for (int k = 0; k < n; ++k) {
    const int entry = k / 2;
    CMatrix delta = CMatrix::Zero(d, d);
    delta(entry / d, entry % d) = (k % 2 == 0) ? Complex(1.0, 0.0) : Complex(0.0, 1.0);

    const double dt = 2.0 * (q.a.conjugate().cwiseProduct(delta)).sum().real();
    const CMatrix dm = delta * q.a.adjoint() + q.a * delta.adjoint();
    const CMatrix drho = dm / q.t - q.rho * (dt / q.t);
    const RMatrix dp = ops_.probabilities(drho);
    const RMatrix dw = dw_dp.cwiseProduct(dp);
    const CMatrix dr = ops_.weighted_projector_sum(dw);
    const double ds = (dr * q.rho).trace().real() + (q.r * drho).trace().real();
    const CMatrix dc = (dr * q.a + q.r * delta - ds * q.a - q.s * delta) / q.t - q.c * (dt / q.t);
    h.col(k) = 2.0 * matrix_param(dc);
  }
  return h;
}

RMatrix PosteriorModel::hessian(const ParamVector& x) const {
  RMatrix h = likelihood_hessian(x);
  if (prior_ == Prior::StandardNormal) h.diagonal().array() -= 1.0;
  return h;
}

double log_posterior(const PosteriorModel& model, const ParamVector& x) {
  return model.log_density(x);
}

ParamVector grad_log_posterior(const PosteriorModel& model, const ParamVector& x) {
  return model.gradient(x);
}

Curvature Curvature::from(const RMatrix& negative_hessian) {
  if (negative_hessian.rows() != negative_hessian.cols()) {
    throw DimensionError("curvature matrix is not square");
  }
  if (!negative_hessian.allFinite()) throw CurvatureError("curvature has non-finite entries");
  Curvature c;
  c.hessian = 0.5 * (negative_hessian + negative_hessian.transpose());
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(c.hessian, Eigen::EigenvaluesOnly);
  const double largest = eig.eigenvalues().maxCoeff();
  const double smallest = eig.eigenvalues().minCoeff();
  if (!(largest > 0.0)) throw CurvatureError("curvature has no positive eigenvalue");
  const double floor = kHessianJitter * largest;
  if (smallest < floor) {
    c.jitter = floor - smallest;
    c.hessian.diagonal().array() += c.jitter;
  }
  Eigen::LLT<RMatrix> llt(c.hessian);
  if (llt.info() != Eigen::Success) throw CurvatureError("Cholesky factorization failed");
  c.cholesky = llt.matrixL();
  return c;
}

ParamVector default_init(int dimension, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  ParamVector x(dimension);
  for (int i = 0; i < dimension; ++i) x[i] = normal(rng);
  return x;
}

Curvature hessian_at_map(const PosteriorModel& model, const ParamVector& x_map) {
  return Curvature::from(-model.hessian(x_map));
}

namespace {

double inf_norm(const ParamVector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Plain gradient ascent on the full log posterior with Barzilai-Borwein step
// proposals and Armijo backtracking.
MapResult ascend_cartesian(const PosteriorModel& model, ParamVector x, const MapOptions& opt) {
  MapResult res;
  double f = model.log_density(x);
  ParamVector g = model.gradient(x);
  double step = 1.0;
  ParamVector x_prev, g_prev;
  res.converged = false;
  for (int k = 0; k < opt.max_steps; ++k) {
    if (inf_norm(g) < opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    if (k > 0) {
      const ParamVector s = x - x_prev;
      const ParamVector y = g_prev - g;
      const double sy = s.dot(y);
      step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * step;
    }
    const double g2 = g.squaredNorm();
    double alpha = step;
    ParamVector x_new;
    double f_new = f;
    for (int bt = 0; bt < 60; ++bt) {
      x_new = x + alpha * g;
      f_new = model.log_density(x_new);
      if (f_new >= f + 1e-4 * alpha * g2) break;
      alpha *= 0.5;
    }
    if (!(f_new >= f)) break;
    x_prev = x;
    g_prev = g;
    x = x_new;
    f = f_new;
    g = model.gradient(x);
    res.steps = k + 1;
  }
  res.x_map = std::move(x);
  res.log_posterior_at_map = f;
  res.gradient_norm = inf_norm(g);
  return res;
}

ParamVector tangential(const ParamVector& g, const ParamVector& x) {
  return g - (g.dot(x) / x.squaredNorm()) * x;
}

// Maximizes the likelihood over directions at fixed radius. Gradient ascent
// first; Newton steps once that stalls or the step budget is spent. Near the
// optimum likelihood differences drop below float64 resolution, so Newton
// steps are also accepted when the value is unchanged within round-off and
// the gradient shrinks.
MapResult ascend_polar(const PosteriorModel& model, ParamVector x, double radius,
                       const MapOptions& opt) {
  MapResult res;
  res.converged = false;
  auto retract = [radius](const ParamVector& v) -> ParamVector { return v * (radius / v.norm()); };
  auto tangent_gradient = [&](const ParamVector& v) { return tangential(model.likelihood_gradient(v), v); };
  x = retract(x);
  double f = model.log_likelihood(x);
  ParamVector g = tangent_gradient(x);
  ParamVector x_prev, g_prev;
  double step = 1.0 / std::max(1.0, g.norm());
  bool newton = false;
  for (int k = 0; k < opt.max_steps; ++k) {
    if (inf_norm(g) < opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    newton = newton || k >= opt.gradient_steps;
    const double noise = 1e-11 * std::max(1.0, std::abs(f));
    ParamVector x_new, g_new;
    double f_new = f;
    bool accepted = false;
    if (!newton) {
      if (k > 0) {
        const ParamVector s = x - x_prev;
        const ParamVector y = g_prev - g;
        const double sy = s.dot(y);
        step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * step;
      }
      double alpha = step;
      for (int bt = 0; bt < 60 && !accepted; ++bt) {
        x_new = retract(x + alpha * g);
        f_new = model.log_likelihood(x_new);
        accepted = f_new >= f + 1e-4 * alpha * g.squaredNorm();
        alpha *= 0.5;
      }
      if (!accepted) {
        newton = true;
        --k;
        continue;
      }
      g_new = tangent_gradient(x_new);
    } else {
      const Curvature curv = Curvature::from(-model.likelihood_hessian(x));
      ParamVector direction = tangential(curv.hessian.ldlt().solve(g), x);
      if (!(g.dot(direction) > 0.0)) direction = g / std::max(1.0, g.norm());
      double alpha = 1.0;
      for (int bt = 0; bt < 40 && !accepted; ++bt) {
        x_new = retract(x + alpha * direction);
        f_new = model.log_likelihood(x_new);
        if (f_new >= f + 1e-4 * alpha * g.dot(direction)) {
          g_new = tangent_gradient(x_new);
          accepted = true;
        } else if (f_new >= f - noise) {
          g_new = tangent_gradient(x_new);
          accepted = g_new.norm() < g.norm();
        }
        alpha *= 0.5;
      }
      if (!accepted) break;
    }
    x_prev = x;
    g_prev = g;
    x = std::move(x_new);
    f = f_new;
    g = std::move(g_new);
    res.steps = k + 1;
  }
  res.x_map = std::move(x);
  res.log_posterior_at_map = model.log_density(res.x_map);
  res.gradient_norm = inf_norm(g);
  return res;
}

}  // namespace

MapResult find_map(const PosteriorModel& model, const ParamVector& init, const MapOptions& options) {
  if (init.size() != model.dimension()) throw DimensionError("init has the wrong dimension");
  if (!init.allFinite()) throw InvalidArgument("init has non-finite entries");
  MapResult res;
  if (!model.has_data()) {
    res = ascend_cartesian(model, init, options);
  } else {
    if (!(init.squaredNorm() > 0.0)) throw DegenerateInput("zero init vector");
    const double radius = model.prior() == Prior::StandardNormal
                              ? std::sqrt(static_cast<double>(model.dimension() - 1))
                              : init.norm();
    res = ascend_polar(model, init, radius, options);
  }
  if (!res.converged) {
    warn("MAP search stopped after " + std::to_string(res.steps) +
         " steps with gradient norm " + std::to_string(res.gradient_norm));
  }
  res.curvature = hessian_at_map(model, res.x_map);
  return res;
}

GaussianTarget::GaussianTarget(ParamVector mean, RMatrix precision)
    : mean_(std::move(mean)), precision_(std::move(precision)) {
  if (precision_.rows() != mean_.size() || precision_.cols() != mean_.size()) {
    throw DimensionError("precision does not match mean");
  }
}

double GaussianTarget::log_density(const ParamVector& x) const {
  const ParamVector r = x - mean_;
  return -0.5 * r.dot(precision_ * r);
}

namespace detail {
void check_beta(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw InvalidArgument("beta must lie in (0, 1]");
}
}  // namespace detail

namespace {

ParamVector standard_normal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  ParamVector z(n);
  for (int i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

// y ~ N(0, H^-1) from z ~ N(0, I): solve L^T y = z.
ParamVector precision_solve(const MapResult& map, const ParamVector& z) {
  return map.curvature.cholesky.transpose().triangularView<Eigen::Upper>().solve(z);
}

}  // namespace

ParamVector pcn_propose(const ParamVector& current, const MapResult& map, double beta,
                        std::mt19937_64& rng) {
  detail::check_beta(beta);
  const ParamVector z = standard_normal(static_cast<int>(current.size()), rng);
  return map.x_map + std::sqrt(1.0 - beta * beta) * (current - map.x_map) +
         beta * precision_solve(map, z);
}

double pcn_log_density(const ParamVector& to, const ParamVector& from, const MapResult& map,
                       double beta) {
  const ParamVector r = to - map.x_map - std::sqrt(1.0 - beta * beta) * (from - map.x_map);
  const ParamVector lr = map.curvature.cholesky.transpose() * r;
  return -0.5 * lr.squaredNorm() / (beta * beta);
}

double mh_log_alpha(double proposal_log_density, double current_log_density,
                    const ParamVector& proposal, const ParamVector& current, const MapResult& map,
                    double beta) {
  if (!std::isfinite(proposal_log_density)) return -std::numeric_limits<double>::infinity();
  const double log_ratio = proposal_log_density - current_log_density +
                           pcn_log_density(current, proposal, map, beta) -
                           pcn_log_density(proposal, current, map, beta);
  if (std::isnan(log_ratio)) return -std::numeric_limits<double>::infinity();
  return std::min(0.0, log_ratio);
}

ParamVector gaussian_draw(const MapResult& map, std::mt19937_64& rng) {
  return map.x_map + precision_solve(map, standard_normal(static_cast<int>(map.x_map.size()), rng));
}

void ChainConfig::validate() const {
  detail::check_beta(beta);
  if (n_chains < 1) throw InvalidArgument("at least one chain is required");
  if (n_steps < 1) throw InvalidArgument("chains need at least one step");
  if (thinning < 1) throw InvalidArgument("thinning must be positive");
  if (!seeds.empty()) {
    if (static_cast<int>(seeds.size()) != n_chains) {
      throw InvalidArgument("need exactly one seed per chain");
    }
    std::vector<std::uint64_t> sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw InvalidArgument("chain seeds must be distinct");
    }
  }
}

std::uint64_t ChainConfig::seed_for(int chain) const {
  return seeds.empty() ? static_cast<std::uint64_t>(chain) : seeds[chain];
}

std::vector<ChainRecord> run_chains(const PosteriorModel& model, const MapResult& map,
                                    const ChainConfig& config) {
  auto records = run_chains<PosteriorModel>(model, map, config);
  for (auto& r : records) r.window = model.window();
  return records;
}

}  // namespace fetomo
