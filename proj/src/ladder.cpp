#include "fetomo/ladder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <iostream>
#include <mutex>
#include <string>

#include "fetomo/error.hpp"

namespace fetomo {

namespace {

std::mutex g_warning_mutex;
WarningHandler g_warning_handler;

// Power series converges without visible cancellation below this argument.
constexpr double kSeriesLimit = 6.0;

double bessel_series(int n, double x) {
  const double half = 0.5 * x;
  double term = 1.0;
  for (int k = 1; k <= n; ++k) term *= half / k;
  double sum = term;
  const double q = -half * half;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * (k + n));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

// Miller's downward recurrence normalized by J_0 + 2 sum J_2k = 1.
std::vector<double> bessel_miller(int n_max, double x) {
  const double top = std::max<double>(n_max, x);
  int start = static_cast<int>(top + 30.0 + std::sqrt(40.0 * top));
  start += start % 2;
  std::vector<double> out(n_max + 1, 0.0);
  double next = 0.0;  // J_{j+1}
  double cur = 1e-30;  // J_j
  double even_sum = 0.0;
  for (int j = start; j > 0; --j) {
    const double prev = (2.0 * j / x) * cur - next;  // J_{j-1}
    next = cur;
    cur = prev;
    if (std::abs(cur) > 1e250) {
      cur *= 1e-250;
      next *= 1e-250;
      even_sum *= 1e-250;
      for (auto& v : out) v *= 1e-250;
    }
    const int order = j - 1;
    if (order <= n_max) out[order] = cur;
    if (order > 0 && order % 2 == 0) even_sum += cur;
  }
  const double norm = cur + 2.0 * even_sum;
  for (auto& v : out) v /= norm;
  return out;
}

}  // namespace

void set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(g_warning_mutex);
  g_warning_handler = std::move(handler);
}

void warn(std::string_view message) {
  std::lock_guard lock(g_warning_mutex);
  if (g_warning_handler) {
    g_warning_handler(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

EnergyWindow::EnergyWindow(int n_min, int n_max) : n_min_(n_min), n_max_(n_max) {
  if (n_min > 0 || n_max < 0) {
    throw InvalidArgument("energy window [" + std::to_string(n_min) + ", " +
                          std::to_string(n_max) + "] must contain 0");
  }
}

ComplexMatrix::ComplexMatrix(EnergyWindow w, CMatrix m) : window(w), entries(std::move(m)) {
  if (entries.rows() != w.dim() || entries.cols() != w.dim()) {
    throw DimensionError("matrix is " + std::to_string(entries.rows()) + "x" +
                         std::to_string(entries.cols()) + ", window has dimension " +
                         std::to_string(w.dim()));
  }
}

DensityMatrix::DensityMatrix(EnergyWindow window, const CMatrix& matrix) : window_(window) {
  if (matrix.rows() != window.dim() || matrix.cols() != window.dim()) {
    throw DimensionError("density matrix does not match its window dimension");
  }
  if (!matrix.allFinite()) throw InvalidArgument("density matrix has non-finite entries");
  const double asym = (matrix - matrix.adjoint()).cwiseAbs().maxCoeff();
  if (asym > kHermiticityTolerance) {
    throw InvalidArgument("density matrix is not Hermitian (deviation " + std::to_string(asym) +
                          ")");
  }
  matrix_ = 0.5 * (matrix + matrix.adjoint());
  const double trace = matrix_.trace().real();
  if (std::abs(trace - 1.0) > kTraceTolerance) {
    throw InvalidArgument("density matrix trace is " + std::to_string(trace));
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(matrix_, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < kEigenvalueFloor) {
    throw InvalidArgument("density matrix has negative eigenvalue " +
                          std::to_string(eig.eigenvalues().minCoeff()));
  }
}

DensityMatrix DensityMatrix::maximally_mixed(EnergyWindow window) {
  const int d = window.dim();
  return {Trusted{}, window, CMatrix::Identity(d, d) / static_cast<double>(d)};
}

DensityMatrix DensityMatrix::basis_state(EnergyWindow window, int n) {
  if (!window.contains(n)) throw InvalidArgument("basis index outside window");
  CMatrix m = CMatrix::Zero(window.dim(), window.dim());
  m(window.offset(n), window.offset(n)) = 1.0;
  return {Trusted{}, window, std::move(m)};
}

DensityMatrix DensityMatrix::pure(EnergyWindow window, const CVector& psi) {
  if (psi.size() != window.dim()) throw DimensionError("state vector does not match window");
  const double norm2 = psi.squaredNorm();
  if (!(norm2 > 0.0)) throw DegenerateInput("zero state vector");
  return trusted_density(window, psi * psi.adjoint() / norm2);
}

double DensityMatrix::purity() const { return (matrix_ * matrix_).trace().real(); }

DensityMatrix DensityMatrix::embedded(EnergyWindow larger) const {
  if (!larger.covers(window_)) throw DimensionError("target window does not cover state");
  CMatrix m = CMatrix::Zero(larger.dim(), larger.dim());
  m.block(larger.offset(window_.n_min()), larger.offset(window_.n_min()), dim(), dim()) = matrix_;
  return {Trusted{}, larger, std::move(m)};
}

DensityMatrix trusted_density(EnergyWindow window, CMatrix matrix) {
  CMatrix h = 0.5 * (matrix + matrix.adjoint());
  const double trace = h.trace().real();
  if (!(trace > 0.0)) throw DegenerateInput("matrix has non-positive trace");
  h /= trace;
  return {DensityMatrix::Trusted{}, window, std::move(h)};
}

Coupling::Coupling(double magnitude, double phase) : magnitude_(magnitude) {
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) {
    throw InvalidArgument("coupling magnitude must be finite and non-negative");
  }
  phase_ = std::fmod(phase, kTwoPi);
  if (phase_ < 0.0) phase_ += kTwoPi;
  if (phase_ >= kTwoPi) phase_ = 0.0;
}

Coupling Coupling::from_complex(Complex g) { return {std::abs(g), std::arg(g)}; }

double bessel_j(int n, double x) {
  const int sign_n = (n < 0 && (n % 2) != 0) ? -1 : 1;
  const int order = std::abs(n);
  int sign = sign_n;
  if (x < 0.0) {
    x = -x;
    if (order % 2 != 0) sign = -sign;
  }
  if (x == 0.0) return order == 0 ? 1.0 : 0.0;
  if (x < kSeriesLimit) return sign * bessel_series(order, x);
  return sign * bessel_miller(order, x)[order];
}

std::vector<double> bessel_j_orders(int n_max, double x) {
  if (n_max < 0) throw InvalidArgument("negative Bessel order count");
  x = std::abs(x);
  std::vector<double> out(n_max + 1, 0.0);
  if (x == 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (x < kSeriesLimit) {
    for (int n = 0; n <= n_max; ++n) out[n] = bessel_series(n, x);
    return out;
  }
  return bessel_miller(n_max, x);
}

int bessel_support(double coupling_magnitude, double threshold) {
  const double x = 2.0 * coupling_magnitude;
  int k = static_cast<int>(std::ceil(x));
  const auto table = bessel_j_orders(k + 200, x);
  while (k < static_cast<int>(table.size()) && std::abs(table[k]) >= threshold) ++k;
  return k;
}

int truncation_padding(double coupling_magnitude) {
  return static_cast<int>(std::ceil(2.0 * coupling_magnitude)) + 10;
}

CMatrix interaction_block(const Coupling& g, const EnergyWindow& rows, const EnergyWindow& cols) {
  const int max_shift = std::max(std::abs(rows.n_max() - cols.n_min()),
                                 std::abs(rows.n_min() - cols.n_max()));
  const auto j = bessel_j_orders(max_shift, 2.0 * g.magnitude());
  CMatrix u(rows.dim(), cols.dim());
  for (int r = 0; r < rows.dim(); ++r) {
    for (int c = 0; c < cols.dim(); ++c) {
      const int k = rows.label(r) - cols.label(c);
      const int ak = std::abs(k);
      const double jk = (k < 0 && ak % 2 != 0) ? -j[ak] : j[ak];
      u(r, c) = std::polar(jk, k * g.phase());
    }
  }
  return u;
}

ComplexMatrix interaction_unitary(const Coupling& g, const EnergyWindow& window) {
  const int half = window.dim() / 2;
  if (g.magnitude() > 0.0 && bessel_support(g.magnitude(), 1e-14) > half) {
    warn("interaction unitary truncated: window of dimension " + std::to_string(window.dim()) +
         " is too small for |g| = " + std::to_string(g.magnitude()));
  }
  return {window, interaction_block(g, window, window)};
}

CVector pinem_amplitudes(const Coupling& g, const EnergyWindow& window) {
  return interaction_block(g, window, EnergyWindow(0, 0)).col(0);
}

DensityMatrix pinem_state(const Coupling& g, const EnergyWindow& window) {
  return DensityMatrix::pure(window, pinem_amplitudes(g, window));
}

namespace {

// Eigenvalues at round-off level are zeroed; their square roots would
// otherwise inject O(1e-8) noise into rank-deficient fidelities.
CMatrix psd_sqrt(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(m);
  const RVector ev = eig.eigenvalues();
  const double cut = 64.0 * std::numeric_limits<double>::epsilon() * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  RVector s(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) s[i] = ev[i] > cut ? std::sqrt(ev[i]) : 0.0;
  return eig.eigenvectors() * s.asDiagonal() * eig.eigenvectors().adjoint();
}

}  // namespace

double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (!(rho.window() == sigma.window())) {
    throw DimensionError("fidelity of states on different windows");
  }
  // Tr sqrt(sqrt(rho) sigma sqrt(rho)) is the trace norm of sqrt(rho) sqrt(sigma).
  const CMatrix product = psd_sqrt(rho.matrix()) * psd_sqrt(sigma.matrix());
  const double tr = Eigen::JacobiSVD<CMatrix>(product).singularValues().sum();
  return std::clamp(tr * tr, 0.0, 1.0);
}

double frobenius_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (!(a.window() == b.window())) throw DimensionError("states on different windows");
  return (a.matrix() - b.matrix()).norm();
}

DensityMatrix project_physical(const ComplexMatrix& m) {
  if (!m.entries.allFinite()) throw DegenerateInput("matrix has non-finite entries");
  const CMatrix h = 0.5 * (m.entries + m.entries.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(h);
  const RVector clipped = eig.eigenvalues().cwiseMax(0.0);
  const double total = clipped.sum();
  if (!(total > 0.0)) throw DegenerateInput("matrix has no positive spectrum to project onto");
  CMatrix rho = eig.eigenvectors() * (clipped / total).asDiagonal() * eig.eigenvectors().adjoint();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return {DensityMatrix::Trusted{}, m.window, std::move(rho)};
}

DensityMatrix random_density(const EnergyWindow& window, std::mt19937_64& rng, int rank) {
  const int d = window.dim();
  const int k = rank <= 0 ? d : rank;
  std::normal_distribution<double> normal;
  CMatrix a(d, k);
  for (int c = 0; c < k; ++c) {
    for (int r = 0; r < d; ++r) a(r, c) = Complex(normal(rng), normal(rng));
  }
  return trusted_density(window, a * a.adjoint());
}

}  // namespace fetomo
