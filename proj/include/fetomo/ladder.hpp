#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fetomo {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kPi = 3.141592653589793238462643383279;

inline constexpr double kHermiticityTolerance = 1e-12;
inline constexpr double kEigenvalueFloor = -1e-10;
inline constexpr double kTraceTolerance = 1e-10;

// Non-fatal diagnostics (truncation, non-convergence) go through this sink.
// The default prints to stderr.
using WarningHandler = std::function<void(std::string_view)>;
void set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

/// Contiguous range of photon-exchange indices [n_min, n_max] containing 0.
class EnergyWindow {
 public:
  EnergyWindow(int n_min, int n_max);

  int n_min() const { return n_min_; }
  int n_max() const { return n_max_; }
  int dim() const { return n_max_ - n_min_ + 1; }

  bool contains(int n) const { return n >= n_min_ && n <= n_max_; }
  // Row/column offset of ladder index n.
  int offset(int n) const { return n - n_min_; }
  int label(int offset) const { return n_min_ + offset; }

  EnergyWindow padded(int margin) const { return {n_min_ - margin, n_max_ + margin}; }
  bool covers(const EnergyWindow& other) const {
    return n_min_ <= other.n_min_ && n_max_ >= other.n_max_;
  }

  friend bool operator==(const EnergyWindow&, const EnergyWindow&) = default;

 private:
  int n_min_;
  int n_max_;
};

/// Dense square matrix labelled by an energy window.
struct ComplexMatrix {
  ComplexMatrix(EnergyWindow w, CMatrix m);

  EnergyWindow window;
  CMatrix entries;

  Complex at(int n, int m) const { return entries(window.offset(n), window.offset(m)); }
};

/// Hermitian, positive semi-definite, unit-trace matrix. Construction
/// validates the invariants and stores the exactly Hermitian part.
class DensityMatrix {
 public:
  DensityMatrix(EnergyWindow window, const CMatrix& matrix);

  static DensityMatrix maximally_mixed(EnergyWindow window);
  static DensityMatrix basis_state(EnergyWindow window, int n);
  // |psi><psi| / <psi|psi>
  static DensityMatrix pure(EnergyWindow window, const CVector& psi);

  const EnergyWindow& window() const { return window_; }
  const CMatrix& matrix() const { return matrix_; }
  int dim() const { return window_.dim(); }
  Complex at(int n, int m) const { return matrix_(window_.offset(n), window_.offset(m)); }

  double purity() const;

  // Zero-padded copy on a larger window.
  DensityMatrix embedded(EnergyWindow larger) const;

 private:
  struct Trusted {};
  DensityMatrix(Trusted, EnergyWindow window, CMatrix matrix)
      : window_(window), matrix_(std::move(matrix)) {}
  friend DensityMatrix project_physical(const ComplexMatrix&);
  friend DensityMatrix trusted_density(EnergyWindow, CMatrix);

  EnergyWindow window_;
  CMatrix matrix_;
};

// Wraps a matrix that is physical by construction (e.g. AA^dagger / Tr) without
// re-running the eigen-decomposition. Hermitizes and renormalizes the trace.
DensityMatrix trusted_density(EnergyWindow window, CMatrix matrix);

/// Complex coupling g = |g| e^{i arg g}; the phase is kept in [0, 2pi).
class Coupling {
 public:
  Coupling(double magnitude, double phase);
  static Coupling from_complex(Complex g);

  double magnitude() const { return magnitude_; }
  double phase() const { return phase_; }
  Complex value() const { return std::polar(magnitude_, phase_); }

  Coupling with_phase_shift(double dphi) const { return {magnitude_, phase_ + dphi}; }

 private:
  double magnitude_;
  double phase_;
};

/// Bessel function of the first kind J_n(x).
double bessel_j(int n, double x);

/// J_0(x) ... J_{n_max}(x) in one downward sweep.
std::vector<double> bessel_j_orders(int n_max, double x);

/// Smallest k such that |J_j(2|g|)| < threshold for every j >= k.
int bessel_support(double coupling_magnitude, double threshold);

/// Extra indices a window needs on each side so that an interaction with the
/// given coupling magnitude does not leak out of it.
int truncation_padding(double coupling_magnitude);

/// Block of the bi-infinite interaction operator exp(g b^dagger - conj(g) b)
/// with rows in `rows` and columns in `cols`: entry (N, M) is
/// J_{N-M}(2|g|) e^{i (N-M) arg g}.
CMatrix interaction_block(const Coupling& g, const EnergyWindow& rows, const EnergyWindow& cols);

ComplexMatrix interaction_unitary(const Coupling& g, const EnergyWindow& window);

/// U|0> restricted to the window: amplitudes J_n(2|g|) e^{i n arg g}.
CVector pinem_amplitudes(const Coupling& g, const EnergyWindow& window);
DensityMatrix pinem_state(const Coupling& g, const EnergyWindow& window);

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);

double frobenius_distance(const DensityMatrix& a, const DensityMatrix& b);

/// Hermitize, clip the negative spectrum and renormalize.
DensityMatrix project_physical(const ComplexMatrix& m);

/// Ginibre-distributed random state of the given rank (rank <= 0 means full).
DensityMatrix random_density(const EnergyWindow& window, std::mt19937_64& rng, int rank = 0);

}  // namespace fetomo
