#pragma once

#include <vector>

#include "fetomo/error.hpp"
#include "fetomo/ladder.hpp"

namespace fetomo {

inline constexpr int kDefaultGridPoints = 1024;

/// Periodic position grid x_k = -pi + 2 pi k / n over one optical cycle.
class PositionGrid {
 public:
  explicit PositionGrid(int n_points = kDefaultGridPoints);

  int size() const { return n_; }
  double operator[](int k) const { return -kPi + kTwoPi * k / n_; }
  double spacing() const { return kTwoPi / n_; }

 private:
  int n_;
};

/// W(x, p) on a position grid and an integer momentum window.
///
/// Odd N+M coherences leak quasi-probability to every integer momentum through
/// the 2 sin(pi k)/k kernel; `outside` holds, per x, the exact sum of W over
/// the momenta not covered by the table so that marginals close exactly.
struct WignerTable {
  PositionGrid grid;
  EnergyWindow momenta;
  RMatrix values;   // grid.size() x momenta.dim()
  RVector outside;  // grid.size()
  double max_imaginary = 0.0;

  double at(int k, int p) const { return values(k, momenta.offset(p)); }

  // sum_p W(x, p) over all integer p.
  RVector position_marginal() const;
  // integral over x of W(x, p), by the periodic rectangle rule.
  RVector momentum_marginal() const;
  // integral over x of sum_p W(x, p).
  double normalization() const;
};

WignerTable wigner(const DensityMatrix& rho, const PositionGrid& grid);
WignerTable wigner(const DensityMatrix& rho, const PositionGrid& grid, EnergyWindow momenta);

/// <x|rho|x> = (1/2pi) sum rho_NM e^{i(N-M)x} on the grid.
RVector temporal_density(const DensityMatrix& rho, const PositionGrid& grid);

class AmbiguousPeak : public NumericalError {
 public:
  AmbiguousPeak(std::vector<int> peaks);
  const std::vector<int>& peaks() const { return peaks_; }

 private:
  std::vector<int> peaks_;
};

/// Full width at half maximum of a periodic density sampled on a uniform grid
/// over one period, as a fraction of the period.
double fwhm(const RVector& density);

/// <b^n> = sum_N rho_{N, N-n} for n = 1..n_max.
std::vector<Complex> coherence_moments(const DensityMatrix& rho, int n_max);

}  // namespace fetomo
