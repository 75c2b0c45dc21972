#include "fetomo/phase_space.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fetomo/quadrature.hpp"

namespace fetomo {

namespace {

// sum_{k>=0} (-1)^k / (k + a)
double alternating_tail(double a) { return 0.5 * (digamma(0.5 * (a + 1.0)) - digamma(0.5 * a)); }

// Kernel at half-integer momentum offset: p - (m + 1/2) = j - 1/2.
double half_kernel(int j) { return 2.0 * ((j % 2 == 0) ? 1.0 : -1.0) / (0.5 - j); }

// sum_{j >= lo} half_kernel(j)
double upper_tail(int lo) {
  double sum = 0.0;
  for (int j = lo; j < 1; ++j) sum += half_kernel(j);
  const int start = std::max(lo, 1);
  const double sign = (start % 2 == 0) ? 1.0 : -1.0;
  return sum - 2.0 * sign * alternating_tail(start - 0.5);
}

// sum_{j <= hi} half_kernel(j)
double lower_tail(int hi) {
  double sum = 0.0;
  for (int j = 1; j <= hi; ++j) sum += half_kernel(j);
  const int start = std::max(-hi, 0);
  const double sign = (start % 2 == 0) ? 1.0 : -1.0;
  return sum + 2.0 * sign * alternating_tail(start + 0.5);
}

int floor_half(int s) { return s >= 0 ? s / 2 : -((-s + 1) / 2); }

}  // namespace

PositionGrid::PositionGrid(int n_points) : n_(n_points) {
  if (n_points < 64) throw InvalidArgument("position grid needs at least 64 points");
}

RVector WignerTable::position_marginal() const { return values.rowwise().sum() + outside; }

RVector WignerTable::momentum_marginal() const {
  return values.colwise().sum().transpose() * grid.spacing();
}

double WignerTable::normalization() const { return position_marginal().sum() * grid.spacing(); }

WignerTable wigner(const DensityMatrix& rho, const PositionGrid& grid) {
  return wigner(rho, grid, rho.window());
}

WignerTable wigner(const DensityMatrix& rho, const PositionGrid& grid, EnergyWindow momenta) {
  const EnergyWindow& w = rho.window();
  const int d = w.dim();
  const int s_min = 2 * w.n_min();
  const int s_max = 2 * w.n_max();
  const int n_s = s_max - s_min + 1;
  const double norm = 1.0 / (kTwoPi * kTwoPi);

  // Out-of-table kernel mass for each N + M.
  std::vector<double> tail(n_s, 0.0);
  for (int s = s_min; s <= s_max; ++s) {
    if (s % 2 == 0) {
      if (!momenta.contains(s / 2)) tail[s - s_min] = kTwoPi;
    } else {
      const int m = floor_half(s);
      tail[s - s_min] = upper_tail(momenta.n_max() + 1 - m) + lower_tail(momenta.n_min() - 1 - m);
    }
  }

  WignerTable table{grid, momenta, RMatrix::Zero(grid.size(), momenta.dim()),
                    RVector::Zero(grid.size()), 0.0};
  std::vector<Complex> c(n_s);
  for (int k = 0; k < grid.size(); ++k) {
    const double x = grid[k];
    std::fill(c.begin(), c.end(), Complex(0.0, 0.0));
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        const int n = w.label(a);
        const int mm = w.label(b);
        c[n + mm - s_min] += rho.matrix()(a, b) * std::polar(1.0, (n - mm) * x);
      }
    }
    double out = 0.0;
    for (int s = s_min; s <= s_max; ++s) {
      const Complex cs = c[s - s_min];
      table.max_imaginary = std::max(table.max_imaginary, std::abs(cs.imag()) * norm);
      const double cr = cs.real();
      if (cr == 0.0) continue;
      out += cr * tail[s - s_min];
      if (s % 2 == 0) {
        if (momenta.contains(s / 2)) table.values(k, momenta.offset(s / 2)) += norm * kTwoPi * cr;
      } else {
        const int m = floor_half(s);
        for (int p = momenta.n_min(); p <= momenta.n_max(); ++p) {
          table.values(k, momenta.offset(p)) += norm * cr * half_kernel(p - m);
        }
      }
    }
    table.outside[k] = norm * out;
  }
  return table;
}

RVector temporal_density(const DensityMatrix& rho, const PositionGrid& grid) {
  const EnergyWindow& w = rho.window();
  const int d = w.dim();
  // Sum along each diagonal: c_D = sum_N rho_{N+D, N}.
  std::vector<Complex> diag(2 * d - 1, Complex(0.0, 0.0));
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) diag[a - b + d - 1] += rho.matrix()(a, b);
  }
  RVector out(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    const double x = grid[k];
    double sum = diag[d - 1].real();
    for (int shift = 1; shift < d; ++shift) {
      sum += 2.0 * (diag[shift + d - 1] * std::polar(1.0, shift * x)).real();
    }
    out[k] = sum / kTwoPi;
  }
  return out;
}

AmbiguousPeak::AmbiguousPeak(std::vector<int> peaks)
    : NumericalError([&] {
        std::string msg = "density has several equal maxima at grid indices";
        for (int p : peaks) msg += " " + std::to_string(p);
        return msg;
      }()),
      peaks_(std::move(peaks)) {}

double fwhm(const RVector& density) {
  const int n = static_cast<int>(density.size());
  if (n < 3) throw InvalidArgument("density needs at least three samples");
  if (!density.allFinite()) throw InvalidArgument("density has non-finite values");
  const double hi = density.maxCoeff();
  const double lo = density.minCoeff();
  if (!(hi > lo)) throw UndefinedStatistic("constant density has no defined width");

  // Indices attaining the maximum; a single cyclic run counts as one peak.
  const double tie = 1e-12 * std::max(std::abs(hi), 1e-300);
  std::vector<int> top;
  for (int i = 0; i < n; ++i) {
    if (hi - density[i] <= tie) top.push_back(i);
  }
  int runs = 0;
  int run_start = top.front();
  int run_end = top.front();
  for (std::size_t i = 0; i < top.size(); ++i) {
    const int prev = top[(i + top.size() - 1) % top.size()];
    if (top.size() == 1 || (prev + 1) % n != top[i]) {
      ++runs;
      run_start = top[i];
    }
  }
  if (runs > 1) throw AmbiguousPeak(top);
  run_end = (run_start + static_cast<int>(top.size()) - 1) % n;

  const double half = 0.5 * hi;
  auto value = [&](int i) { return density[((i % n) + n) % n]; };
  double right = 0.0;
  bool found = false;
  for (int step = 1; step < n; ++step) {
    const int j = run_end + step;
    if (value(j) < half) {
      right = (j - 1) + (value(j - 1) - half) / (value(j - 1) - value(j));
      found = true;
      break;
    }
  }
  if (!found) throw UndefinedStatistic("density never falls to half maximum");
  double left = 0.0;
  found = false;
  for (int step = 1; step < n; ++step) {
    const int j = run_start - step;
    if (value(j) < half) {
      left = (j + 1) - (value(j + 1) - half) / (value(j + 1) - value(j));
      found = true;
      break;
    }
  }
  if (!found) throw UndefinedStatistic("density never falls to half maximum");
  // run_start <= run_end cyclically; unwrap right relative to the run start.
  double width = right - left;
  if (run_end < run_start) width += n;
  if (width > n) throw UndefinedStatistic("half-maximum crossings overlap");
  return width / n;
}

std::vector<Complex> coherence_moments(const DensityMatrix& rho, int n_max) {
  const int d = rho.dim();
  if (n_max < 1 || n_max >= d) {
    throw InvalidArgument("n_max must lie in [1, " + std::to_string(d - 1) + "]");
  }
  std::vector<Complex> out(n_max);
  for (int n = 1; n <= n_max; ++n) {
    Complex sum(0.0, 0.0);
    for (int a = n; a < d; ++a) sum += rho.matrix()(a, a - n);
    out[n - 1] = sum;
  }
  return out;
}

}  // namespace fetomo
