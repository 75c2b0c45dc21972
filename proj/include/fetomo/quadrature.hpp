#pragma once

#include <vector>

namespace fetomo {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [a, b]; weights sum to b - a.
QuadratureRule gauss_legendre(int n, double a, double b);

/// Gauss-Hermite rule for the standard normal density; weights sum to 1.
QuadratureRule gauss_hermite_normal(int n);

/// Digamma psi(x) for x > 0.
double digamma(double x);

}  // namespace fetomo
