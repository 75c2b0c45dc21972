#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "fetomo/error.hpp"
#include "fetomo/spectrogram.hpp"
#include "helpers.hpp"

using namespace fetomo;

namespace {

DensityMatrix phase_rotated(const DensityMatrix& rho, double phi0) {
  const auto& w = rho.window();
  CMatrix m = rho.matrix();
  for (int a = 0; a < w.dim(); ++a)
    for (int b = 0; b < w.dim(); ++b) m(a, b) *= std::polar(1.0, -phi0 * (w.label(a) - w.label(b)));
  return DensityMatrix(w, m);
}

}  // namespace

TEST_SUITE("spectrogram") {

TEST_CASE("phase grid validation") {
  CHECK(PhaseGrid::uniform().size() == 100);
  CHECK(PhaseGrid::uniform(4)[1] == doctest::Approx(kPi / 2));
  CHECK_THROWS_AS(PhaseGrid({}), InvalidArgument);
  CHECK_THROWS_AS(PhaseGrid({0.0, 0.0}), InvalidArgument);
  CHECK_THROWS_AS(PhaseGrid({1.0, 0.5}), InvalidArgument);
  CHECK_THROWS_AS(PhaseGrid({kTwoPi}), InvalidArgument);
  CHECK_THROWS_AS(PhaseGrid({-0.1}), InvalidArgument);
}

TEST_CASE("spectrogram validation") {
  EnergyWindow w(-1, 1);
  CHECK_THROWS_AS(Spectrogram(w, PhaseGrid::uniform(2), RMatrix::Ones(2, 2), 1.0), DimensionError);
  RMatrix neg = RMatrix::Ones(2, 3);
  neg(1, 1) = -1;
  CHECK_THROWS_AS(Spectrogram(w, PhaseGrid::uniform(2), neg, 1.0), InvalidArgument);
  CHECK_THROWS_AS(Spectrogram(w, PhaseGrid::uniform(2), RMatrix::Ones(2, 3), -1.0), InvalidArgument);
  CHECK_THROWS_AS(Spectrogram(w, PhaseGrid::uniform(2), RMatrix::Ones(2, 3), 1.0, 0.0), InvalidArgument);
  const Spectrogram s(w, PhaseGrid::uniform(2), RMatrix::Ones(2, 3) / 3.0, 1.0, 600.0);
  CHECK(s.total() == doctest::Approx(1200.0));
  CHECK(s.rows_normalized());
}

TEST_CASE("vacuum spectrogram is the squared Bessel profile at every phase") {
  const double g = 1.1;
  const auto s = simulate_spectrogram(DensityMatrix::basis_state(EnergyWindow(0, 0), 0), g, PhaseGrid::uniform(7));
  for (int i = 0; i < 7; ++i) {
    for (int n = s.window.n_min(); n <= s.window.n_max(); ++n) {
      const double j = oracle::bessel_series(n, 2 * g);
      CHECK(std::abs(s.counts(i, s.window.offset(n)) - j * j) < 1e-14);
      CHECK(std::abs(s.counts(i, s.window.offset(n)) - s.counts(i, s.window.offset(-n))) < 1e-12);
    }
  }
}

TEST_CASE("zero coupling reproduces the populations") {
  std::mt19937_64 rng(1);
  const auto rho = random_density(EnergyWindow(-2, 3), rng);
  const auto s = simulate_spectrogram(rho, 0.0, PhaseGrid::uniform(5));
  CHECK(s.window == EnergyWindow(-12, 13));
  for (int i = 0; i < 5; ++i) {
    for (int n = -12; n <= 13; ++n) {
      const double expect = rho.window().contains(n) ? rho.at(n, n).real() : 0.0;
      CHECK(std::abs(s.counts(i, s.window.offset(n)) - expect) < 1e-15);
    }
  }
}

TEST_CASE("phase covariance") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  const auto rho = random_density(EnergyWindow(-2, 2), rng);
  for (int t = 0; t < 20; ++t) {
    const double phi0 = u(rng);
    const double phi = u(rng);
    const double shifted = std::fmod(phi + phi0, kTwoPi);
    const auto a = simulate_spectrogram(phase_rotated(rho, phi0), 0.9, PhaseGrid({phi}));
    const auto b = simulate_spectrogram(rho, 0.9, PhaseGrid({shifted}));
    CHECK(max_abs((a.counts - b.counts).cast<Complex>()) < 1e-12);
    // The likelihood follows the same relabeling.
    const auto rho2 = random_density(EnergyWindow(-2, 2), rng);
    const double la = log_likelihood(expected_counts(a, 100.0), phase_rotated(rho2, phi0));
    const double lb = log_likelihood(expected_counts(b, 100.0), rho2);
    CHECK(la == doctest::Approx(lb).epsilon(1e-10));
  }
}

TEST_CASE("simulated rows are normalized") {
  std::mt19937_64 rng(3);
  for (double g : {0.3, 1.2, 4.0, 6.0}) {
    const auto rho = random_density(EnergyWindow(-3, 3), rng);
    const auto s = simulate_spectrogram(rho, g, PhaseGrid::uniform(16));
    CHECK((s.counts.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("sample_counts") {
  const auto probs = simulate_spectrogram(DensityMatrix::basis_state(EnergyWindow(0, 0), 0), 0.8, PhaseGrid::uniform(3));
  CHECK_THROWS_AS(sample_counts(probs, 0, 1), InvalidArgument);
  CHECK_THROWS_AS(sample_counts(expected_counts(probs, 2.0), 10, 1), InvalidArgument);

  const auto a = sample_counts(probs, 1000, 42);
  const auto b = sample_counts(probs, 1000, 42);
  CHECK(a.counts == b.counts);
  CHECK((a.counts.rowwise().sum().array() == 1000.0).all());
  CHECK(a.counts != sample_counts(probs, 1000, 43).counts);

  const auto e = expected_counts(probs, 250.0);
  CHECK(e.counts == probs.counts * 250.0);
}

TEST_CASE("sampled frequencies agree with the probabilities") {
  const auto probs = simulate_spectrogram(DensityMatrix::basis_state(EnergyWindow(0, 0), 0), 0.7, PhaseGrid({0.0}));
  constexpr int kDraws = 10000;
  constexpr int kTotal = 10;
  RMatrix sum = RMatrix::Zero(1, probs.window.dim());
  for (int s = 0; s < kDraws; ++s) sum += sample_counts(probs, kTotal, 1000 + s).counts;
  const double n = static_cast<double>(kDraws) * kTotal;
  for (int j = 0; j < probs.window.dim(); ++j) {
    const double p = probs.counts(0, j);
    CHECK(std::abs(sum(0, j) / n - p) <= 3.0 * std::sqrt(p * (1 - p) / n) + 1e-15);
  }
}

TEST_CASE("log-likelihood examples") {
  EnergyWindow w(-1, 1);
  const auto rho = DensityMatrix::maximally_mixed(w);
  const Spectrogram zero(w, PhaseGrid::uniform(4), RMatrix::Zero(4, 3), 0.5);
  CHECK(log_likelihood(zero, rho) == 0.0);

  // g = 0, one phase, one count in bin N = 1: p = rho_11.
  RMatrix one = RMatrix::Zero(1, 3);
  one(0, 2) = 1.0;
  const Spectrogram single(w, PhaseGrid({0.3}), one, 0.0);
  CHECK(log_likelihood(single, rho) == doctest::Approx(std::log(1.0 / 3.0)));

  // Zero-probability bins are floored instead of giving -inf.
  const auto pure = DensityMatrix::basis_state(w, 0);
  CHECK(log_likelihood(single, pure) == doctest::Approx(std::log(kProbabilityFloor)));
}

TEST_CASE("the generating state maximizes the noiseless likelihood") {
  std::mt19937_64 rng(4);
  EnergyWindow w(-2, 1);
  const auto truth = random_density(w, rng);
  const auto data = expected_counts(simulate_spectrogram(truth, 1.0, PhaseGrid::uniform(20)), 1000.0);
  const double best = log_likelihood(data, truth);
  for (int t = 0; t < 100; ++t) CHECK(log_likelihood(data, random_density(w, rng)) <= best);
}

TEST_CASE("declared totals scale the exponents") {
  std::mt19937_64 rng(5);
  EnergyWindow w(-1, 1);
  const auto rho = random_density(w, rng);
  const auto probs = simulate_spectrogram(rho, 0.6, PhaseGrid::uniform(6));
  const Spectrogram freq(probs.window, probs.phases, probs.counts, 0.6, 500.0);
  CHECK(log_likelihood(freq, rho) == doctest::Approx(log_likelihood(expected_counts(probs, 500.0), rho)));
}

}  // TEST_SUITE
