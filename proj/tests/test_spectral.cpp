#include <doctest.h>

#include <array>

#include "cfs/spectral.hpp"
#include "oracles.hpp"

using namespace cfs;

TEST_SUITE("spectral") {

TEST_CASE("identity and rotation spectra") {
  const auto id = eigenvalues_dense(ComplexMatrix::Identity(2, 2));
  REQUIRE(id.values.size() == 2);
  CHECK(std::abs(id.values[0] - Complex(1, 0)) < 1e-15);
  CHECK(std::abs(id.values[1] - Complex(1, 0)) < 1e-15);

  ComplexMatrix rot(2, 2);
  rot << 0.0, -1.0, 1.0, 0.0;
  const auto s = eigenvalues_dense(rot);
  // sorted by (re, im): -i before +i
  CHECK(std::abs(s.values[0] - Complex(0, -1)) < 1e-14);
  CHECK(std::abs(s.values[1] - Complex(0, 1)) < 1e-14);
  CHECK(s.residual <= 1e-10);
}

TEST_CASE("random 6x6 matches characteristic polynomial roots") {
  oracle::Rng rng(606);
  const ComplexMatrix m = oracle::random_matrix(rng, 6, 6);
  const auto s = eigenvalues_dense(m);
  const auto ref = oracle::eigenvalues_by_char_poly(m);
  CHECK(oracle::multiset_distance(s.values, ref) <= 1e-9 * oracle::max_modulus(ref));
}

TEST_CASE("eigenvalues agree with the root oracle on 1000 random matrices") {
  oracle::Rng rng(1);
  std::uniform_int_distribution<int> dim(1, 8);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = dim(rng);
    const ComplexMatrix m = oracle::random_matrix(rng, n, n);
    const auto s = eigenvalues_dense(m);
    REQUIRE(s.values.size() == static_cast<std::size_t>(n));
    const auto ref = oracle::eigenvalues_by_char_poly(m);
    worst = std::max(worst, oracle::multiset_distance(s.values, ref) / oracle::max_modulus(ref));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("spectral weight values") {
  CHECK(spectral_weight(EigenSpectrum{{Complex(1, 0), Complex(-1, 0)}, 0.0}) == doctest::Approx(2.0));
  CHECK(spectral_weight(EigenSpectrum{{Complex(3, 4)}, 0.0}) == doctest::Approx(5.0));
  CHECK(spectral_weight(EigenSpectrum{{0.0, 0.0, 0.0, 0.0}, 0.0}) == 0.0);
}

TEST_CASE("spectral weight is similarity invariant") {
  oracle::Rng rng(2);
  std::uniform_int_distribution<int> dim(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = dim(rng);
    const ComplexMatrix m = oracle::random_matrix(rng, n, n);
    const ComplexMatrix g =
        ComplexMatrix::Identity(n, n) + 0.3 / std::sqrt(double(n)) * oracle::random_matrix(rng, n, n);
    const ComplexMatrix sim = g * m * g.inverse();
    const double w0 = spectral_weight(eigenvalues_dense(m));
    const double w1 = spectral_weight(eigenvalues_dense(sim));
    CHECK(std::abs(w0 - w1) <= 1e-8 * w0);
  }
}

TEST_CASE("signature counts") {
  ComplexMatrix d = ComplexMatrix::Zero(3, 3);
  d(0, 0) = 2.0;
  d(1, 1) = -1.0;
  CHECK(signature_counts(d, 1e-10) == SignatureCounts{1, 1});
  CHECK(signature_counts(ComplexMatrix::Zero(4, 4)) == SignatureCounts{0, 0});

  oracle::Rng rng(3);
  const ComplexMatrix q = oracle::random_unitary(rng, 64).leftCols(4);
  RealVector planted(4);
  planted << 3.0, 0.5, -0.7, -2.0;
  const ComplexMatrix m = q * planted.cast<Complex>().asDiagonal() * q.adjoint();
  CHECK(signature_counts(m, 1e-10) == SignatureCounts{2, 2});

  // Gram construction B^* D B has the inertia of D.
  const ComplexMatrix b = oracle::random_matrix(rng, 4, 64);
  const ComplexMatrix gram = b.adjoint() * planted.cast<Complex>().asDiagonal() * b;
  CHECK(signature_counts(0.5 * (gram + gram.adjoint()), 1e-10) == SignatureCounts{2, 2});
}

TEST_CASE("signature counts are unitarily invariant") {
  oracle::Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 12;
    RealVector ev(n);
    std::uniform_int_distribution<int> pick(0, 2);
    for (int i = 0; i < n; ++i) ev(i) = std::array<double, 3>{-1.5, 0.0, 1.0}[pick(rng)];
    const ComplexMatrix u = oracle::random_unitary(rng, n);
    const ComplexMatrix m = u * ev.cast<Complex>().asDiagonal() * u.adjoint();
    const ComplexMatrix v = oracle::random_unitary(rng, n);
    const ComplexMatrix h = v * m * v.adjoint();
    CHECK(signature_counts(0.5 * (m + m.adjoint())) == signature_counts(0.5 * (h + h.adjoint())));
  }
}

TEST_CASE("error paths") {
  CHECK_THROWS_AS(eigenvalues_dense(ComplexMatrix::Zero(2, 3)), Error);
  try {
    eigenvalues_dense(ComplexMatrix::Zero(2, 3));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_square);
  }
  SpectralOptions small;
  small.max_dimension = 4;
  CHECK_THROWS_AS(eigenvalues_dense(ComplexMatrix::Identity(5, 5), small), Error);

  ComplexMatrix nh(2, 2);
  nh << 1.0, 1.0, 0.0, 1.0;
  try {
    signature_counts(nh);
    FAIL("expected not_hermitian");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_hermitian);
  }
}

}
