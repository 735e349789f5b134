#pragma once

#include <vector>

#include "cfs/common.hpp"

namespace cfs {

/// Eigenvalues of a square matrix, counted with algebraic multiplicity and
/// sorted by (real part, imaginary part).
struct EigenSpectrum {
  std::vector<Complex> values;
  // max_i ||M v_i - lambda_i v_i|| / ||M||_F over the computed pairs
  double residual = 0.0;
};

struct SpectralOptions {
  Eigen::Index max_dimension = 256;
  double residual_tolerance = 1e-10;
};

EigenSpectrum eigenvalues_dense(const ComplexMatrix& m, const SpectralOptions& opts = {});

double spectral_weight(const EigenSpectrum& s);
double spectral_weight(std::span<const Complex> values);

struct SignatureCounts {
  int positive = 0;
  int negative = 0;
  friend bool operator==(const SignatureCounts&, const SignatureCounts&) = default;
};

// Counts eigenvalues above tau_rank*||M|| and below -tau_rank*||M|| of a
// Hermitian matrix (||M|| is the spectral norm).
SignatureCounts signature_counts(const ComplexMatrix& m, double tau_rank = 1e-10);

// Throws not_hermitian unless ||M - M^*||_F <= rel_tol * ||M||_F.
void require_hermitian(const ComplexMatrix& m, double rel_tol = 1e-12);

void sort_spectrum(std::vector<Complex>& values);

}  // namespace cfs
