#pragma once

#include <vector>

#include "cfs/common.hpp"
#include "cfs/spectral.hpp"

namespace cfs {

/// A self-adjoint operator x = V diag(nu) V^* of rank r <= 2n on C^N, with
/// at most n positive and n negative eigenvalues. V has orthonormal columns;
/// range(V) is the spin space S_x.
class OperatorPoint {
 public:
  OperatorPoint() = default;

  // Takes an already orthonormal frame verbatim (no re-orthogonalization),
  // checking V^*V = I to 1e-12 and the signature budget. Used by readers
  // that must preserve bits.
  static OperatorPoint from_orthonormal(ComplexMatrix frame, RealVector spectrum, int spin_dim);

  int dim() const { return dim_; }
  int spin_dimension() const { return spin_dim_; }
  int rank() const { return static_cast<int>(spectrum_.size()); }
  const ComplexMatrix& frame() const { return frame_; }
  const RealVector& spectrum() const { return spectrum_; }

  ComplexMatrix dense() const;
  double trace() const { return spectrum_.sum(); }
  SignatureCounts signature() const;

 private:
  friend OperatorPoint make_operator_point(const ComplexMatrix&, const RealVector&, int);
  int dim_ = 0;
  int spin_dim_ = 0;
  ComplexMatrix frame_;
  RealVector spectrum_;
};

// Builds x = V diag(nu) V^*. If V is not orthonormal the operator is
// re-factored through a QR step and a small Hermitian eigenproblem, so the
// represented operator is unchanged. Spectrum entries below 1e-14 max|nu|
// are dropped. Throws signature_violation if x has more than n positive or
// negative eigenvalues.
OperatorPoint make_operator_point(const ComplexMatrix& frame, const RealVector& spectrum, int spin_dim);

// Orthonormalizes columns by classical Gram-Schmidt with one full
// re-orthogonalization pass. Throws invalid_argument on dependent columns.
ComplexMatrix orthonormalize_columns(const ComplexMatrix& a);

/// Nontrivial eigenvalues of xy, zero padded to 2n and sorted.
std::vector<Complex> product_spectrum(const OperatorPoint& x, const OperatorPoint& y);

/// P(x,y) = pi_x y|_{S_y} in the frames of x and y: (V_x^* V_y) diag(nu_y).
ComplexMatrix kernel(const OperatorPoint& x, const OperatorPoint& y);

/// A_xy = P(x,y) P(y,x) on S_x.
ComplexMatrix closed_chain(const OperatorPoint& x, const OperatorPoint& y);

// L = sum |l_i|^2 - (1/2n)(sum |l_i|)^2 for a 2n-value spectrum.
double lagrangian_from_spectrum(std::span<const Complex> lambda, int spin_dim);
// L_mu = sum |l_i|^2 - mu (sum |l_i|)^2
double lagrangian_mu_from_spectrum(std::span<const Complex> lambda, double mu);

double lagrangian(const OperatorPoint& x, const OperatorPoint& y);

enum class CausalType { spacelike, non_spacelike };

struct CausalRelation {
  CausalType type = CausalType::spacelike;
  // all eigenvalues of xy vanish; classified spacelike by convention
  bool degenerate = false;
};

CausalRelation causal_classify(const OperatorPoint& x, const OperatorPoint& y, double tau_causal = 1e-8);

struct PairData {
  std::vector<Complex> lambda;
  ComplexMatrix kernel_xy;
  double lagrangian = 0.0;
};

PairData pair_data(const OperatorPoint& x, const OperatorPoint& y);

struct Atom {
  OperatorPoint point;
  double weight = 0.0;
};

struct DiscreteMeasure {
  std::vector<Atom> atoms;
  std::size_t size() const { return atoms.size(); }
};

/// (H = C^N, spin dimension n, discrete universal measure).
class CausalFermionSystem {
 public:
  CausalFermionSystem() = default;
  CausalFermionSystem(int dim, int spin_dim, DiscreteMeasure measure);

  int dim() const { return dim_; }
  int spin_dimension() const { return spin_dim_; }
  const DiscreteMeasure& measure() const { return measure_; }
  const std::vector<Atom>& atoms() const { return measure_.atoms; }
  std::size_t size() const { return measure_.atoms.size(); }

 private:
  int dim_ = 0;
  int spin_dim_ = 0;
  DiscreteMeasure measure_;
};

// Spectra of x_a x_b for all ordered pairs (a,b), row-major a*K+b. Symmetric
// pairs share one eigen solve.
std::vector<std::vector<Complex>> pair_spectra(const CausalFermionSystem& system,
                                               unsigned threads = default_threads());

/// S = sum_a sum_b w_a w_b L(x_a, x_b), diagonal included.
double action(const CausalFermionSystem& system);

struct Constraints {
  double volume = 0.0;
  double trace = 0.0;
  double boundedness = 0.0;
};

Constraints constraints(const CausalFermionSystem& system);

}  // namespace cfs
