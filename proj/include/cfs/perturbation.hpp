#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "cfs/common.hpp"

namespace cfs::pert {

/// Finite stand-in for the causal fundamental solution: k with spectrum in
/// {-1, 0, 1}, p = k^2, and a Hermitian perturbation dk (k~ = k + dk).
struct FiniteSeaModel {
  ComplexMatrix k;
  ComplexMatrix p;
  ComplexMatrix dk;

  int dim() const { return static_cast<int>(k.rows()); }
  // Hermiticity, k^2 = p, p^2 = p to 1e-10.
  void validate() const;
  ComplexMatrix perturbed() const { return k + dk; }
};

// k = U diag(s) U^* with s drawn from {-1, 0, 1} (at least one -1) and dk a
// random Hermitian matrix of operator norm dk_norm.
FiniteSeaModel random_model(std::mt19937_64& rng, int dim, double dk_norm);
ComplexMatrix random_hermitian(std::mt19937_64& rng, int dim, double norm);
ComplexMatrix random_unitary(std::mt19937_64& rng, int dim);

/// Circle in the spectral plane, traversed counter-clockwise.
struct Contour {
  Complex center{-1.0, 0.0};
  double radius = 0.5;
  int nodes = 64;

  // +1 and 0 outside, nodes >= 4.
  void validate() const;
  Complex node(int j) const;
};

/// R = (p+k)/2 /(1-lambda) + (p-k)/2 /(-1-lambda) - (I-p)/lambda
ComplexMatrix unperturbed_resolvent(const FiniteSeaModel& model, Complex lambda);

struct NeumannResult {
  ComplexMatrix value;
  double rate = 0.0;        // ||R dk||_2
  double tail_bound = 0.0;  // rate^{order+1} / (1 - rate) * ||R||_2
};

/// sum_{n <= order} (-R dk)^n R; throws divergence if ||R dk||_2 >= 1.
NeumannResult neumann_resolvent(const FiniteSeaModel& model, Complex lambda, int order);

/// P = -(1/2 pi i) oint (-lambda) R~_lambda dlambda by the trapezoidal rule.
/// Throws ill_conditioned when an eigenvalue of k~ lies within 1e-6 of the circle.
ComplexMatrix contour_sea_projector(const FiniteSeaModel& model, const Contour& contour, int order,
                                    unsigned threads = 1);
// Directional derivative of the above along a Hermitian direction e of dk,
// using the exact resolvent on every node.
ComplexMatrix contour_sea_projector_derivative(const FiniteSeaModel& model, const Contour& contour,
                                               const ComplexMatrix& e);
/// -sum lambda_i Pi_i over the eigenvalues of k~ inside the circle.
ComplexMatrix eigen_sea_projector(const FiniteSeaModel& model, const Contour& contour);

// I - p~, where p~ projects onto the eigenvalues of k~ with |lambda| > 1/2;
// the finite-model Dirac operator, whose kernel is the perturbed mass shell.
ComplexMatrix perturbed_dirac_operator(const FiniteSeaModel& model);

/// ||D P||_F / ||P||_F
double dirac_identity_residual(const ComplexMatrix& p_sea, const ComplexMatrix& d_full);
// ||P^2 - P||_F; zero when every enclosed eigenvalue is exactly -1.
double idempotency_defect(const ComplexMatrix& p_sea);

struct ConvergenceRow {
  int order = 0;
  double defect = 0.0;  // ||P_order - P_eigen||_F
  double bound = 0.0;   // contour-averaged Neumann tail bound (Frobenius)
};
std::vector<ConvergenceRow> contour_convergence(const FiniteSeaModel& model, const Contour& contour,
                                                int max_order);
void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows);

/// Plain-text model container:
///   cfs-sea-model 1
///   dim <d>
///   k / p / dk   (d rows of d "re im" pairs each)
///   end
void write_model(std::ostream& out, const FiniteSeaModel& model);
FiniteSeaModel read_model(std::istream& in);

/// 1+1 momentum lattice for the Green's functions: frequencies k0 and momenta
/// k1 on uniform grids, 4x4 spinor blocks, block index (a, b) -> a * n1 + b.
struct LatticeDiracModel {
  std::vector<double> k0;
  std::vector<double> k1;
  double mass = 1.0;
  double nu = 0.5;  // k0 -> k0 -+ i nu

  int blocks() const { return static_cast<int>(k0.size() * k1.size()); }
  int dim() const { return 4 * blocks(); }
  void validate() const;
};

// n points symmetric about zero with spacing h (no point at zero for even n).
std::vector<double> symmetric_grid(int n, double h);

// Block-diagonal gamma^0, the Krein metric of the lattice model.
ComplexMatrix lattice_metric(const LatticeDiracModel& model);
// kslash - m with k0 -> k0 - i nu (sign = -1, advanced) or k0 + i nu (sign = +1, retarded).
ComplexMatrix lattice_dirac(const LatticeDiracModel& model, int sign);

struct GreensPair {
  ComplexMatrix s_adv;
  ComplexMatrix s_ret;
  ComplexMatrix metric;  // Krein metric; empty means identity
};

// Inverses of lattice_dirac(-1) and lattice_dirac(+1); s_ret is the Krein
// adjoint of s_adv.
GreensPair lattice_greens(const LatticeDiracModel& model);

/// (s_adv - s_ret) / (2 pi i)
ComplexMatrix causal_fundamental(const GreensPair& g);
// p = eps(k0) k on each frequency block, so (p - k)/2 keeps the k0 < 0 blocks.
ComplexMatrix causal_split_p(const LatticeDiracModel& model, const ComplexMatrix& k);

struct GreensSeries {
  // Partial sums after each order, index 0 is the unperturbed function.
  std::vector<ComplexMatrix> adv_partial;
  std::vector<ComplexMatrix> ret_partial;
  double rate_adv = 0.0;  // ||s_adv B||_2
  double rate_ret = 0.0;
  const ComplexMatrix& adv() const { return adv_partial.back(); }
  const ComplexMatrix& ret() const { return ret_partial.back(); }
};

/// s~ = sum_n (-s B)^n s for both functions. A non-empty x must satisfy
/// x^* (D + B) = (D + B) x for both D = s^{-1}, with x^* the Krein adjoint,
/// to 1e-10 relative; otherwise inadmissible is thrown.
GreensSeries greens_series(const GreensPair& g, const ComplexMatrix& b, int order,
                           const ComplexMatrix& x = ComplexMatrix());

// ||(s^{-1} + B) s~ - I||_F
double greens_defect(const ComplexMatrix& s, const ComplexMatrix& b, const ComplexMatrix& s_tilde);

}  // namespace cfs::pert
