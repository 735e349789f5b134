#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cfs/common.hpp"
#include "cfs/core.hpp"

namespace cfs::sea {

using Matrix4 = Eigen::Matrix<Complex, 4, 4>;
using Spinor = Eigen::Matrix<Complex, 4, 1>;
/// (t, x, y, z); in 1+1 mode only t and x enter.
using SpacetimePoint = std::array<double, 4>;
using Momentum = std::array<double, 3>;

/// Dirac representation, metric diag(1,-1,-1,-1).
struct GammaBasis {
  std::array<Matrix4, 4> gamma;
  Matrix4 gamma5;  // i g0 g1 g2 g3
  Matrix4 chi_left;
  Matrix4 chi_right;
  // gamma^mu k_mu for the contravariant vector (k0, k1, k2, k3)
  Matrix4 slash(const std::array<double, 4>& k) const;
};

// Built once; the ten anticommutators are checked on first use.
const GammaBasis& gamma_basis();
/// max over mu,nu of ||{g^mu, g^nu} - 2 eta^{mu nu}||
double anticommutator_defect(const GammaBasis& g);

double energy(const Momentum& k, double mass);
// p_s(k) = (kslash + m) g0 / (2 k0) at k0 = s*omega, s = +-1.
Matrix4 energy_projector(const Momentum& k, double mass, int sign);
// Unit spinors spanning range p_-(k) (spin 0, 1), obtained by projecting the
// lower basis vectors and orthonormalizing.
Spinor negative_energy_mode(const Momentum& k, double mass, int spin);
Spinor positive_energy_mode(const Momentum& k, double mass, int spin);

enum class DimensionMode { d1p1, d3p1 };

struct MomentumLattice {
  DimensionMode mode = DimensionMode::d1p1;
  double length = 32.0;  // box side L
  int points = 64;       // M_k; integers |j| <= (M_k - 1)/2 per axis
  double mass = 1.0;     // m = 0 drops the zero momentum

  void validate() const;
  int spatial_dims() const { return mode == DimensionMode::d1p1 ? 1 : 3; }
  double volume() const;
  std::vector<Momentum> momenta() const;
};

inline constexpr int kMaxMomenta = 4096;

struct Mode {
  Momentum k;
  double omega = 0.0;
  int energy_sign = -1;
  int spin = 0;
  Spinor amplitude;
};

/// Completely filled negative-energy sea on a periodic box, plus optional
/// extra particles (positive-energy combinations) and removed states
/// (combinations of sea modes). Coefficient vectors are indexed by modes().
class SeaState {
 public:
  const MomentumLattice& lattice() const { return lattice_; }
  // For each momentum: two negative-energy modes, then two positive-energy ones.
  const std::vector<Mode>& modes() const { return modes_; }
  const std::vector<int>& sea_modes() const { return sea_; }
  const std::vector<ComplexVector>& particles() const { return particles_; }
  const std::vector<ComplexVector>& antiparticles() const { return antiparticles_; }
  // Coordinates of H: the sea modes followed by the particles. Removed
  // states are projected out and lie in the kernel of every F(x).
  int coordinate_dim() const { return static_cast<int>(sea_.size() + particles_.size()); }
  int hilbert_dim() const { return coordinate_dim() - static_cast<int>(antiparticles_.size()); }

 private:
  friend SeaState build_sea(const MomentumLattice&);
  friend SeaState insert_states(const SeaState&, const std::vector<ComplexVector>&, const std::vector<ComplexVector>&);
  friend SeaState withdraw_states(const SeaState&, const std::vector<ComplexVector>&,
                                  const std::vector<ComplexVector>&);
  MomentumLattice lattice_;
  std::vector<Mode> modes_;
  std::vector<int> sea_;
  std::vector<ComplexVector> particles_;
  std::vector<ComplexVector> antiparticles_;
};

SeaState build_sea(const MomentumLattice& lattice);

// Particles: unit, mutually orthogonal, no weight on sea modes. Antiparticles:
// unit, mutually orthogonal, supported on sea modes. Checked to 1e-8.
SeaState insert_states(const SeaState& sea, const std::vector<ComplexVector>& particles,
                       const std::vector<ComplexVector>& antiparticles);
// Removes previously inserted vectors (matched to 1e-12).
SeaState withdraw_states(const SeaState& sea, const std::vector<ComplexVector>& particles,
                         const std::vector<ComplexVector>& antiparticles);

/// Exponential damping e^{-eps |k0|} of every plane-wave amplitude.
struct Regularization {
  double epsilon = 0.1;
  void validate() const;
};

// e^{-eps omega} a e^{-i k.x} / sqrt(V), k.x = k0 t - kvec.xvec
Spinor regularized_eval(const SeaState& sea, const Regularization& reg, int mode, const SpacetimePoint& x);

// Coefficients of the box scalar product int psi^* phi d^dx over the
// occupied states, by an exact equispaced quadrature at time t.
ComplexMatrix box_gram(const SeaState& sea, double t = 0.0);

/// P(x,y) = -(1/2pi) [ sum_sea + sum_particles - sum_antiparticles ] psi(x) psibar(y)
Matrix4 kernel_P_eps(const SeaState& sea, const Regularization& reg, const SpacetimePoint& x,
                     const SpacetimePoint& y);
// The vacuum part by the closed form sum_k e^{-2 eps omega} e^{-ik.xi} (kslash + m)/(4 pi omega V).
Matrix4 vacuum_kernel(const MomentumLattice& lattice, const Regularization& reg, const SpacetimePoint& xi);

/// <u|F(x) v> = -(1/2pi) <(Ru)(x)|(Rv)(x)>, dense in the coordinates of H.
ComplexMatrix local_correlation(const SeaState& sea, const Regularization& reg, const SpacetimePoint& x);
// F(x) as an operator point with n = 2, through a 4x4 eigenproblem.
OperatorPoint local_correlation_point(const SeaState& sea, const Regularization& reg, const SpacetimePoint& x,
                                      double tau_rank = 1e-10);

CausalFermionSystem build_cfs(const SeaState& sea, const Regularization& reg,
                              const std::vector<SpacetimePoint>& sample, const std::vector<double>& weights);

// L of the 4x4 closed chain P(x,y) P(y,x), spin dimension 2.
double kernel_lagrangian(const SeaState& sea, const Regularization& reg, const SpacetimePoint& x,
                         const SpacetimePoint& y);

/// c_j = -2 ln 2 - psi(j+1) - psi(j+2)
double series_coefficient(int j);

struct ContinuumOptions {
  int terms = 12;
  // Overrides c_j for j < size.
  std::vector<double> coefficients;
  // xi0 -> xi0 + i*time_shift; 2 eps reproduces the regularized kernel.
  double time_shift = 0.0;
};

/// T(xi) = -1/(8 pi^3 xi^2) + m^2/(32 pi^3) sum_j (-m^2 xi^2/4)^j/(j!(j+1)!) [log(-m^2 xi^2) + c_j]
/// With time_shift = 0 the timelike logarithm takes the limit from xi0 + i0.
Complex continuum_T(const SpacetimePoint& xi, double mass, const ContinuumOptions& opts = {});

/// A fermion sector: generation masses; a right-handed sector carries exactly
/// one massless summand on which X = chi_L + tau_reg chi_R.
struct Sector {
  std::vector<double> masses;
  bool right_handed = false;
};

class SectorKernel {
 public:
  SectorKernel(const MomentumLattice& base, const Regularization& reg, std::vector<Sector> sectors, double tau_reg);

  int summands() const { return static_cast<int>(seas_.size()); }
  const std::vector<Sector>& sectors() const { return sectors_; }
  // Block diagonal X on C^{4G}
  ComplexMatrix chiral_asymmetry() const;
  // P^aux(x,y) = direct sum of the generation kernels, 4G x 4G
  ComplexMatrix direct_sum(const SpacetimePoint& x, const SpacetimePoint& y) const;
  // sum over generations alpha, beta of (X P^aux)_{alpha beta}, per sector
  std::vector<Matrix4> sectorial(const SpacetimePoint& x, const SpacetimePoint& y) const;

 private:
  std::vector<Sector> sectors_;
  Regularization reg_;
  std::vector<SeaState> seas_;
  std::vector<Matrix4> x_blocks_;
  std::vector<int> sector_of_;
};

enum class PairClass { spacelike, timelike };

struct PairSample {
  SpacetimePoint x;
  SpacetimePoint y;
  PairClass cls = PairClass::spacelike;
};

// Pairs with |xi^0|, |xi^1| <= extent, discarding |xi^2| < margin. Classes alternate
// so both are equally represented. 1+1 geometry. With spatial_step > 0 the
// spatial coordinates are multiples of it (the position grid dual to the
// momentum lattice is L / (2 jmax + 1)); times stay continuous.
std::vector<PairSample> sample_pairs(std::uint64_t seed, int count, double extent, double margin,
                                     double spatial_step = 0.0);
// L / (2 jmax + 1)
double position_step(const MomentumLattice& lattice);

struct ClassStats {
  int count = 0;
  double mean = 0.0;
  double max = 0.0;
};

struct SweepRow {
  double epsilon = 0.0;
  ClassStats spacelike;
  ClassStats timelike;
  double ratio = 0.0;  // spacelike mean / timelike mean
};

SweepRow vacuum_sweep_row(const SeaState& sea, double epsilon, const std::vector<PairSample>& pairs);

}  // namespace cfs::sea
