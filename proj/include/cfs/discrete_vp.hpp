#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "cfs/common.hpp"

namespace cfs::dvp {

/// C^d with the indefinite inner product <u|v> = u^* S v, S = diag(+-1).
class KreinSpace {
 public:
  explicit KreinSpace(std::vector<int> signs);
  // Canonical form: each block of size 2k gets diag(+I_k, -I_k).
  static KreinSpace canonical(const std::vector<int>& block_sizes);

  int dim() const { return static_cast<int>(signs_.size()); }
  int plus() const;
  int minus() const { return dim() - plus(); }
  const std::vector<int>& signs() const { return signs_; }
  ComplexMatrix matrix() const;

 private:
  std::vector<int> signs_;
};

struct Block {
  int offset = 0;
  int size = 0;
};

/// Discrete spacetime: an ordered partition of {0..d-1} into index ranges.
class SpacetimePartition {
 public:
  explicit SpacetimePartition(std::vector<int> sizes);

  int count() const { return static_cast<int>(blocks_.size()); }
  int dim() const { return dim_; }
  const Block& block(int x) const;
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  std::vector<Block> blocks_;
  int dim_ = 0;
};

// S M^* S
ComplexMatrix krein_adjoint(const ComplexMatrix& m, const KreinSpace& s);

// ||S P^* S - P|| <= rel_tol ||P||
bool is_krein_selfadjoint(const ComplexMatrix& p, const KreinSpace& s, double rel_tol = 1e-10);

struct AdmissibilityReport {
  bool admissible = false;
  bool krein_selfadjoint = false;
  bool trace_ok = false;
  bool rank_ok = false;
  bool positive = false;
  Complex trace;
  int rank = 0;
  // smallest value of u^* S (-P) u / ||u||^2 over the probes
  double min_probe_value = 0.0;
  ComplexVector witness;  // probe attaining the minimum when positivity fails
};

// Checks tr P = f, rank P <= f and positivity of -P (on the eigenbasis of the
// Hermitian matrix -SP plus `random_probes` random vectors).
AdmissibilityReport check_admissible(const ComplexMatrix& p, int f, const KreinSpace& s,
                                     double tau_rank = 1e-10, int random_probes = 64,
                                     std::uint64_t seed = 0);

// E_x P E_y as a block matrix.
ComplexMatrix discrete_kernel(const ComplexMatrix& p, const SpacetimePartition& part, int x, int y);

// A_xy = P(x,y) P(y,x)
ComplexMatrix discrete_chain(const ComplexMatrix& p, const SpacetimePartition& part, int x, int y);

/// S[P] = sum_{x,y} |A_xy^2|
double discrete_action(const ComplexMatrix& p, const SpacetimePartition& part);
/// T[P] = sum_{x,y} |A_xy|^2
double discrete_constraint(const ComplexMatrix& p, const SpacetimePartition& part);
/// S_mu[P] = sum_{x,y} (|A_xy^2| - mu |A_xy|^2)
double discrete_action_mu(const ComplexMatrix& p, const SpacetimePartition& part, double mu);

// U P U^{-1} with U = exp(itG). G must be Krein self-adjoint. When `verify`
// is set the preserved quantities (Krein symmetry, trace, rank, positivity of
// -P) are re-checked and a violation throws.
ComplexMatrix unitary_flow_step(const ComplexMatrix& p, const ComplexMatrix& g, double t, const KreinSpace& s,
                                bool verify = true);

// Gradient kernel R of S_mu: dS_mu = 2 Re tr(R dP). Block pairs whose
// closed chain has a vanishing or repeated eigenvalue are differentiated
// numerically.
struct GradientKernel {
  ComplexMatrix r;
  int fd_blocks = 0;
};
GradientKernel gradient_kernel(const ComplexMatrix& p, const SpacetimePartition& part, double mu);
// The same quantity from central differences of S_mu in every entry of P.
ComplexMatrix gradient_kernel_fd(const ComplexMatrix& p, const SpacetimePartition& part, double mu,
                                 double h = 1e-6);

// Q = (R + R^*)/4 with the Krein adjoint.
ComplexMatrix q_operator(const ComplexMatrix& r, const KreinSpace& s);

/// ||PQ - QP||_F
double el_residual(const ComplexMatrix& p, const SpacetimePartition& part, const KreinSpace& s, double mu);

struct FlowConfig {
  double mu = 0.25;
  int max_iters = 2000;
  double step_init = 1e-2;
  double armijo = 1e-4;
  // stop once ||[P,Q]|| falls below this fraction of its start value
  double residual_reduction = 0.0;
  // keep T[P] fixed by projecting the generator onto its level set
  bool preserve_constraint = false;
  // generator restricted to these blocks (empty = all)
  std::vector<int> region;
};

struct FlowRecord {
  int iter = 0;
  double action = 0.0;
  double constraint = 0.0;
  double el_residual = 0.0;
  double step = 0.0;
};

struct FlowResult {
  ComplexMatrix p;
  std::vector<FlowRecord> log;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  bool stalled = false;
};

// Descent on S_mu along Krein-unitary flows P -> U P U^{-1}.
FlowResult flow_descent(const ComplexMatrix& p, const SpacetimePartition& part, const KreinSpace& s,
                        const FlowConfig& cfg);

struct HilbertReconstruction {
  int dim = 0;
  // Columns e_i with e_i^* (-SP) e_j = delta_ij spanning the positive part.
  ComplexMatrix basis;
  RealVector eigenvalues;
};

// Diagonalizes G = -SP, drops eigenvalues below tau ||G||; throws
// inadmissible if G has an eigenvalue below -tau ||G||.
HilbertReconstruction reconstruct_hilbert(const ComplexMatrix& p, const KreinSpace& s, double tau = 1e-10);

// Random admissible projector of trace f: P = -W W^* S with W^* S W = -I_f.
ComplexMatrix random_admissible(std::uint64_t seed, const KreinSpace& s, int f);

// Random Krein self-adjoint generator, block diagonal when `part` is given.
ComplexMatrix random_generator(std::uint64_t seed, const KreinSpace& s, const SpacetimePartition* part = nullptr);

/// Plain-text container:
///   cfs-dvp 1
///   dim <d>
///   signs <s_1> ... <s_d>
///   blocks <count> <size_1> ... <size_count>
///   P            (d rows of d "re im" pairs)
///   end
struct DvpProblem {
  KreinSpace space{std::vector<int>{}};
  SpacetimePartition partition{std::vector<int>{}};
  ComplexMatrix p;
};
void write_problem(std::ostream& out, const DvpProblem& problem);
DvpProblem read_problem(std::istream& in);

// iter,action,constraint,el_residual,step
void write_flow_csv(std::ostream& out, const std::vector<FlowRecord>& log);

}  // namespace cfs::dvp
