#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

#include "cfs/core.hpp"

namespace cfs::experiments {

// Haar-random frame with n positive and n negative eigenvalues, moduli
// uniform in [0.3, 2].
OperatorPoint random_operator_point(std::mt19937_64& rng, int dim, int spin_dim);

// Atoms with random points and weights, trace-rescaled to trace_target and
// weights normalized to volume_target.
CausalFermionSystem random_system(std::mt19937_64& rng, int atoms, int dim, int spin_dim,
                                  double volume_target = 1.0, double trace_target = 1.0);

// Worst distance between paired elements after greedy closest matching;
// infinity when the sizes differ.
double multiset_distance(std::vector<Complex> a, std::vector<Complex> b);

struct CoincidenceRow {
  int pair = 0;
  int dim = 0;
  int spin_dim = 0;
  double distance = 0.0;  // closed chain vs dense xy, nonzero part
  double scale = 0.0;     // largest modulus
  double relative() const { return scale > 0 ? distance / scale : distance; }
};

/// For every (dim, spin_dim) combination, `pairs` random (x, y): eigenvalues
/// of the 2n x 2n closed chain against the 2n largest of the dense N x N
/// product xy. Pair i draws from its own stream seeded by (seed, i), so the
/// rows do not depend on the thread count.
std::vector<CoincidenceRow> eigen_coincidence(std::uint64_t seed, int pairs, const std::vector<int>& dims,
                                              const std::vector<int>& spin_dims, unsigned threads = 1);

// pair,dim,spin_dim,distance,scale,relative
void write_coincidence_csv(std::ostream& out, const std::vector<CoincidenceRow>& rows);

}  // namespace cfs::experiments
