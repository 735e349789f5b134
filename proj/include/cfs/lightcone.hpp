#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

#include "cfs/common.hpp"
#include "cfs/dirac_sea.hpp"

namespace cfs::lc {

using Point = sea::SpacetimePoint;

/// alpha -> F(alpha), a square matrix of fixed dimension.
struct MatrixPath {
  int dim = 0;
  std::function<ComplexMatrix(double)> eval;
};

enum class PexpMethod { dyson, ode };

struct PexpOptions {
  PexpMethod method = PexpMethod::dyson;
  int order = 12;     // Dyson terms kept, at most 12
  int nodes = 16;     // Gauss-Legendre nodes per segment, >= 4
  int segments = 0;   // 0: chosen so that int |F| over each segment is <= 1/4
  double tolerance = 1e-10;  // ODE step control (absolute and relative)
};

/// Ordered exponential with earlier parameters on the left:
///   sum_K int_{a <= t1 <= ... <= tK <= b} F(t1) ... F(tK),
/// so U(a, c) = U(a, b) U(b, c) and dU(a, b)/db = U(a, b) F(b).
ComplexMatrix ordered_exp(const MatrixPath& path, double a, double b, const PexpOptions& opts = {});

// Nodes and weights on [0, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussRule gauss_legendre(int n);

/// int_0^1 alpha^l (1-alpha)^r (alpha - alpha^2)^n f(alpha y + (1-alpha) x) dalpha
struct LineIntegralSpec {
  int l = 0;
  int r = 0;
  int n = 0;
  int nodes = 32;
  void validate() const;
};

Complex line_integral(const std::function<Complex(const Point&)>& f, const Point& x, const Point& y,
                      const LineIntegralSpec& spec);
ComplexMatrix line_integral(const std::function<ComplexMatrix(const Point&)>& f, const Point& x, const Point& y,
                            const LineIntegralSpec& spec);

enum class Chirality { left, right };
const sea::Matrix4& chiral_projector(Chirality c);

// Contravariant components A^0..A^3 of the chiral potential at a point, each a
// square gauge-space matrix (1x1 for an abelian field).
using ChiralPotential = std::function<std::array<ComplexMatrix, 4>(const Point&, Chirality)>;

/// Pexp(-i int_0^1 A^j_c(alpha y + (1-alpha) x) (y-x)_j dalpha), indices
/// lowered with diag(1,-1,-1,-1).
ComplexMatrix gauge_phase(const ChiralPotential& field, Chirality c, const Point& x, const Point& y,
                          const PexpOptions& opts = {});

// F(t) = sum_h (A_h cos(h t) + B_h sin(h t)), h = 0..harmonics, with complex
// Gaussian coefficients scaled so that sum_h (|A_h| + |B_h|)_2 = scale.
MatrixPath random_smooth_path(std::mt19937_64& rng, int dim, double scale, int harmonics = 2);

struct PexpConvergenceRow {
  int order = 0;
  double error = 0.0;  // ||Dyson_K - ODE||_F
  double bound = 0.0;  // sqrt(dim) e^M M^{K+1} / (K+1)!
};
// Single-segment Dyson at orders 0..max_order against the ODE oracle on [a, b].
std::vector<PexpConvergenceRow> pexp_convergence(const MatrixPath& path, double a, double b, int max_order);
void write_pexp_csv(std::ostream& out, const std::vector<PexpConvergenceRow>& rows);

// M = int_a^b ||F||_2 by Gauss-Legendre; the Dyson term of order K is at most M^K/K!.
double path_magnitude(const MatrixPath& path, double a, double b, int nodes = 32);

}  // namespace cfs::lc
