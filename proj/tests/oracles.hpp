#pragma once
// Independent reference computations used only by the test suites. Nothing
// here calls into the eigen solvers of the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <vector>

#include "cfs/common.hpp"
#include "cfs/core.hpp"

namespace cfs::oracle {

using LComplex = std::complex<long double>;

// Coefficients c_0..c_n of det(lambda I - M) = sum c_k lambda^k (c_n = 1), by
// the Faddeev-LeVerrier recursion in extended precision.
inline std::vector<LComplex> characteristic_polynomial(const ComplexMatrix& m) {
  const auto n = static_cast<std::size_t>(m.rows());
  using LMat = std::vector<std::vector<LComplex>>;
  LMat a(n, std::vector<LComplex>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a[i][j] = LComplex(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)).real(),
                         m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)).imag());
  std::vector<LComplex> c(n + 1);
  c[n] = 1;
  LMat mk(n, std::vector<LComplex>(n));  // M_0 = 0
  for (std::size_t k = 1; k <= n; ++k) {
    // M_k = A M_{k-1} + c_{n-k+1} I
    LMat next(n, std::vector<LComplex>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        LComplex s = 0;
        for (std::size_t l = 0; l < n; ++l) s += a[i][l] * mk[l][j];
        next[i][j] = s + (i == j ? c[n - k + 1] : LComplex(0));
      }
    mk = std::move(next);
    LComplex tr = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < n; ++l) tr += a[i][l] * mk[l][i];
    c[n - k] = -tr / static_cast<long double>(k);
  }
  return c;
}

// All roots of sum c_k z^k by Aberth-Ehrlich simultaneous iteration.
inline std::vector<Complex> polynomial_roots(const std::vector<LComplex>& c) {
  const std::size_t n = c.size() - 1;
  std::vector<Complex> out;
  if (n == 0) return out;
  long double bound = 0;
  for (std::size_t k = 0; k < n; ++k) bound = std::max(bound, std::abs(c[k] / c[n]));
  bound = 1 + bound;
  std::vector<LComplex> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const long double ang = 2.0L * 3.14159265358979323846L * (i + 0.25L) / n + 0.4L;
    z[i] = std::polar(0.5L * bound, ang);
  }
  auto eval = [&](LComplex x, LComplex& p, LComplex& dp) {
    p = c[n];
    dp = 0;
    for (std::size_t k = n; k-- > 0;) {
      dp = dp * x + p;
      p = p * x + c[k];
    }
  };
  for (int it = 0; it < 2000; ++it) {
    long double worst = 0;
    for (std::size_t i = 0; i < n; ++i) {
      LComplex p, dp;
      eval(z[i], p, dp);
      if (p == LComplex(0)) continue;
      const LComplex ratio = p / dp;
      LComplex s = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) s += 1.0L / (z[i] - z[j]);
      const LComplex w = ratio / (1.0L - ratio * s);
      z[i] -= w;
      worst = std::max(worst, std::abs(w) / std::max(1.0L, std::abs(z[i])));
    }
    if (worst < 1e-18L) break;
  }
  for (const auto& r : z) out.emplace_back(static_cast<double>(r.real()), static_cast<double>(r.imag()));
  return out;
}

inline std::vector<Complex> eigenvalues_by_char_poly(const ComplexMatrix& m) {
  return polynomial_roots(characteristic_polynomial(m));
}

// Largest distance between paired elements after greedy closest matching.
inline double multiset_distance(std::vector<Complex> a, std::vector<Complex> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  while (!a.empty()) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) {
        const double d = std::abs(a[i] - b[j]);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    worst = std::max(worst, best);
    a.erase(a.begin() + static_cast<long>(bi));
    b.erase(b.begin() + static_cast<long>(bj));
  }
  return worst;
}

inline double max_modulus(const std::vector<Complex>& v) {
  double m = 0.0;
  for (const auto& x : v) m = std::max(m, std::abs(x));
  return m;
}

// Keeps the k values of largest modulus.
inline std::vector<Complex> largest(std::vector<Complex> v, std::size_t k) {
  std::sort(v.begin(), v.end(), [](const Complex& a, const Complex& b) { return std::abs(a) > std::abs(b); });
  v.resize(std::min(k, v.size()));
  return v;
}

// Drops values with modulus below rel * max modulus.
inline std::vector<Complex> nonzero(const std::vector<Complex>& v, double rel = 1e-8) {
  const double cut = rel * max_modulus(v);
  std::vector<Complex> out;
  for (const auto& x : v)
    if (std::abs(x) > cut) out.push_back(x);
  return out;
}

using Rng = std::mt19937_64;

inline ComplexMatrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = Complex(g(rng), g(rng));
  return m;
}

inline ComplexMatrix random_hermitian(Rng& rng, Eigen::Index n) {
  const ComplexMatrix a = random_matrix(rng, n, n);
  return 0.5 * (a + a.adjoint());
}

inline ComplexMatrix random_unitary(Rng& rng, Eigen::Index n) {
  const ComplexMatrix a = random_matrix(rng, n, n);
  Eigen::HouseholderQR<ComplexMatrix> qr(a);
  ComplexMatrix q = qr.householderQ();
  return q;
}

// Random operator point with n_pos positive and n_neg negative eigenvalues.
inline OperatorPoint random_point(Rng& rng, int dim, int spin_dim, int n_pos, int n_neg) {
  std::uniform_real_distribution<double> u(0.3, 2.0);
  const int r = n_pos + n_neg;
  const ComplexMatrix frame = random_unitary(rng, dim).leftCols(r);
  RealVector nu(r);
  for (int i = 0; i < n_pos; ++i) nu(i) = u(rng);
  for (int i = 0; i < n_neg; ++i) nu(n_pos + i) = -u(rng);
  return make_operator_point(frame, nu, spin_dim);
}

inline OperatorPoint random_point(Rng& rng, int dim, int spin_dim) {
  return random_point(rng, dim, spin_dim, spin_dim, spin_dim);
}

}  // namespace cfs::oracle
