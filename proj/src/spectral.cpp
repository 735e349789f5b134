#include "cfs/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace cfs {

void sort_spectrum(std::vector<Complex>& values) {
  std::sort(values.begin(), values.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
}

EigenSpectrum eigenvalues_dense(const ComplexMatrix& m, const SpectralOptions& opts) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << "eigenvalues_dense: matrix is " << m.rows() << "x" << m.cols() << ", not square";
    throw Error(ErrorCode::not_square, os.str());
  }
  if (m.rows() > opts.max_dimension) {
    std::ostringstream os;
    os << "eigenvalues_dense: dimension " << m.rows() << " exceeds cap " << opts.max_dimension;
    throw Error(ErrorCode::invalid_argument, os.str());
  }
  EigenSpectrum out;
  const Eigen::Index n = m.rows();
  if (n == 0) return out;

  const double scale = m.norm();
  if (scale == 0.0) {
    out.values.assign(static_cast<std::size_t>(n), Complex{});
    return out;
  }

  Eigen::ComplexEigenSolver<ComplexMatrix> solver(m, true);
  double residual = 0.0;
  if (solver.info() == Eigen::Success) {
    const auto& vals = solver.eigenvalues();
    const auto& vecs = solver.eigenvectors();
    for (Eigen::Index i = 0; i < n; ++i) {
      const ComplexVector v = vecs.col(i).normalized();
      residual = std::max(residual, (m * v - vals(i) * v).norm() / scale);
    }
  }
  if (solver.info() != Eigen::Success || residual > opts.residual_tolerance) {
    std::ostringstream os;
    os << "eigenvalues_dense: QR iteration did not converge (partial residual " << residual
       << ")";
    throw Error(ErrorCode::no_convergence, os.str());
  }
  out.residual = residual;
  out.values.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out.values[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
  sort_spectrum(out.values);
  return out;
}

double spectral_weight(std::span<const Complex> values) {
  double s = 0.0;
  for (const auto& v : values) s += std::abs(v);
  return s;
}

double spectral_weight(const EigenSpectrum& s) { return spectral_weight(std::span<const Complex>(s.values)); }

void require_hermitian(const ComplexMatrix& m, double rel_tol) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::not_square, "expected a square Hermitian matrix");
  const double defect = (m - m.adjoint()).norm();
  if (defect > rel_tol * m.norm()) {
    std::ostringstream os;
    os << "matrix is not Hermitian: ||M - M*|| = " << defect << " vs ||M|| = " << m.norm();
    throw Error(ErrorCode::not_hermitian, os.str());
  }
}

SignatureCounts signature_counts(const ComplexMatrix& m, double tau_rank) {
  require_hermitian(m);
  SignatureCounts c;
  if (m.rows() == 0) return c;
  const ComplexMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double norm = ev.cwiseAbs().maxCoeff();
  const double cut = tau_rank * norm;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cut) ++c.positive;
    else if (ev(i) < -cut) ++c.negative;
  }
  return c;
}

}  // namespace cfs
