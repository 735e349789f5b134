#include "cfs/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace cfs {

namespace {

constexpr double kOrthoTol = 1e-12;
constexpr double kDropTol = 1e-14;

void check_signature(const RealVector& nu, int spin_dim) {
  const int pos = static_cast<int>((nu.array() > 0.0).count());
  const int neg = static_cast<int>((nu.array() < 0.0).count());
  if (pos > spin_dim || neg > spin_dim) {
    std::ostringstream os;
    os << "operator point has signature (" << pos << "," << neg << ") but spin dimension is "
       << spin_dim;
    throw Error(ErrorCode::signature_violation, os.str());
  }
}

void check_pair(const OperatorPoint& x, const OperatorPoint& y) {
  if (x.dim() != y.dim() || x.spin_dimension() != y.spin_dimension()) {
    std::ostringstream os;
    os << "operator points disagree: (N,n) = (" << x.dim() << "," << x.spin_dimension()
       << ") vs (" << y.dim() << "," << y.spin_dimension() << ")";
    throw Error(ErrorCode::dimension_mismatch, os.str());
  }
}

bool is_orthonormal(const ComplexMatrix& v) {
  if (v.cols() == 0) return true;
  const ComplexMatrix g = v.adjoint() * v;
  return (g - ComplexMatrix::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff() <= kOrthoTol;
}

// Removes spectrum entries that are negligible relative to the largest one.
void drop_small(ComplexMatrix& frame, RealVector& nu) {
  if (nu.size() == 0) return;
  const double cut = kDropTol * nu.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < nu.size(); ++i)
    if (std::abs(nu(i)) > cut) keep.push_back(i);
  if (static_cast<Eigen::Index>(keep.size()) == nu.size()) return;
  ComplexMatrix f(frame.rows(), static_cast<Eigen::Index>(keep.size()));
  RealVector s(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    f.col(static_cast<Eigen::Index>(j)) = frame.col(keep[j]);
    s(static_cast<Eigen::Index>(j)) = nu(keep[j]);
  }
  frame = std::move(f);
  nu = std::move(s);
}

}  // namespace

ComplexMatrix orthonormalize_columns(const ComplexMatrix& a) {
  ComplexMatrix q = a;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    const double original = a.col(j).norm();
    for (int pass = 0; pass < 2; ++pass) {
      if (j > 0) {
        const ComplexVector coeff = q.leftCols(j).adjoint() * q.col(j);
        q.col(j) -= q.leftCols(j) * coeff;
      }
    }
    const double nrm = q.col(j).norm();
    if (original == 0.0 || nrm <= 1e-12 * original) {
      std::ostringstream os;
      os << "column " << j << " is linearly dependent on the previous ones";
      throw Error(ErrorCode::invalid_argument, os.str());
    }
    q.col(j) /= nrm;
  }
  return q;
}

OperatorPoint OperatorPoint::from_orthonormal(ComplexMatrix frame, RealVector spectrum, int spin_dim) {
  if (spin_dim < 1) throw Error(ErrorCode::invalid_argument, "spin dimension must be positive");
  if (frame.cols() != spectrum.size())
    throw Error(ErrorCode::dimension_mismatch, "frame column count differs from spectrum length");
  if (spectrum.size() > 2 * spin_dim)
    throw Error(ErrorCode::signature_violation, "rank exceeds 2n");
  if (!is_orthonormal(frame))
    throw Error(ErrorCode::invalid_argument, "frame columns are not orthonormal to 1e-12");
  check_signature(spectrum, spin_dim);
  OperatorPoint p;
  p.dim_ = static_cast<int>(frame.rows());
  p.spin_dim_ = spin_dim;
  p.frame_ = std::move(frame);
  p.spectrum_ = std::move(spectrum);
  return p;
}

OperatorPoint make_operator_point(const ComplexMatrix& frame, const RealVector& spectrum, int spin_dim) {
  if (spin_dim < 1) throw Error(ErrorCode::invalid_argument, "spin dimension must be positive");
  if (frame.cols() != spectrum.size())
    throw Error(ErrorCode::dimension_mismatch, "frame column count differs from spectrum length");
  if (frame.rows() < 1) throw Error(ErrorCode::invalid_argument, "Hilbert space dimension must be positive");

  ComplexMatrix v;
  RealVector nu;
  if (is_orthonormal(frame)) {
    v = frame;
    nu = spectrum;
  } else {
    // V = Q R, so V diag(nu) V^* = Q (R diag(nu) R^*) Q^*.
    const ComplexMatrix q = orthonormalize_columns(frame);
    const ComplexMatrix r = q.adjoint() * frame;
    ComplexMatrix h = r * spectrum.cast<Complex>().asDiagonal() * r.adjoint();
    h = 0.5 * (h + h.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
    v = q * es.eigenvectors();
    nu = es.eigenvalues();
  }
  drop_small(v, nu);
  if (nu.size() > 2 * spin_dim) {
    std::ostringstream os;
    os << "rank " << nu.size() << " exceeds 2n = " << 2 * spin_dim;
    throw Error(ErrorCode::signature_violation, os.str());
  }
  check_signature(nu, spin_dim);

  OperatorPoint p;
  p.dim_ = static_cast<int>(frame.rows());
  p.spin_dim_ = spin_dim;
  p.frame_ = std::move(v);
  p.spectrum_ = std::move(nu);
  return p;
}

ComplexMatrix OperatorPoint::dense() const {
  if (rank() == 0) return ComplexMatrix::Zero(dim_, dim_);
  return frame_ * spectrum_.cast<Complex>().asDiagonal() * frame_.adjoint();
}

SignatureCounts OperatorPoint::signature() const {
  SignatureCounts c;
  c.positive = static_cast<int>((spectrum_.array() > 0.0).count());
  c.negative = static_cast<int>((spectrum_.array() < 0.0).count());
  return c;
}

std::vector<Complex> product_spectrum(const OperatorPoint& x, const OperatorPoint& y) {
  check_pair(x, y);
  const auto two_n = static_cast<std::size_t>(2 * x.spin_dimension());
  std::vector<Complex> out;
  if (x.rank() > 0 && y.rank() > 0) {
    const ComplexMatrix overlap = x.frame().adjoint() * y.frame();
    const ComplexMatrix reduced = x.spectrum().cast<Complex>().asDiagonal() * overlap *
                                  y.spectrum().cast<Complex>().asDiagonal() * overlap.adjoint();
    out = eigenvalues_dense(reduced).values;
  }
  out.resize(two_n, Complex{});
  sort_spectrum(out);
  return out;
}

ComplexMatrix kernel(const OperatorPoint& x, const OperatorPoint& y) {
  check_pair(x, y);
  if (x.rank() == 0 || y.rank() == 0) return ComplexMatrix::Zero(x.rank(), y.rank());
  return (x.frame().adjoint() * y.frame()) * y.spectrum().cast<Complex>().asDiagonal();
}

ComplexMatrix closed_chain(const OperatorPoint& x, const OperatorPoint& y) {
  return kernel(x, y) * kernel(y, x);
}

double lagrangian_mu_from_spectrum(std::span<const Complex> lambda, double mu) {
  double sq = 0.0;
  double abs_sum = 0.0;
  for (const auto& l : lambda) {
    sq += std::norm(l);
    abs_sum += std::abs(l);
  }
  return sq - mu * abs_sum * abs_sum;
}

double lagrangian_from_spectrum(std::span<const Complex> lambda, int spin_dim) {
  // Nonnegative by Cauchy-Schwarz; negative values are rounding noise.
  return std::max(0.0, lagrangian_mu_from_spectrum(lambda, 1.0 / (2.0 * spin_dim)));
}

double lagrangian(const OperatorPoint& x, const OperatorPoint& y) {
  const auto lambda = product_spectrum(x, y);
  return lagrangian_from_spectrum(lambda, x.spin_dimension());
}

CausalRelation causal_classify(const OperatorPoint& x, const OperatorPoint& y, double tau_causal) {
  const auto lambda = product_spectrum(x, y);
  const double w = spectral_weight(lambda);
  const double l = lagrangian_from_spectrum(lambda, x.spin_dimension());
  CausalRelation rel;
  rel.degenerate = (w == 0.0);
  const double threshold = tau_causal * w * w / (2.0 * x.spin_dimension());
  rel.type = (l <= threshold) ? CausalType::spacelike : CausalType::non_spacelike;
  return rel;
}

PairData pair_data(const OperatorPoint& x, const OperatorPoint& y) {
  PairData d;
  d.lambda = product_spectrum(x, y);
  d.kernel_xy = kernel(x, y);
  d.lagrangian = lagrangian_from_spectrum(d.lambda, x.spin_dimension());
  return d;
}

CausalFermionSystem::CausalFermionSystem(int dim, int spin_dim, DiscreteMeasure measure)
    : dim_(dim), spin_dim_(spin_dim), measure_(std::move(measure)) {
  if (dim < 1 || spin_dim < 1)
    throw Error(ErrorCode::invalid_argument, "system needs positive N and n");
  for (std::size_t a = 0; a < measure_.atoms.size(); ++a) {
    const auto& atom = measure_.atoms[a];
    if (!(atom.weight > 0.0)) {
      std::ostringstream os;
      os << "atom " << a << " has non-positive weight " << atom.weight;
      throw Error(ErrorCode::invalid_argument, os.str());
    }
    if (atom.point.dim() != dim || atom.point.spin_dimension() != spin_dim) {
      std::ostringstream os;
      os << "atom " << a << " has (N,n) = (" << atom.point.dim() << ","
         << atom.point.spin_dimension() << "), system expects (" << dim << "," << spin_dim << ")";
      throw Error(ErrorCode::dimension_mismatch, os.str());
    }
  }
}

std::vector<std::vector<Complex>> pair_spectra(const CausalFermionSystem& system, unsigned threads) {
  const std::size_t k = system.size();
  std::vector<std::pair<std::size_t, std::size_t>> upper;
  upper.reserve(k * (k + 1) / 2);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a; b < k; ++b) upper.emplace_back(a, b);

  std::vector<std::vector<Complex>> out(k * k);
  const auto& atoms = system.atoms();
  parallel_for(upper.size(), threads, [&](std::size_t i) {
    const auto [a, b] = upper[i];
    out[a * k + b] = product_spectrum(atoms[a].point, atoms[b].point);
  });
  // spectrum(x_b x_a) = spectrum(x_a x_b)
  for (const auto& [a, b] : upper)
    if (a != b) out[b * k + a] = out[a * k + b];
  return out;
}

double action(const CausalFermionSystem& system) {
  if (system.size() == 0) throw Error(ErrorCode::invalid_argument, "action of an empty measure");
  const auto spectra = pair_spectra(system);
  const std::size_t k = system.size();
  const auto& atoms = system.atoms();
  std::vector<double> terms(k * k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      terms[a * k + b] = atoms[a].weight * atoms[b].weight *
                         lagrangian_from_spectrum(spectra[a * k + b], system.spin_dimension());
  return pairwise_sum(terms);
}

Constraints constraints(const CausalFermionSystem& system) {
  if (system.size() == 0) throw Error(ErrorCode::invalid_argument, "constraints of an empty measure");
  const auto spectra = pair_spectra(system);
  const std::size_t k = system.size();
  const auto& atoms = system.atoms();
  std::vector<double> vol(k), tr(k), bnd(k * k);
  for (std::size_t a = 0; a < k; ++a) {
    vol[a] = atoms[a].weight;
    tr[a] = atoms[a].weight * atoms[a].point.trace();
    for (std::size_t b = 0; b < k; ++b) {
      const double w = spectral_weight(spectra[a * k + b]);
      bnd[a * k + b] = atoms[a].weight * atoms[b].weight * w * w;
    }
  }
  return {pairwise_sum(vol), pairwise_sum(tr), pairwise_sum(bnd)};
}

}  // namespace cfs
