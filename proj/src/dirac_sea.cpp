#include "cfs/dirac_sea.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace cfs::sea {

namespace {

constexpr double kEta[4] = {1.0, -1.0, -1.0, -1.0};

GammaBasis make_gamma() {
  Eigen::Matrix2cd s1, s2, s3, id2;
  s1 << 0, 1, 1, 0;
  s2 << 0, -kI, kI, 0;
  s3 << 1, 0, 0, -1;
  id2.setIdentity();
  GammaBasis g;
  g.gamma[0].setZero();
  g.gamma[0].topLeftCorner<2, 2>() = id2;
  g.gamma[0].bottomRightCorner<2, 2>() = -id2;
  const Eigen::Matrix2cd* sig[3] = {&s1, &s2, &s3};
  for (int j = 0; j < 3; ++j) {
    g.gamma[j + 1].setZero();
    g.gamma[j + 1].topRightCorner<2, 2>() = *sig[j];
    g.gamma[j + 1].bottomLeftCorner<2, 2>() = -*sig[j];
  }
  g.gamma5 = kI * g.gamma[0] * g.gamma[1] * g.gamma[2] * g.gamma[3];
  g.chi_left = 0.5 * (Matrix4::Identity() - g.gamma5);
  g.chi_right = 0.5 * (Matrix4::Identity() + g.gamma5);
  if (anticommutator_defect(g) > 1e-14) throw Error(ErrorCode::invalid_argument, "gamma matrices fail the Clifford relations");
  return g;
}

Spinor column_of(const Matrix4& m, int c) { return m.col(c); }

Spinor mode_from_projector(const Matrix4& p, int first, int spin) {
  if (spin != 0 && spin != 1) throw Error(ErrorCode::invalid_argument, "spin index must be 0 or 1");
  Spinor a = column_of(p, first);
  a.normalize();
  if (spin == 0) return a;
  Spinor b = column_of(p, first + 1);
  b -= a * a.dot(b);
  b -= a * a.dot(b);
  return b.normalized();
}

double mode_weight(const Regularization& reg, double omega) { return std::exp(-reg.epsilon * omega); }

// e^{-i k.x} for k0 = s omega
Complex plane_wave(const Mode& m, const SpacetimePoint& x) {
  const double phase = -(m.energy_sign * m.omega * x[0] - (m.k[0] * x[1] + m.k[1] * x[2] + m.k[2] * x[3]));
  return std::polar(1.0, phase);
}

// 4 x coordinate_dim matrix of regularized state values at x.
ComplexMatrix coordinate_values(const SeaState& sea, const Regularization& reg, const SpacetimePoint& x) {
  const auto& modes = sea.modes();
  ComplexMatrix all(4, static_cast<Eigen::Index>(modes.size()));
  for (std::size_t l = 0; l < modes.size(); ++l)
    all.col(static_cast<Eigen::Index>(l)) = regularized_eval(sea, reg, static_cast<int>(l), x);
  ComplexMatrix b(4, sea.coordinate_dim());
  Eigen::Index c = 0;
  for (int l : sea.sea_modes()) b.col(c++) = all.col(l);
  for (const auto& p : sea.particles()) b.col(c++) = all * p;
  return b;
}

// I - sum_a a a^* in H coordinates.
ComplexMatrix removal_projector(const SeaState& sea) {
  const int n = sea.coordinate_dim();
  ComplexMatrix m = ComplexMatrix::Identity(n, n);
  if (sea.antiparticles().empty()) return m;
  const auto& seam = sea.sea_modes();
  for (const auto& a : sea.antiparticles()) {
    ComplexVector v = ComplexVector::Zero(n);
    for (std::size_t i = 0; i < seam.size(); ++i) v(static_cast<Eigen::Index>(i)) = a(seam[i]);
    m -= v * v.adjoint();
  }
  return m;
}

void check_point_count(const SeaState& sea, const SpacetimePoint& x) {
  for (double v : x)
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "spacetime point has a non-finite coordinate");
  (void)sea;
}

std::vector<ComplexVector> checked_family(const std::vector<ComplexVector>& vs, const SeaState& sea, bool in_sea,
                                          const char* what) {
  const auto n = static_cast<Eigen::Index>(sea.modes().size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (vs[i].size() != n) {
      std::ostringstream os;
      os << what << " " << i << " has " << vs[i].size() << " coefficients, expected " << n;
      throw Error(ErrorCode::dimension_mismatch, os.str());
    }
    double off = 0.0;
    for (Eigen::Index l = 0; l < n; ++l) {
      const bool is_sea = sea.modes()[static_cast<std::size_t>(l)].energy_sign < 0;
      if (is_sea != in_sea) off += std::norm(vs[i](l));
    }
    if (std::sqrt(off) > 1e-8) {
      std::ostringstream os;
      os << what << " " << i << (in_sea ? " leaves the sea span" : " overlaps the sea") << " by " << std::sqrt(off);
      throw Error(ErrorCode::invalid_argument, os.str());
    }
  }
  return vs;
}

void check_orthonormal(const std::vector<ComplexVector>& vs, const char* what) {
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = i; j < vs.size(); ++j) {
      const Complex g = vs[i].dot(vs[j]);
      const double want = i == j ? 1.0 : 0.0;
      if (std::abs(g - want) > 1e-8) {
        std::ostringstream os;
        os << what << " vectors " << i << "," << j << " are not orthonormal (overlap " << std::abs(g) << ")";
        throw Error(ErrorCode::invalid_argument, os.str());
      }
    }
}

}  // namespace

Matrix4 GammaBasis::slash(const std::array<double, 4>& k) const {
  Matrix4 m = Matrix4::Zero();
  for (int mu = 0; mu < 4; ++mu) m += (kEta[mu] * k[static_cast<std::size_t>(mu)]) * gamma[static_cast<std::size_t>(mu)];
  return m;
}

const GammaBasis& gamma_basis() {
  static const GammaBasis g = make_gamma();
  return g;
}

double anticommutator_defect(const GammaBasis& g) {
  double worst = 0.0;
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu) {
      const auto& a = g.gamma[static_cast<std::size_t>(mu)];
      const auto& b = g.gamma[static_cast<std::size_t>(nu)];
      Matrix4 d = a * b + b * a;
      if (mu == nu) d -= 2.0 * kEta[mu] * Matrix4::Identity();
      worst = std::max(worst, d.norm());
    }
  return worst;
}

double energy(const Momentum& k, double mass) { return std::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2] + mass * mass); }

Matrix4 energy_projector(const Momentum& k, double mass, int sign) {
  if (sign != 1 && sign != -1) throw Error(ErrorCode::invalid_argument, "energy sign must be +1 or -1");
  const double w = energy(k, mass);
  if (w == 0.0) throw Error(ErrorCode::invalid_argument, "energy projector undefined at zero energy");
  const auto& g = gamma_basis();
  const double k0 = sign * w;
  return (g.slash({k0, k[0], k[1], k[2]}) + mass * Matrix4::Identity()) * g.gamma[0] / (2.0 * k0);
}

Spinor negative_energy_mode(const Momentum& k, double mass, int spin) {
  return mode_from_projector(energy_projector(k, mass, -1), 2, spin);
}

Spinor positive_energy_mode(const Momentum& k, double mass, int spin) {
  return mode_from_projector(energy_projector(k, mass, 1), 0, spin);
}

void MomentumLattice::validate() const {
  if (!(length > 0.0) || !std::isfinite(length)) throw Error(ErrorCode::invalid_argument, "lattice length must be positive");
  if (points < 1) throw Error(ErrorCode::invalid_argument, "lattice needs at least one point per axis");
  if (!(mass >= 0.0) || !std::isfinite(mass)) throw Error(ErrorCode::invalid_argument, "mass must be nonnegative");
  const long long per_axis = 2 * ((points - 1) / 2) + 1;
  long long count = per_axis;
  if (mode == DimensionMode::d3p1) count = per_axis * per_axis * per_axis;
  if (count > kMaxMomenta) {
    std::ostringstream os;
    os << "lattice has " << count << " momenta, cap is " << kMaxMomenta;
    throw Error(ErrorCode::invalid_argument, os.str());
  }
}

double MomentumLattice::volume() const { return std::pow(length, spatial_dims()); }

std::vector<Momentum> MomentumLattice::momenta() const {
  validate();
  const int jmax = (points - 1) / 2;
  const double dk = 2.0 * kPi / length;
  std::vector<Momentum> out;
  auto keep = [&](const Momentum& k) {
    if (mass > 0.0 || k[0] != 0.0 || k[1] != 0.0 || k[2] != 0.0) out.push_back(k);
  };
  if (mode == DimensionMode::d1p1) {
    for (int j = -jmax; j <= jmax; ++j) keep({dk * j, 0.0, 0.0});
  } else {
    for (int a = -jmax; a <= jmax; ++a)
      for (int b = -jmax; b <= jmax; ++b)
        for (int c = -jmax; c <= jmax; ++c) keep({dk * a, dk * b, dk * c});
  }
  return out;
}

SeaState build_sea(const MomentumLattice& lattice) {
  SeaState s;
  s.lattice_ = lattice;
  for (const auto& k : lattice.momenta()) {
    const double w = energy(k, lattice.mass);
    for (int sign : {-1, 1})
      for (int spin = 0; spin < 2; ++spin) {
        Mode m;
        m.k = k;
        m.omega = w;
        m.energy_sign = sign;
        m.spin = spin;
        m.amplitude = sign < 0 ? negative_energy_mode(k, lattice.mass, spin) : positive_energy_mode(k, lattice.mass, spin);
        if (sign < 0) s.sea_.push_back(static_cast<int>(s.modes_.size()));
        s.modes_.push_back(std::move(m));
      }
  }
  return s;
}

SeaState insert_states(const SeaState& sea, const std::vector<ComplexVector>& particles,
                       const std::vector<ComplexVector>& antiparticles) {
  SeaState out = sea;
  for (const auto& p : checked_family(particles, sea, false, "particle")) out.particles_.push_back(p);
  for (const auto& a : checked_family(antiparticles, sea, true, "antiparticle")) out.antiparticles_.push_back(a);
  check_orthonormal(out.particles_, "particle");
  check_orthonormal(out.antiparticles_, "antiparticle");
  return out;
}

SeaState withdraw_states(const SeaState& sea, const std::vector<ComplexVector>& particles,
                         const std::vector<ComplexVector>& antiparticles) {
  SeaState out = sea;
  auto drop = [](std::vector<ComplexVector>& from, const ComplexVector& v, const char* what) {
    for (auto it = from.begin(); it != from.end(); ++it)
      if (it->size() == v.size() && (*it - v).norm() <= 1e-12) {
        from.erase(it);
        return;
      }
    throw Error(ErrorCode::invalid_argument, std::string(what) + " to withdraw was never inserted");
  };
  for (const auto& p : particles) drop(out.particles_, p, "particle");
  for (const auto& a : antiparticles) drop(out.antiparticles_, a, "antiparticle");
  return out;
}

void Regularization::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::invalid_argument, "regularization length must be positive");
}

Spinor regularized_eval(const SeaState& sea, const Regularization& reg, int mode, const SpacetimePoint& x) {
  reg.validate();
  if (mode < 0 || mode >= static_cast<int>(sea.modes().size()))
    throw Error(ErrorCode::invalid_argument, "mode index out of range");
  const Mode& m = sea.modes()[static_cast<std::size_t>(mode)];
  return (mode_weight(reg, m.omega) / std::sqrt(sea.lattice().volume())) * plane_wave(m, x) * m.amplitude;
}

ComplexMatrix box_gram(const SeaState& sea, double t) {
  const auto& lat = sea.lattice();
  const int n = 2 * ((lat.points - 1) / 2) + 1;
  const int d = lat.spatial_dims();
  long long grid = n;
  if (d == 3) grid = static_cast<long long>(n) * n * n;
  if (grid * sea.coordinate_dim() > 50'000'000LL) throw Error(ErrorCode::invalid_argument, "lattice too large for the box quadrature");
  const double h = lat.length / n;
  const double cell = std::pow(h, d);
  // Unregularized values: epsilon -> 0 limit of the damping factor.
  const double tiny = 1e-300;
  const Regularization none{tiny};
  const int nc = sea.coordinate_dim();
  ComplexMatrix g = ComplexMatrix::Zero(nc, nc);
  for (long long i = 0; i < grid; ++i) {
    SpacetimePoint x{t, 0.0, 0.0, 0.0};
    long long r = i;
    for (int a = 0; a < d; ++a) {
      x[static_cast<std::size_t>(a + 1)] = h * static_cast<double>(r % n);
      r /= n;
    }
    const ComplexMatrix b = coordinate_values(sea, none, x);
    g.noalias() += cell * b.adjoint() * b;
  }
  return g;
}

Matrix4 vacuum_kernel(const MomentumLattice& lattice, const Regularization& reg, const SpacetimePoint& xi) {
  reg.validate();
  const auto& g = gamma_basis();
  const double vol = lattice.volume();
  const auto ks = lattice.momenta();
  std::vector<Matrix4> terms(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const auto& k = ks[i];
    const double w = energy(k, lattice.mass);
    const Complex phase = std::polar(std::exp(-2.0 * reg.epsilon * w), w * xi[0] + k[0] * xi[1] + k[1] * xi[2] + k[2] * xi[3]);
    terms[i] = (phase / (4.0 * kPi * w * vol)) * (g.slash({-w, k[0], k[1], k[2]}) + lattice.mass * Matrix4::Identity());
  }
  // pairwise reduction for order-independent rounding
  for (std::size_t stride = 1; stride < terms.size(); stride *= 2)
    for (std::size_t i = 0; i + stride < terms.size(); i += 2 * stride) terms[i] += terms[i + stride];
  return terms.empty() ? Matrix4::Zero() : terms[0];
}

Matrix4 kernel_P_eps(const SeaState& sea, const Regularization& reg, const SpacetimePoint& x, const SpacetimePoint& y) {
  check_point_count(sea, x);
  check_point_count(sea, y);
  const SpacetimePoint xi{x[0] - y[0], x[1] - y[1], x[2] - y[2], x[3] - y[3]};
  Matrix4 p = vacuum_kernel(sea.lattice(), reg, xi);
  if (sea.particles().empty() && sea.antiparticles().empty()) return p;
  const auto& g0 = gamma_basis().gamma[0];
  const auto& modes = sea.modes();
  ComplexMatrix vx(4, static_cast<Eigen::Index>(modes.size())), vy(4, static_cast<Eigen::Index>(modes.size()));
  for (std::size_t l = 0; l < modes.size(); ++l) {
    vx.col(static_cast<Eigen::Index>(l)) = regularized_eval(sea, reg, static_cast<int>(l), x);
    vy.col(static_cast<Eigen::Index>(l)) = regularized_eval(sea, reg, static_cast<int>(l), y);
  }
  for (const auto& c : sea.particles()) {
    const Spinor a = vx * c, b = vy * c;
    p -= (a * b.adjoint() * g0) / (2.0 * kPi);
  }
  for (const auto& c : sea.antiparticles()) {
    const Spinor a = vx * c, b = vy * c;
    p += (a * b.adjoint() * g0) / (2.0 * kPi);
  }
  return p;
}

ComplexMatrix local_correlation(const SeaState& sea, const Regularization& reg, const SpacetimePoint& x) {
  check_point_count(sea, x);
  const ComplexMatrix m = removal_projector(sea);
  const ComplexMatrix b = coordinate_values(sea, reg, x) * m;
  const ComplexMatrix f = -(b.adjoint() * gamma_basis().gamma[0] * b) / (2.0 * kPi);
  return 0.5 * (f + f.adjoint());
}

OperatorPoint local_correlation_point(const SeaState& sea, const Regularization& reg, const SpacetimePoint& x,
                                      double tau_rank) {
  check_point_count(sea, x);
  const ComplexMatrix b = coordinate_values(sea, reg, x) * removal_projector(sea);
  const Eigen::Index n = b.cols();
  const Eigen::Index r = std::min<Eigen::Index>(4, n);
  Eigen::HouseholderQR<ComplexMatrix> qr(b.adjoint());
  const ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(n, r);
  const ComplexMatrix rr = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  // F = Q (-(1/2pi) R g0 R^*) Q^*
  ComplexMatrix small = -(rr * gamma_basis().gamma[0] * rr.adjoint()) / (2.0 * kPi);
  small = 0.5 * (small + small.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(small);
  const RealVector ev = es.eigenvalues();
  const double top = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i)) > tau_rank * top) keep.push_back(i);
  ComplexMatrix frame(n, static_cast<Eigen::Index>(keep.size()));
  RealVector spec(static_cast<Eigen::Index>(keep.size()));
  const ComplexMatrix rot = q * es.eigenvectors();
  for (std::size_t j = 0; j < keep.size(); ++j) {
    frame.col(static_cast<Eigen::Index>(j)) = rot.col(keep[j]);
    spec(static_cast<Eigen::Index>(j)) = ev(keep[j]);
  }
  try {
    return make_operator_point(frame, spec, 2);
  } catch (const Error& e) {
    std::ostringstream os;
    os << "local correlation at (" << x[0] << "," << x[1] << "," << x[2] << "," << x[3] << "): " << e.what();
    throw Error(e.code(), os.str());
  }
}

CausalFermionSystem build_cfs(const SeaState& sea, const Regularization& reg, const std::vector<SpacetimePoint>& sample,
                              const std::vector<double>& weights) {
  if (sample.size() != weights.size()) throw Error(ErrorCode::dimension_mismatch, "one weight per sample point");
  DiscreteMeasure mu;
  mu.atoms.resize(sample.size());
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (!(weights[i] > 0.0)) throw Error(ErrorCode::invalid_argument, "sample weights must be positive");
  parallel_for(sample.size(), default_threads(), [&](std::size_t i) {
    mu.atoms[i] = Atom{local_correlation_point(sea, reg, sample[i]), weights[i]};
  });
  return CausalFermionSystem(sea.coordinate_dim(), 2, std::move(mu));
}

double kernel_lagrangian(const SeaState& sea, const Regularization& reg, const SpacetimePoint& x, const SpacetimePoint& y) {
  const Matrix4 a = kernel_P_eps(sea, reg, x, y) * kernel_P_eps(sea, reg, y, x);
  Eigen::ComplexEigenSolver<Matrix4> es(a, false);
  std::array<Complex, 4> lam;
  for (int i = 0; i < 4; ++i) lam[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
  return lagrangian_from_spectrum(lam, 2);
}

double series_coefficient(int j) {
  if (j < 0) throw Error(ErrorCode::invalid_argument, "series index must be nonnegative");
  constexpr double euler_gamma = 0.57721566490153286061;
  // psi(n+1) = -gamma + H_n
  double h = 0.0;
  for (int i = 1; i <= j; ++i) h += 1.0 / i;
  const double psi1 = -euler_gamma + h;
  const double psi2 = psi1 + 1.0 / (j + 1);
  return -2.0 * std::log(2.0) - psi1 - psi2;
}

Complex continuum_T(const SpacetimePoint& xi, double mass, const ContinuumOptions& opts) {
  if (opts.terms < 0) throw Error(ErrorCode::invalid_argument, "term count must be nonnegative");
  if (!(mass >= 0.0)) throw Error(ErrorCode::invalid_argument, "mass must be nonnegative");
  const double r2 = xi[1] * xi[1] + xi[2] * xi[2] + xi[3] * xi[3];
  const Complex t0(xi[0], opts.time_shift);
  const Complex z = t0 * t0 - r2;
  const double floor = mass > 0.0 ? 1e-3 / (mass * mass) : 0.0;
  if (std::abs(z) < floor || z == Complex(0.0)) {
    std::ostringstream os;
    os << "|xi^2| = " << std::abs(z) << " is too close to the light cone";
    throw Error(ErrorCode::invalid_argument, os.str());
  }
  const double pi3 = kPi * kPi * kPi;
  Complex out = -1.0 / (8.0 * pi3 * z);
  if (mass == 0.0) return out;
  const double m2 = mass * mass;
  Complex lg;
  if (opts.time_shift == 0.0 && z.real() > 0.0)
    lg = Complex(std::log(m2 * z.real()), xi[0] > 0.0 ? -kPi : kPi);
  else
    lg = std::log(-m2 * z);
  const Complex u = -m2 * z / 4.0;
  Complex a = 1.0;
  Complex sum = 0.0;
  for (int j = 0; j < opts.terms; ++j) {
    const double c = j < static_cast<int>(opts.coefficients.size()) ? opts.coefficients[static_cast<std::size_t>(j)]
                                                                     : series_coefficient(j);
    sum += a * (lg + c);
    a *= u / (static_cast<double>(j + 1) * static_cast<double>(j + 2));
  }
  return out + m2 / (32.0 * pi3) * sum;
}

SectorKernel::SectorKernel(const MomentumLattice& base, const Regularization& reg, std::vector<Sector> sectors,
                           double tau_reg)
    : sectors_(std::move(sectors)), reg_(reg) {
  reg.validate();
  if (!(tau_reg >= 0.0) || !std::isfinite(tau_reg)) throw Error(ErrorCode::invalid_argument, "tau_reg must be nonnegative");
  if (sectors_.empty()) throw Error(ErrorCode::invalid_argument, "at least one sector is required");
  const auto& g = gamma_basis();
  for (std::size_t s = 0; s < sectors_.size(); ++s) {
    const auto& sec = sectors_[s];
    if (sec.masses.empty()) throw Error(ErrorCode::invalid_argument, "sector without generations");
    const auto zeros = std::count(sec.masses.begin(), sec.masses.end(), 0.0);
    if (sec.right_handed ? zeros != 1 : zeros != 0) {
      std::ostringstream os;
      os << "sector " << s << ": " << (sec.right_handed ? "a right-handed sector needs exactly one massless summand"
                                                        : "massless summands are only allowed in right-handed sectors");
      throw Error(ErrorCode::invalid_argument, os.str());
    }
    for (double m : sec.masses) {
      if (!(m >= 0.0) || !std::isfinite(m)) throw Error(ErrorCode::invalid_argument, "sector masses must be nonnegative");
      MomentumLattice lat = base;
      lat.mass = m;
      seas_.push_back(build_sea(lat));
      x_blocks_.push_back(m == 0.0 ? Matrix4(g.chi_left + tau_reg * g.chi_right) : Matrix4(Matrix4::Identity()));
      sector_of_.push_back(static_cast<int>(s));
    }
  }
}

ComplexMatrix SectorKernel::chiral_asymmetry() const {
  const Eigen::Index n = 4 * summands();
  ComplexMatrix x = ComplexMatrix::Zero(n, n);
  for (int a = 0; a < summands(); ++a) x.block<4, 4>(4 * a, 4 * a) = x_blocks_[static_cast<std::size_t>(a)];
  return x;
}

ComplexMatrix SectorKernel::direct_sum(const SpacetimePoint& x, const SpacetimePoint& y) const {
  const Eigen::Index n = 4 * summands();
  ComplexMatrix p = ComplexMatrix::Zero(n, n);
  for (int a = 0; a < summands(); ++a) p.block<4, 4>(4 * a, 4 * a) = kernel_P_eps(seas_[static_cast<std::size_t>(a)], reg_, x, y);
  return p;
}

std::vector<Matrix4> SectorKernel::sectorial(const SpacetimePoint& x, const SpacetimePoint& y) const {
  const ComplexMatrix xp = chiral_asymmetry() * direct_sum(x, y);
  std::vector<Matrix4> out(sectors_.size(), Matrix4::Zero());
  for (int a = 0; a < summands(); ++a)
    for (int b = 0; b < summands(); ++b)
      if (sector_of_[static_cast<std::size_t>(a)] == sector_of_[static_cast<std::size_t>(b)])
        out[static_cast<std::size_t>(sector_of_[static_cast<std::size_t>(a)])] += xp.block<4, 4>(4 * a, 4 * b);
  return out;
}

double position_step(const MomentumLattice& lattice) {
  lattice.validate();
  return lattice.length / (2 * ((lattice.points - 1) / 2) + 1);
}

std::vector<PairSample> sample_pairs(std::uint64_t seed, int count, double extent, double margin, double spatial_step) {
  if (count < 0 || !(extent > 0.0) || margin < 0.0 || spatial_step < 0.0)
    throw Error(ErrorCode::invalid_argument, "bad pair sampling parameters");
  const long long steps = spatial_step > 0.0 ? static_cast<long long>(std::floor(extent / spatial_step)) : 0;
  if (spatial_step > 0.0 && steps < 1) throw Error(ErrorCode::invalid_argument, "extent is below one grid step");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-extent, extent);
  std::uniform_int_distribution<long long> grid(-steps, steps);
  std::uniform_int_distribution<long long> site(0, std::max<long long>(steps, 1));
  auto spatial = [&]() { return spatial_step > 0.0 ? spatial_step * static_cast<double>(grid(rng)) : u(rng); };
  std::vector<PairSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const PairClass want = i % 2 == 0 ? PairClass::spacelike : PairClass::timelike;
    for (;;) {
      const double t = u(rng), s = spatial();
      const double xi2 = t * t - s * s;
      if (std::abs(xi2) < margin) continue;
      if ((xi2 > 0.0) != (want == PairClass::timelike)) continue;
      PairSample p;
      const double x1 = spatial_step > 0.0 ? spatial_step * static_cast<double>(site(rng)) : u(rng);
      p.x = {u(rng), x1, 0.0, 0.0};
      p.y = {p.x[0] - t, p.x[1] - s, 0.0, 0.0};
      p.cls = want;
      out.push_back(p);
      break;
    }
  }
  return out;
}

SweepRow vacuum_sweep_row(const SeaState& sea, double epsilon, const std::vector<PairSample>& pairs) {
  const Regularization reg{epsilon};
  std::vector<double> l(pairs.size());
  parallel_for(pairs.size(), default_threads(), [&](std::size_t i) { l[i] = kernel_lagrangian(sea, reg, pairs[i].x, pairs[i].y); });
  SweepRow row;
  row.epsilon = epsilon;
  std::vector<double> sl, tl;
  for (std::size_t i = 0; i < pairs.size(); ++i) (pairs[i].cls == PairClass::spacelike ? sl : tl).push_back(l[i]);
  auto stats = [](const std::vector<double>& v) {
    ClassStats c;
    c.count = static_cast<int>(v.size());
    if (v.empty()) return c;
    c.mean = pairwise_sum(v) / static_cast<double>(v.size());
    c.max = *std::max_element(v.begin(), v.end());
    return c;
  };
  row.spacelike = stats(sl);
  row.timelike = stats(tl);
  row.ratio = row.timelike.mean > 0.0 ? row.spacelike.mean / row.timelike.mean : 0.0;
  return row;
}

}  // namespace cfs::sea
