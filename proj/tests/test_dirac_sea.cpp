#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <random>
#include <sstream>

#include "cfs/dirac_sea.hpp"
#include "cfs/io.hpp"
#include "cfs/spectral.hpp"
#include "oracles.hpp"

using namespace cfs;
using namespace cfs::sea;

namespace {

MomentumLattice lattice_1p1(int points, double length, double mass = 1.0) {
  MomentumLattice l;
  l.mode = DimensionMode::d1p1;
  l.points = points;
  l.length = length;
  l.mass = mass;
  return l;
}

MomentumLattice lattice_3p1(int points, double length, double mass = 1.0) {
  MomentumLattice l = lattice_1p1(points, length, mass);
  l.mode = DimensionMode::d3p1;
  return l;
}

Matrix4 krein_adjoint4(const Matrix4& m) {
  const auto& g0 = gamma_basis().gamma[0];
  return g0 * m.adjoint() * g0;
}

std::vector<Complex> chain_spectrum(const Matrix4& a) {
  Eigen::ComplexEigenSolver<Matrix4> es(a, false);
  std::vector<Complex> v;
  for (int i = 0; i < 4; ++i) v.push_back(es.eigenvalues()(i));
  return v;
}

// Unit vector on one mode.
ComplexVector unit_mode(const SeaState& s, int mode) {
  ComplexVector v = ComplexVector::Zero(static_cast<Eigen::Index>(s.modes().size()));
  v(mode) = 1.0;
  return v;
}

int first_mode(const SeaState& s, int sign) {
  for (std::size_t i = 0; i < s.modes().size(); ++i)
    if (s.modes()[i].energy_sign == sign) return static_cast<int>(i);
  return -1;
}

SpacetimePoint random_point(oracle::Rng& rng, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  return {u(rng), u(rng), 0.0, 0.0};
}

// (1/2pi) int d^3k/(2pi)^3 e^{i omega (t + i delta)} e^{i k.r}/(2 omega) by quadrature.
Complex momentum_integral_T(double t, double r, double m, double delta) {
  using boost::math::quadrature::gauss_kronrod;
  const double kmax = 40.0 / delta;
  auto integrand = [&](double k, bool imag) {
    const double w = std::sqrt(k * k + m * m);
    const Complex e = std::exp(Complex(-delta * w, w * t));
    const double radial = r > 0.0 ? k * std::sin(k * r) / r : k * k;
    const Complex v = e * radial / (2.0 * w);
    return imag ? v.imag() : v.real();
  };
  const double re = gauss_kronrod<double, 61>::integrate([&](double k) { return integrand(k, false); }, 0.0, kmax, 15, 1e-13);
  const double im = gauss_kronrod<double, 61>::integrate([&](double k) { return integrand(k, true); }, 0.0, kmax, 15, 1e-13);
  return Complex(re, im) / (2.0 * kPi * 2.0 * kPi * kPi);
}

}  // namespace

TEST_SUITE("dirac-sea") {

TEST_CASE("gamma basis") {
  const auto& g = gamma_basis();
  CHECK(anticommutator_defect(g) <= 1e-14);
  CHECK((g.gamma[0] * g.gamma[0] - Matrix4::Identity()).norm() == 0.0);
  CHECK((g.gamma[1] * g.gamma[1] + Matrix4::Identity()).norm() == 0.0);
  CHECK((g.gamma5 * g.gamma5 - Matrix4::Identity()).norm() <= 1e-14);
  CHECK((g.chi_left + g.chi_right - Matrix4::Identity()).norm() == 0.0);
  CHECK((g.chi_left * g.chi_left - g.chi_left).norm() <= 1e-14);
  CHECK(signature_counts(g.gamma[0]) == SignatureCounts{2, 2});
}

TEST_CASE("negative-energy modes") {
  const Momentum zero{0, 0, 0};
  CHECK(energy(zero, 1.3) == 1.3);
  const Matrix4 pm0 = energy_projector(zero, 1.0, -1);
  CHECK((pm0 - 0.5 * (Matrix4::Identity() - gamma_basis().gamma[0])).norm() <= 1e-15);
  CHECK(signature_counts(pm0).positive == 2);

  oracle::Rng rng(1);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    const Momentum k{n(rng), n(rng), n(rng)};
    const Matrix4 pp = energy_projector(k, 0.7, 1);
    const Matrix4 pm = energy_projector(k, 0.7, -1);
    CHECK((pm * pm - pm).norm() <= 1e-12);
    CHECK((pp * pm).norm() <= 1e-12);
    CHECK((pp + pm - Matrix4::Identity()).norm() <= 1e-12);
    for (int s = 0; s < 2; ++s) {
      const Spinor a = negative_energy_mode(k, 0.7, s);
      CHECK(std::abs(a.norm() - 1.0) <= 1e-14);
      CHECK((pm * a - a).norm() <= 1e-12);
    }
    CHECK(std::abs(negative_energy_mode(k, 0.7, 0).dot(negative_energy_mode(k, 0.7, 1))) <= 1e-14);
  }
  CHECK_THROWS_AS(negative_energy_mode(zero, 1.0, 2), Error);
  CHECK_THROWS_AS(energy_projector(zero, 0.0, -1), Error);
}

TEST_CASE("build_sea counts and orthonormality") {
  const auto s = build_sea(lattice_1p1(3, 10.0));
  CHECK(s.sea_modes().size() == 6);
  CHECK(s.hilbert_dim() == 6);
  CHECK(s.modes().size() == 12);
  CHECK(build_sea(lattice_3p1(3, 5.0)).hilbert_dim() == 27 * 2);
  // m = 0 drops the zero momentum
  CHECK(build_sea(lattice_1p1(3, 10.0, 0.0)).hilbert_dim() == 4);

  const auto s9 = build_sea(lattice_1p1(9, 7.0));
  CHECK((box_gram(s9, 0.37) - ComplexMatrix::Identity(18, 18)).norm() <= 1e-10);
  const auto s3 = build_sea(lattice_3p1(3, 4.0));
  CHECK((box_gram(s3) - ComplexMatrix::Identity(54, 54)).norm() <= 1e-10);

  CHECK_THROWS_AS(build_sea(lattice_3p1(17, 10.0)), Error);
  CHECK_NOTHROW(build_sea(lattice_3p1(15, 10.0)));
  CHECK_THROWS_AS(build_sea(lattice_1p1(0, 10.0)), Error);
}

TEST_CASE("regularized_eval") {
  const auto s = build_sea(lattice_1p1(7, 9.0));
  const SpacetimePoint x{0.3, -1.2, 0, 0};
  const int l = 5;
  const Mode& m = s.modes()[l];
  const Complex wave = std::polar(1.0, -(m.energy_sign * m.omega * x[0] - m.k[0] * x[1])) / std::sqrt(9.0);
  CHECK((regularized_eval(s, Regularization{1e-12}, l, x) - wave * m.amplitude).norm() <= 1e-11);

  // damping ratio between two momenta
  const Regularization reg{0.3};
  const int a = first_mode(s, -1);
  int b = a;
  for (std::size_t i = 0; i < s.modes().size(); ++i)
    if (s.modes()[i].omega > s.modes()[a].omega + 0.1) b = static_cast<int>(i);
  const double ratio = regularized_eval(s, reg, b, x).norm() / regularized_eval(s, reg, a, x).norm();
  CHECK(ratio == doctest::Approx(std::exp(-0.3 * (s.modes()[b].omega - s.modes()[a].omega))).epsilon(1e-13));

  oracle::Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_point(rng, 5.0);
    const int mode = static_cast<int>(rng() % s.modes().size());
    const Mode& md = s.modes()[mode];
    const double phase = -md.energy_sign * md.omega * p[0] + md.k[0] * p[1];
    const Spinor want = std::exp(-0.3 * md.omega) * Complex(std::cos(phase), std::sin(phase)) / 3.0 * md.amplitude;
    CHECK((regularized_eval(s, reg, mode, p) - want).norm() <= 1e-14);
  }
}

TEST_CASE("kernel symmetries") {
  const auto s = build_sea(lattice_1p1(15, 12.0));
  const Regularization reg{0.2};
  oracle::Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_point(rng, 4.0), y = random_point(rng, 4.0);
    const Matrix4 pxy = kernel_P_eps(s, reg, x, y);
    const SpacetimePoint xa{x[0] + 0.7, x[1] - 2.1, 0, 0}, ya{y[0] + 0.7, y[1] - 2.1, 0, 0};
    CHECK((kernel_P_eps(s, reg, xa, ya) - pxy).norm() <= 1e-10 * pxy.norm());
    CHECK((kernel_P_eps(s, reg, y, x) - krein_adjoint4(pxy)).norm() <= 1e-14);
    const Matrix4 pxx = kernel_P_eps(s, reg, x, x);
    CHECK((krein_adjoint4(pxx) - pxx).norm() <= 1e-15);
  }
}

TEST_CASE("vacuum kernel closed form equals the mode sum") {
  const auto s = build_sea(lattice_1p1(11, 8.0));
  const Regularization reg{0.15};
  const SpacetimePoint x{0.4, 1.1, 0, 0}, y{-0.2, -0.5, 0, 0};
  Matrix4 sum = Matrix4::Zero();
  for (int l : s.sea_modes()) {
    const Spinor a = regularized_eval(s, reg, l, x), b = regularized_eval(s, reg, l, y);
    sum -= a * b.adjoint() * gamma_basis().gamma[0] / (2.0 * kPi);
  }
  const Matrix4 p = kernel_P_eps(s, reg, x, y);
  CHECK((p - sum).norm() <= 1e-13 * p.norm());
}

TEST_CASE("continuum_T examples") {
  const double pi3 = kPi * kPi * kPi;
  const SpacetimePoint xi{0.0, 1.5, 0.0, 0.0};
  CHECK(continuum_T(xi, 0.0) == Complex(1.0 / (8.0 * pi3 * 2.25), 0.0));
  CHECK(continuum_T(xi, 1.0).imag() == 0.0);
  CHECK(std::abs(continuum_T({2.0, 1.0, 0, 0}, 1.0).imag()) > 0.0);

  ContinuumOptions eight;
  eight.terms = 8;
  for (const SpacetimePoint& p : std::vector<SpacetimePoint>{{0, 1, 0, 0}, {1, 0, 0, 0}, {0.5, 0.2, 0.3, 0}, {0, 0.3, 0, 0}}) {
    const Complex t12 = continuum_T(p, 1.0), t8 = continuum_T(p, 1.0, eight);
    CHECK(std::abs(t12 - t8) <= 1e-6 * std::abs(t12));
  }
  CHECK(series_coefficient(0) == doctest::Approx(-2.0 * std::log(2.0) + 2.0 * 0.5772156649015329 - 1.0).epsilon(1e-15));
  CHECK_THROWS_AS(continuum_T({1.0, 1.0, 0, 0}, 1.0), Error);
}

TEST_CASE("continuum_T against the momentum integral") {
  // spacelike and timelike, with the imaginary time shift that makes the integral converge
  for (double delta : {0.3, 0.6}) {
    ContinuumOptions o;
    o.time_shift = delta;
    o.terms = 30;
    for (double r : {0.5, 1.5}) {
      const Complex series = continuum_T({0.0, r, 0.0, 0.0}, 1.0, o);
      const Complex quad = momentum_integral_T(0.0, r, 1.0, delta);
      CHECK(std::abs(series - quad) <= 1e-8 * std::abs(quad));
    }
    for (double t : {-1.2, 0.8}) {
      const Complex series = continuum_T({t, 0.0, 0.0, 0.0}, 1.0, o);
      const Complex quad = momentum_integral_T(t, 0.0, 1.0, delta);
      CHECK(std::abs(series - quad) <= 1e-8 * std::abs(quad));
    }
  }
}

TEST_CASE("lattice kernel approaches the continuum at spacelike separation") {
  // 3+1 box, 15^3 momenta; the scalar part of P is m T(xi0 + 2 i eps).
  const auto lat = lattice_3p1(15, 8.0);
  const Regularization reg{0.5};
  ContinuumOptions o;
  o.time_shift = 2.0 * reg.epsilon;
  for (double r : {1.0, 2.0}) {
    const Matrix4 p = vacuum_kernel(lat, reg, {0.0, r, 0.0, 0.0});
    const Complex lattice_value = p.trace() / 4.0;
    const Complex cont = continuum_T({0.0, r, 0.0, 0.0}, 1.0, o);
    CHECK(std::abs(lattice_value - cont) <= 0.05 * std::abs(cont));
  }
}

TEST_CASE("local correlation operators") {
  const auto s = build_sea(lattice_1p1(21, 16.0));
  const Regularization reg{0.1};
  oracle::Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = random_point(rng, 6.0);
    const ComplexMatrix f = local_correlation(s, reg, x);
    const auto sig = signature_counts(f);
    CHECK(sig.positive <= 2);
    CHECK(sig.negative <= 2);
    const auto pt = local_correlation_point(s, reg, x);
    CHECK(pt.rank() <= 4);
    CHECK((pt.dense() - f).norm() <= 1e-12 * f.norm());
  }
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_point(rng, 6.0), y = random_point(rng, 6.0);
    const ComplexMatrix ff = local_correlation(s, reg, x) * local_correlation(s, reg, y);
    const auto dense = oracle::largest(eigenvalues_dense(ff).values, 4);
    const auto chain = chain_spectrum(kernel_P_eps(s, reg, x, y) * kernel_P_eps(s, reg, y, x));
    CHECK(oracle::multiset_distance(dense, chain) <= 1e-8 * oracle::max_modulus(chain));
  }
}

TEST_CASE("vacuum chain spectra come in conjugate pairs") {
  const auto s = build_sea(lattice_1p1(31, 20.0));
  const Regularization reg{0.1};
  oracle::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_point(rng, 4.0), y = random_point(rng, 4.0);
    const auto lam = chain_spectrum(kernel_P_eps(s, reg, x, y) * kernel_P_eps(s, reg, y, x));
    std::vector<Complex> conj;
    for (const auto& l : lam) conj.push_back(std::conj(l));
    CHECK(oracle::multiset_distance(lam, conj) <= 1e-9 * oracle::max_modulus(lam));
  }
}

TEST_CASE("build_cfs") {
  const auto s = build_sea(lattice_1p1(15, 12.0));
  const Regularization reg{0.2};
  const std::vector<SpacetimePoint> grid{{0, 0, 0, 0}, {0, 1.3, 0, 0}, {0.9, 0, 0, 0}, {0.9, 1.3, 0, 0}};
  const std::vector<double> w{0.5, 1.0, 1.5, 2.0};
  const auto sys = build_cfs(s, reg, grid, w);
  CHECK(sys.size() == 4);
  CHECK(sys.spin_dimension() == 2);

  const auto twice = build_cfs(s, reg, {grid[1], grid[1]}, {1.0, 1.0});
  CHECK(twice.atoms()[0].point.frame() == twice.atoms()[1].point.frame());
  CHECK(twice.atoms()[0].point.spectrum() == twice.atoms()[1].point.spectrum());

  std::stringstream ss;
  io::write_system(ss, sys);
  const auto back = io::read_system(ss);
  const double a = action(sys);
  CHECK(std::abs(action(back) - a) <= 1e-12 * a);

  // kernel route
  double k = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j) k += w[i] * w[j] * kernel_lagrangian(s, reg, grid[i], grid[j]);
  CHECK(std::abs(a - k) <= 1e-8 * std::abs(k));
  CHECK(a > 0.0);

  CHECK_THROWS_AS(build_cfs(s, reg, grid, {1.0, 1.0, 0.0, 1.0}), Error);
  CHECK_THROWS_AS(build_cfs(s, reg, grid, {1.0}), Error);
}

TEST_CASE("particles and antiparticles") {
  const auto s = build_sea(lattice_1p1(9, 10.0));
  const Regularization reg{0.2};
  const SpacetimePoint x{0.3, 0.4, 0, 0}, y{-0.5, 1.7, 0, 0};
  const Matrix4 p0 = kernel_P_eps(s, reg, x, y);

  CHECK((kernel_P_eps(insert_states(s, {}, {}), reg, x, y) - p0).norm() == 0.0);

  const int pos = first_mode(s, 1);
  ComplexVector particle = unit_mode(s, pos) * std::sqrt(0.5) + unit_mode(s, pos + 4) * Complex(0.0, std::sqrt(0.5));
  const auto with = insert_states(s, {particle}, {});
  CHECK(with.hilbert_dim() == s.hilbert_dim() + 1);

  Spinor psi_x = Spinor::Zero(), psi_y = Spinor::Zero();
  for (std::size_t l = 0; l < s.modes().size(); ++l) {
    psi_x += particle(static_cast<Eigen::Index>(l)) * regularized_eval(s, reg, static_cast<int>(l), x);
    psi_y += particle(static_cast<Eigen::Index>(l)) * regularized_eval(s, reg, static_cast<int>(l), y);
  }
  const Matrix4 dxx = kernel_P_eps(with, reg, x, x) - kernel_P_eps(s, reg, x, x);
  const Matrix4 rank1 = -(psi_x * psi_x.adjoint() * gamma_basis().gamma[0]) / (2.0 * kPi);
  CHECK((dxx - rank1).norm() <= 1e-14);

  const auto removed = withdraw_states(with, {particle}, {});
  CHECK((kernel_P_eps(removed, reg, x, y) - p0).norm() <= 1e-12 * p0.norm());

  // a hole in the sea cancels that mode's term
  const int neg = s.sea_modes()[3];
  const auto hole = insert_states(s, {}, {unit_mode(s, neg)});
  CHECK(hole.hilbert_dim() == s.hilbert_dim() - 1);
  const Spinor hx = regularized_eval(s, reg, neg, x), hy = regularized_eval(s, reg, neg, y);
  const Matrix4 expect = p0 + hx * hy.adjoint() * gamma_basis().gamma[0] / (2.0 * kPi);
  CHECK((kernel_P_eps(hole, reg, x, y) - expect).norm() <= 1e-14);

  // the two routes still agree with both kinds present
  const auto both = insert_states(with, {}, {unit_mode(s, neg)});
  const ComplexMatrix ff = local_correlation(both, reg, x) * local_correlation(both, reg, y);
  const auto dense = oracle::largest(eigenvalues_dense(ff).values, 4);
  const auto chain = chain_spectrum(kernel_P_eps(both, reg, x, y) * kernel_P_eps(both, reg, y, x));
  CHECK(oracle::multiset_distance(dense, chain) <= 1e-8 * oracle::max_modulus(chain));
  const auto sig = signature_counts(local_correlation(both, reg, x));
  CHECK(sig.positive <= 2);
  CHECK(sig.negative <= 2);

  CHECK_THROWS_AS(insert_states(s, {unit_mode(s, neg)}, {}), Error);
  CHECK_THROWS_AS(insert_states(s, {}, {unit_mode(s, pos)}), Error);
  CHECK_THROWS_AS(insert_states(s, {2.0 * unit_mode(s, pos)}, {}), Error);
  CHECK_THROWS_AS(insert_states(s, {particle, particle}, {}), Error);
  CHECK_THROWS_AS(withdraw_states(s, {particle}, {}), Error);
}

TEST_CASE("direct sum of sectors") {
  const auto lat = lattice_1p1(11, 10.0);
  const Regularization reg{0.2};
  const SpacetimePoint x{0.1, 0.2, 0, 0}, y{-0.4, 1.1, 0, 0};
  const auto single = build_sea(lat);
  const Matrix4 p = kernel_P_eps(single, reg, x, y);

  const SectorKernel one(lat, reg, {Sector{{1.0}, false}}, 1.0);
  CHECK((one.sectorial(x, y)[0] - p).norm() == 0.0);
  CHECK((one.chiral_asymmetry() - ComplexMatrix::Identity(4, 4)).norm() == 0.0);

  const SectorKernel three(lat, reg, {Sector{{1.0, 1.0, 1.0}, false}}, 1.0);
  CHECK((three.sectorial(x, y)[0] - 3.0 * p).norm() <= 1e-14 * p.norm());

  const SectorKernel mixed(lat, reg, {Sector{{1.0, 2.0}, false}, Sector{{0.0, 1.5}, true}}, 0.3);
  CHECK(mixed.summands() == 4);
  const ComplexMatrix ds = mixed.direct_sum(x, y);
  auto lat2 = lat;
  lat2.mass = 2.0;
  CHECK((ds.block(4, 4, 4, 4) - kernel_P_eps(build_sea(lat2), reg, x, y)).norm() == 0.0);
  CHECK(ds.block(0, 4, 4, 4).norm() == 0.0);
  const auto& g = gamma_basis();
  const ComplexMatrix xm = mixed.chiral_asymmetry();
  CHECK((xm.block(8, 8, 4, 4) - (g.chi_left + 0.3 * g.chi_right)).norm() <= 1e-15);
  CHECK((xm.block(12, 12, 4, 4) - ComplexMatrix::Identity(4, 4)).norm() == 0.0);
  const auto sect = mixed.sectorial(x, y);
  REQUIRE(sect.size() == 2);
  const ComplexMatrix want = xm.block(8, 8, 4, 4) * ds.block(8, 8, 4, 4) + ds.block(12, 12, 4, 4);
  CHECK((sect[1] - want).norm() <= 1e-15);

  CHECK_THROWS_AS(SectorKernel(lat, reg, {Sector{{0.0, 1.0}, false}}, 1.0), Error);
  CHECK_THROWS_AS(SectorKernel(lat, reg, {Sector{{1.0}, true}}, 1.0), Error);
  CHECK_THROWS_AS(SectorKernel(lat, reg, {Sector{{}, false}}, 1.0), Error);
  CHECK_THROWS_AS(SectorKernel(lat, reg, {}, 1.0), Error);
}

TEST_CASE("pair sampling") {
  const auto lat = lattice_1p1(64, 32.0);
  const double h = position_step(lat);
  CHECK(h == doctest::Approx(32.0 / 63.0));
  const auto pairs = sample_pairs(1, 200, 4.0, 0.02, h);
  REQUIRE(pairs.size() == 200);
  int spacelike = 0;
  for (const auto& p : pairs) {
    const double t = p.x[0] - p.y[0], s = p.x[1] - p.y[1];
    const double xi2 = t * t - s * s;
    CHECK(std::abs(xi2) >= 0.02);
    CHECK((xi2 > 0.0) == (p.cls == PairClass::timelike));
    spacelike += p.cls == PairClass::spacelike;
    CHECK(std::abs(p.x[1] / h - std::round(p.x[1] / h)) <= 1e-9);
    CHECK(std::abs(p.y[1] / h - std::round(p.y[1] / h)) <= 1e-9);
  }
  CHECK(spacelike == 100);
  const auto again = sample_pairs(1, 200, 4.0, 0.02, h);
  CHECK(again.back().y == pairs.back().y);
}

}  // TEST_SUITE
