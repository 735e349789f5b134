// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Each criterion also has a wall-clock budget measured on a single worker.

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cfs/core.hpp"
#include "cfs/dirac_sea.hpp"
#include "cfs/discrete_vp.hpp"
#include "cfs/experiments.hpp"
#include "cfs/lightcone.hpp"
#include "cfs/measure_opt.hpp"
#include "cfs/perturbation.hpp"
#include "cfs/spectral.hpp"

using namespace cfs;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

bool run_criterion(int id, const char* name, double budget_s, const std::function<void(Verdict&)>& body) {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.require(secs <= budget_s, "runtime over budget");
  std::printf("%s %d %s:%s (%.2f s of %.0f s)\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.str().c_str(), secs,
              budget_s);
  std::fflush(stdout);
  return v.pass;
}

// 1. Closed-chain spectra equal the nonzero spectra of xy.
void eigenvalue_coincidence(Verdict& v) {
  // 56 pairs for each of the 9 (N, n) combinations: 504 pairs in total.
  const auto rows = experiments::eigen_coincidence(20261018, 56, {8, 16, 64}, {1, 2, 3}, 1);
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.relative());
  v.detail << " pairs=" << rows.size() << " worst relative=" << sci(worst) << " (limit 1e-9)";
  v.require(rows.size() >= 500, "fewer than 500 pairs");
  v.require(worst <= 1e-9, "spectra differ");
}

// 2. L >= 0, zero on equal moduli, positive otherwise.
void lagrangian_characterization(Verdict& v) {
  std::mt19937_64 rng(2);
  const int dims[] = {6, 8, 16};
  double most_negative = 0.0;
  int negatives = 0;
  for (int i = 0; i < 10000; ++i) {
    const int n = 1 + i % 3;
    const int dim = dims[(i / 3) % 3];
    const auto x = experiments::random_operator_point(rng, dim, n);
    const auto y = experiments::random_operator_point(rng, dim, n);
    const double l = lagrangian(x, y);
    if (l < 0.0) ++negatives;
    most_negative = std::min(most_negative, l);
  }
  v.detail << " random pairs=10000 negative=" << negatives << " min L=" << sci(most_negative);
  v.require(negatives == 0, "negative Lagrangian");

  std::uniform_real_distribution<double> modulus(0.05, 5.0), phase(-kPi, kPi), bump(1.01, 2.0);
  double worst_equal = 0.0, least_unequal = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3000; ++i) {
    const int n = 1 + i % 3;
    const double r = modulus(rng);
    std::vector<Complex> lambda(2 * n);
    for (auto& l : lambda) l = std::polar(r, phase(rng));
    const double scale = r * r;
    worst_equal = std::max(worst_equal, lagrangian_from_spectrum(lambda, n) / scale);
    lambda[i % (2 * n)] *= bump(rng);
    least_unequal = std::min(least_unequal, lagrangian_from_spectrum(lambda, n) / scale);
  }
  v.detail << " equal moduli max L/scale=" << sci(worst_equal) << " (limit 1e-12)"
           << " unequal min L/scale=" << sci(least_unequal);
  v.require(worst_equal <= 1e-12, "equal moduli not annihilated");
  v.require(least_unequal > 0.0, "unequal moduli gave zero");
}

sea::MomentumLattice reference_lattice() {
  sea::MomentumLattice l;
  l.mode = sea::DimensionMode::d1p1;
  l.points = 64;
  l.length = 32.0;
  l.mass = 1.0;
  return l;
}

// 3. Local correlation operators have rank <= 4 and signature <= (2,2).
void sea_admissibility(Verdict& v) {
  const auto sea = sea::build_sea(reference_lattice());
  const sea::Regularization reg{0.1};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-16.0, 16.0);
  int max_rank = 0, max_pos = 0, max_neg = 0;
  for (int i = 0; i < 100; ++i) {
    const sea::SpacetimePoint x{u(rng), u(rng), 0.0, 0.0};
    const auto pt = sea::local_correlation_point(sea, reg, x, 1e-10);
    const auto dense = signature_counts(sea::local_correlation(sea, reg, x), 1e-10);
    max_rank = std::max({max_rank, pt.rank(), dense.positive + dense.negative});
    max_pos = std::max({max_pos, pt.signature().positive, dense.positive});
    max_neg = std::max({max_neg, pt.signature().negative, dense.negative});
  }
  v.detail << " samples=100 max rank=" << max_rank << " max signature=(" << max_pos << "," << max_neg << ")";
  v.require(max_rank <= 4, "rank above 4");
  v.require(max_pos <= 2 && max_neg <= 2, "signature above (2,2)");
}

// 4. Spacelike/timelike Lagrangian ratio decreases with epsilon.
//
// Frozen fixture: produced by `cfslab vacuum-sweep --config configs/vacuum-sweep.json`
// (seed 1, 1000 pairs, extent 4, margin 0.02, spatial coordinates on the
// dual position grid), build of 2026-10-18:
//   eps 0.2   ratio 1.077426959021332e-03
//   eps 0.1   ratio 3.8669633091170739e-04
//   eps 0.05  ratio 1.6510594516594348e-04
// Each ratio must stay below its frozen value plus 5%.
void spacelike_suppression(Verdict& v) {
  const auto sea = sea::build_sea(reference_lattice());
  const auto pairs = sea::sample_pairs(1, 1000, 4.0, 0.02, sea::position_step(reference_lattice()));
  const double eps[] = {0.2, 0.1, 0.05};
  const double frozen[] = {1.077426959021332e-03, 3.8669633091170739e-04, 1.6510594516594348e-04};
  double prev = std::numeric_limits<double>::infinity();
  v.detail << " ratios";
  for (int i = 0; i < 3; ++i) {
    const double r = sea::vacuum_sweep_row(sea, eps[i], pairs).ratio;
    v.detail << " " << sci(r);
    v.require(r < prev, "ratio not strictly decreasing");
    v.require(r <= 1.05 * frozen[i], "ratio above frozen threshold at eps " + sci(eps[i]));
    prev = r;
  }
}

ComplexMatrix eigen_oracle(const pert::FiniteSeaModel& m, const pert::Contour& c) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m.perturbed());
  ComplexMatrix out = ComplexMatrix::Zero(m.dim(), m.dim());
  for (int i = 0; i < m.dim(); ++i) {
    const double l = es.eigenvalues()(i);
    if (std::abs(Complex(l) - c.center) < c.radius) out -= l * es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
  }
  return out;
}

// 5. Contour sea projector.
void contour_projector(Verdict& v) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 32);
  std::uniform_real_distribution<double> strength(1e-4, 0.05);
  const pert::Contour c;
  const double s[] = {0.02, 0.04, 0.08};
  double worst_oracle = 0.0, worst_residual = 0.0;
  double min_exp = std::numeric_limits<double>::infinity(), max_exp = -min_exp;
  int fitted = 0;
  for (int t = 0; t < 500; ++t) {
    auto m = pert::random_model(rng, dim(rng), strength(rng));
    const ComplexMatrix proj = pert::contour_sea_projector(m, c, 24);
    worst_oracle = std::max(worst_oracle, (proj - eigen_oracle(m, c)).norm());
    worst_residual = std::max(worst_residual, pert::dirac_identity_residual(proj, pert::perturbed_dirac_operator(m)));

    // First-order truncation at three strengths along the model's own
    // direction. Without a kernel of k, I - p~ vanishes and so does the
    // residual at every order; those models carry no scaling information.
    const double norm = m.dk.operatorNorm();
    if (norm == 0.0 || (ComplexMatrix::Identity(m.dim(), m.dim()) - m.p).norm() < 0.5) continue;
    const ComplexMatrix dir = m.dk / norm;
    std::vector<double> lx, ly;
    for (double si : s) {
      m.dk = si * dir;
      const double r = pert::dirac_identity_residual(pert::contour_sea_projector(m, c, 1), pert::perturbed_dirac_operator(m));
      lx.push_back(std::log(si));
      ly.push_back(std::log(r));
    }
    double mx = 0, my = 0;
    for (int i = 0; i < 3; ++i) mx += lx[i] / 3, my += ly[i] / 3;
    double sxy = 0, sxx = 0;
    for (int i = 0; i < 3; ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
    const double e = sxy / sxx;
    ++fitted;
    min_exp = std::min(min_exp, e);
    max_exp = std::max(max_exp, e);
  }
  v.detail << " models=500 oracle=" << sci(worst_oracle) << " residual=" << sci(worst_residual)
           << " (limits 1e-8) first-order exponent in [" << sci(min_exp) << ", " << sci(max_exp) << "] over "
           << fitted << " models with a kernel (limit [1.8, 2.2])";
  v.require(worst_oracle <= 1e-8, "oracle mismatch");
  v.require(worst_residual <= 1e-8, "Dirac residual");
  v.require(fitted > 0 && min_exp >= 1.8 && max_exp <= 2.2, "exponent");
}

// 6. Ordered exponential.
void ordered_exponential(Verdict& v) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> norm(0.1, 3.0);
  double worst_const = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int d = 1 + t % 6;
    ComplexMatrix f(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) f(i, j) = Complex(g(rng), g(rng));
    f *= norm(rng) / f.operatorNorm();
    const lc::MatrixPath path{d, [f](double) { return f; }};
    const ComplexMatrix ref = f.exp();
    worst_const = std::max(worst_const, (lc::ordered_exp(path, 0.0, 1.0) - ref).norm() / ref.norm());
  }

  double worst_dual = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto path = lc::random_smooth_path(rng, 2 + t % 4, 1.5);
    lc::PexpOptions ode;
    ode.method = lc::PexpMethod::ode;
    const ComplexMatrix a = lc::ordered_exp(path, 0.0, 1.0);
    worst_dual = std::max(worst_dual, (a - lc::ordered_exp(path, 0.0, 1.0, ode)).norm() / a.norm());
  }

  // A^j = eta^{jj} d_j Lambda gives exp(-i (Lambda(y) - Lambda(x)))
  const std::array<double, 4> eta{1.0, -1.0, -1.0, -1.0};
  auto lambda = [](const lc::Point& z) { return std::sin(z[0] + 2 * z[1]) + z[2] * z[3] * z[0] + 0.3 * z[3] * z[3]; };
  const lc::ChiralPotential pure = [&](const lc::Point& z, lc::Chirality) {
    const std::array<double, 4> grad{std::cos(z[0] + 2 * z[1]) + z[2] * z[3], 2 * std::cos(z[0] + 2 * z[1]),
                                     z[3] * z[0], z[2] * z[0] + 0.6 * z[3]};
    std::array<ComplexMatrix, 4> a;
    for (int j = 0; j < 4; ++j) a[j] = ComplexMatrix::Constant(1, 1, eta[j] * grad[j]);
    return a;
  };
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  double worst_gauge = 0.0;
  for (int t = 0; t < 20; ++t) {
    const lc::Point x{u(rng), u(rng), u(rng), u(rng)}, y{u(rng), u(rng), u(rng), u(rng)};
    const Complex expected = std::exp(-kI * (lambda(y) - lambda(x)));
    for (auto m : {lc::PexpMethod::dyson, lc::PexpMethod::ode}) {
      lc::PexpOptions o;
      o.method = m;
      o.tolerance = 1e-12;  // ODE step control; the default 1e-10 sits at the limit
      worst_gauge = std::max(worst_gauge, std::abs(lc::gauge_phase(pure, lc::Chirality::left, x, y, o)(0, 0) - expected));
    }
  }
  v.detail << " constant=" << sci(worst_const) << " (limit 1e-12) dyson-vs-ode=" << sci(worst_dual)
           << " (limit 1e-8) pure gauge=" << sci(worst_gauge) << " (limit 1e-10)";
  v.require(worst_const <= 1e-12, "constant family");
  v.require(worst_dual <= 1e-8, "dual method");
  v.require(worst_gauge <= 1e-10, "pure gauge");
}

// 7. Discrete variational principle.
void discrete_vp(Verdict& v) {
  const std::vector<int> blocks{4, 4, 4, 4};
  const auto s = dvp::KreinSpace::canonical(blocks);
  const dvp::SpacetimePartition part(blocks);
  const ComplexMatrix p = dvp::random_admissible(70, s, 4);
  const double s0 = dvp::discrete_action(p, part), t0 = dvp::discrete_constraint(p, part);
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const ComplexMatrix q = dvp::unitary_flow_step(p, dvp::random_generator(1000 + i, s, &part), 1.0, s);
    worst = std::max({worst, std::abs(dvp::discrete_action(q, part) - s0) / s0,
                      std::abs(dvp::discrete_constraint(q, part) - t0) / t0});
  }
  v.detail << " gauge=" << sci(worst) << " (limit 1e-9)";
  v.require(worst <= 1e-9, "gauge invariance");

  dvp::FlowConfig cfg;
  cfg.max_iters = 2000;
  cfg.residual_reduction = 1e-3;
  double min_reduction = std::numeric_limits<double>::infinity();
  std::size_t max_iters = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto res = dvp::flow_descent(dvp::random_admissible(seed, s, 4), part, s, cfg);
    min_reduction = std::min(min_reduction, res.initial_residual / res.final_residual);
    max_iters = std::max(max_iters, res.log.size());
  }
  v.detail << " d=16 instances=5 min reduction=" << sci(min_reduction) << "x (limit 1e3) max iterations=" << max_iters;
  v.require(min_reduction >= 1e3, "residual reduction");
  v.require(max_iters <= 2000, "iteration budget");
}

// 8. Measure optimization against random restarts.
void measure_optimization(Verdict& v) {
  double worst_margin = -std::numeric_limits<double>::infinity(), worst_constraint = 0.0;
  bool reproducible = true;
  for (std::uint64_t seed : {25u, 26u, 27u}) {
    std::mt19937_64 rng(seed);
    const auto sys = experiments::random_system(rng, 6, 4, 1);
    OptConfig cfg;
    cfg.max_iters = 800;
    cfg.seed = seed;
    const auto res = minimize_measure(sys, cfg);
    const double final_obj = objective_mu(CausalFermionSystem(4, 1, res.measure), cfg.mu);
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < 10000; ++r)
      best = std::min(best, objective_mu(experiments::random_system(rng, 6, 4, 1), cfg.mu));
    worst_margin = std::max(worst_margin, final_obj - best);
    worst_constraint = std::max({worst_constraint, std::abs(res.volume_residual), std::abs(res.trace_residual)});

    const auto again = minimize_measure(sys, cfg);
    reproducible = reproducible && again.objective_history == res.objective_history &&
                   again.measure.size() == res.measure.size();
    for (std::size_t a = 0; reproducible && a < res.measure.size(); ++a)
      reproducible = again.measure.atoms[a].weight == res.measure.atoms[a].weight &&
                     again.measure.atoms[a].point.frame() == res.measure.atoms[a].point.frame() &&
                     again.measure.atoms[a].point.spectrum() == res.measure.atoms[a].point.spectrum();
  }
  v.detail << " instances=3 max(final - best of 1e4 restarts)=" << sci(worst_margin)
           << " constraints=" << sci(worst_constraint) << " (limit 1e-6) reproducible=" << (reproducible ? "yes" : "no");
  v.require(worst_margin <= 0.0, "random restart beat the optimizer");
  v.require(worst_constraint <= 1e-6, "constraints");
  v.require(reproducible, "reproducibility");
}

}  // namespace

int main() {
  set_default_threads(1);
  int failures = 0;
  failures += !run_criterion(1, "eigenvalue coincidence", 30, eigenvalue_coincidence);
  failures += !run_criterion(2, "lagrangian characterization", 10, lagrangian_characterization);
  failures += !run_criterion(3, "dirac-sea admissibility", 60, sea_admissibility);
  failures += !run_criterion(4, "spacelike suppression trend", 300, spacelike_suppression);
  failures += !run_criterion(5, "contour sea projector", 60, contour_projector);
  failures += !run_criterion(6, "ordered exponential", 20, ordered_exponential);
  failures += !run_criterion(7, "discrete VP invariances", 300, discrete_vp);
  failures += !run_criterion(8, "measure optimization", 300, measure_optimization);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
