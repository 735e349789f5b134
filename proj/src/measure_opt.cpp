#include "cfs/measure_opt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "cfs/io.hpp"

namespace cfs {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kSimpleGap = 1e-6;
constexpr double kFloorFraction = 1e-12;
constexpr double kPruneFraction = 1e-10;
constexpr double kKinkRadius = 1e-3;
constexpr int kKinkSamples = 8;

ComplexMatrix reduced_product(const ComplexMatrix& vx, const RealVector& nx, const ComplexMatrix& vy,
                              const RealVector& ny) {
  const ComplexMatrix o = vx.adjoint() * vy;
  return nx.cast<Complex>().asDiagonal() * o * ny.cast<Complex>().asDiagonal() * o.adjoint();
}

// L_mu as a smooth function of raw factors (frames need not be orthonormal).
double lmu_raw(const ComplexMatrix& vx, const RealVector& nx, const ComplexMatrix& vy,
               const RealVector& ny, double mu) {
  if (nx.size() == 0 || ny.size() == 0) return 0.0;
  Eigen::ComplexEigenSolver<ComplexMatrix> es(reduced_product(vx, nx, vy, ny), false);
  const ComplexVector ev = es.eigenvalues();
  return lagrangian_mu_from_spectrum(std::span<const Complex>(ev.data(), static_cast<std::size_t>(ev.size())), mu);
}

struct State {
  int dim = 0;
  int spin_dim = 0;
  std::vector<double> w;
  std::vector<RealVector> nu;
  std::vector<ComplexMatrix> v;

  std::size_t size() const { return w.size(); }
};

State to_state(const CausalFermionSystem& sys) {
  State s;
  s.dim = sys.dim();
  s.spin_dim = sys.spin_dimension();
  for (const auto& a : sys.atoms()) {
    s.w.push_back(a.weight);
    s.nu.push_back(a.point.spectrum());
    s.v.push_back(a.point.frame());
  }
  return s;
}

DiscreteMeasure to_measure(const State& s) {
  DiscreteMeasure m;
  for (std::size_t a = 0; a < s.size(); ++a)
    m.atoms.push_back({OperatorPoint::from_orthonormal(s.v[a], s.nu[a], s.spin_dim), s.w[a]});
  return m;
}

double state_trace(const State& s) {
  std::vector<double> t(s.size());
  for (std::size_t a = 0; a < s.size(); ++a) t[a] = s.w[a] * s.nu[a].sum();
  return pairwise_sum(t);
}

double state_volume(const State& s) { return pairwise_sum(s.w); }

struct Targets {
  double mu, volume, trace, penalty;
};

// Pair values L_mu(a,b) for a <= b, stored row-major in a K x K matrix.
std::vector<double> pair_values(const State& s, double mu) {
  const std::size_t k = s.size();
  std::vector<std::pair<std::size_t, std::size_t>> upper;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a; b < k; ++b) upper.emplace_back(a, b);
  std::vector<double> out(k * k);
  parallel_for(upper.size(), default_threads(), [&](std::size_t i) {
    const auto [a, b] = upper[i];
    out[a * k + b] = lmu_raw(s.v[a], s.nu[a], s.v[b], s.nu[b], mu);
  });
  for (const auto& [a, b] : upper) out[b * k + a] = out[a * k + b];
  return out;
}

double objective_from_pairs(const State& s, const std::vector<double>& l) {
  const std::size_t k = s.size();
  std::vector<double> terms(k * k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) terms[a * k + b] = s.w[a] * s.w[b] * l[a * k + b];
  return pairwise_sum(terms);
}

double penalized_objective(const State& s, const Targets& t) {
  const double vr = state_volume(s) - t.volume;
  const double tr = state_trace(s) - t.trace;
  return objective_from_pairs(s, pair_values(s, t.mu)) + t.penalty * (vr * vr + tr * tr);
}

bool analytic_pair(const ComplexMatrix& vx, const RealVector& nx, const ComplexMatrix& vy,
                   const RealVector& ny, double mu, PairGradient& out) {
  const auto rx = nx.size(), ry = ny.size();
  if (rx == 0 || ry == 0) {
    out.d_nu_x = RealVector::Zero(rx);
    out.d_nu_y = RealVector::Zero(ry);
    out.d_frame_x = ComplexMatrix::Zero(vx.rows(), rx);
    out.d_frame_y = ComplexMatrix::Zero(vy.rows(), ry);
    return true;
  }
  const ComplexMatrix o = vx.adjoint() * vy;
  const auto dx = nx.cast<Complex>().asDiagonal();
  const auto dy = ny.cast<Complex>().asDiagonal();
  const ComplexMatrix b = dx * o * dy * o.adjoint();
  Eigen::ComplexEigenSolver<ComplexMatrix> es(b, true);
  const ComplexVector lam = es.eigenvalues();
  double scale = 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) scale = std::max(scale, std::abs(lam(i)));
  if (scale == 0.0) return false;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (std::abs(lam(i)) < kSimpleGap * scale) return false;
    for (Eigen::Index j = i + 1; j < lam.size(); ++j)
      if (std::abs(lam(i) - lam(j)) < kSimpleGap * scale) return false;
  }
  const ComplexMatrix r = es.eigenvectors();
  Eigen::PartialPivLU<ComplexMatrix> lu(r);
  const ComplexMatrix rinv = lu.inverse();
  double s = 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) s += std::abs(lam(i));
  ComplexVector g(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    g(i) = 2.0 * std::conj(lam(i)) - 2.0 * mu * s * std::conj(lam(i)) / std::abs(lam(i));
  // dL = Re tr(C dB)
  const ComplexMatrix c = r * g.asDiagonal() * rinv;

  const ComplexMatrix a1 = o * dy * o.adjoint() * c;
  const ComplexMatrix a2 = o.adjoint() * c * dx * o;
  out.d_nu_x = a1.diagonal().real();
  out.d_nu_y = a2.diagonal().real();
  const ComplexMatrix k = dy * o.adjoint() * c * dx + (c * dx * o * dy).adjoint();
  out.d_frame_x = vy * k;
  out.d_frame_y = vx * k.adjoint();
  return true;
}

PairGradient fd_pair(const ComplexMatrix& vx, const RealVector& nx, const ComplexMatrix& vy,
                     const RealVector& ny, double mu, double h) {
  PairGradient g;
  g.d_nu_x = RealVector::Zero(nx.size());
  g.d_nu_y = RealVector::Zero(ny.size());
  g.d_frame_x = ComplexMatrix::Zero(vx.rows(), vx.cols());
  g.d_frame_y = ComplexMatrix::Zero(vy.rows(), vy.cols());
  auto f = [&](const ComplexMatrix& a, const RealVector& na, const ComplexMatrix& b, const RealVector& nb) {
    return lmu_raw(a, na, b, nb, mu);
  };
  for (Eigen::Index i = 0; i < nx.size(); ++i) {
    RealVector p = nx, m = nx;
    p(i) += h;
    m(i) -= h;
    g.d_nu_x(i) = (f(vx, p, vy, ny) - f(vx, m, vy, ny)) / (2 * h);
  }
  for (Eigen::Index i = 0; i < ny.size(); ++i) {
    RealVector p = ny, m = ny;
    p(i) += h;
    m(i) -= h;
    g.d_nu_y(i) = (f(vx, nx, vy, p) - f(vx, nx, vy, m)) / (2 * h);
  }
  for (const Complex dir : {Complex(1, 0), Complex(0, 1)}) {
    for (Eigen::Index i = 0; i < vx.rows(); ++i)
      for (Eigen::Index j = 0; j < vx.cols(); ++j) {
        ComplexMatrix p = vx, m = vx;
        p(i, j) += h * dir;
        m(i, j) -= h * dir;
        g.d_frame_x(i, j) += dir * ((f(p, nx, vy, ny) - f(m, nx, vy, ny)) / (2 * h));
      }
    for (Eigen::Index i = 0; i < vy.rows(); ++i)
      for (Eigen::Index j = 0; j < vy.cols(); ++j) {
        ComplexMatrix p = vy, m = vy;
        p(i, j) += h * dir;
        m(i, j) -= h * dir;
        g.d_frame_y(i, j) += dir * ((f(vx, nx, p, ny) - f(vx, nx, m, ny)) / (2 * h));
      }
  }
  return g;
}

MeasureGradient state_gradient(const State& s, const Targets& t, GradMode mode,
                               const std::vector<double>& l) {
  const std::size_t k = s.size();
  MeasureGradient g;
  g.weight.assign(k, 0.0);
  g.spectrum.resize(k);
  g.frame.resize(k);
  for (std::size_t a = 0; a < k; ++a) {
    g.spectrum[a] = RealVector::Zero(s.nu[a].size());
    g.frame[a] = ComplexMatrix::Zero(s.v[a].rows(), s.v[a].cols());
  }
  const double vr = state_volume(s) - t.volume;
  const double tr = state_trace(s) - t.trace;
  for (std::size_t a = 0; a < k; ++a) {
    std::vector<double> row(k);
    for (std::size_t b = 0; b < k; ++b) row[b] = s.w[b] * l[a * k + b];
    g.weight[a] = 2.0 * pairwise_sum(row) + 2.0 * t.penalty * (vr + tr * s.nu[a].sum());
    g.spectrum[a].array() += 2.0 * t.penalty * tr * s.w[a];
  }

  std::vector<std::pair<std::size_t, std::size_t>> upper;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a; b < k; ++b) upper.emplace_back(a, b);
  std::vector<PairGradient> pg(upper.size());
  std::vector<char> fallback(upper.size(), 0);
  parallel_for(upper.size(), default_threads(), [&](std::size_t i) {
    const auto [a, b] = upper[i];
    if (mode == GradMode::analytic_with_fd_check &&
        analytic_pair(s.v[a], s.nu[a], s.v[b], s.nu[b], t.mu, pg[i]))
      return;
    fallback[i] = mode == GradMode::analytic_with_fd_check;
    pg[i] = fd_pair(s.v[a], s.nu[a], s.v[b], s.nu[b], t.mu, 1e-6);
  });
  for (std::size_t i = 0; i < upper.size(); ++i) {
    const auto [a, b] = upper[i];
    const double c = (a == b ? 1.0 : 2.0) * s.w[a] * s.w[b];
    g.spectrum[a] += c * pg[i].d_nu_x;
    g.frame[a] += c * pg[i].d_frame_x;
    g.spectrum[b] += c * pg[i].d_nu_y;
    g.frame[b] += c * pg[i].d_frame_y;
    g.fd_fallback_pairs += fallback[i];
  }
  return g;
}

// Tangent projection onto the Stiefel manifold at V.
ComplexMatrix stiefel_tangent(const ComplexMatrix& v, const ComplexMatrix& g) {
  const ComplexMatrix vg = v.adjoint() * g;
  return g - v * (0.5 * (vg + vg.adjoint()));
}

// Search direction: the gradient projected onto the linearized volume and
// trace constraints, with weights at the floor held fixed when the gradient
// pushes them further down.
struct Direction {
  std::vector<double> w;
  std::vector<RealVector> nu;
  std::vector<ComplexMatrix> v;
  double norm = 0.0;
};

Direction projected_gradient(const State& s, const MeasureGradient& g, bool move_points, double floor) {
  const std::size_t k = s.size();
  std::vector<char> fixed(k, 0);
  Direction d;
  for (int round = 0; round <= static_cast<int>(k); ++round) {
    d.w = g.weight;
    d.nu.assign(k, RealVector());
    d.v.assign(k, ComplexMatrix());
    for (std::size_t a = 0; a < k; ++a) {
      d.nu[a] = move_points ? g.spectrum[a] : RealVector::Zero(s.nu[a].size());
      d.v[a] = move_points ? stiefel_tangent(s.v[a], g.frame[a])
                           : ComplexMatrix::Zero(s.v[a].rows(), s.v[a].cols());
      if (fixed[a]) d.w[a] = 0.0;
    }
    // Constraint rows: J1 = (1 on free w), J2 = (tr_a on free w, w_a on nu).
    Eigen::Matrix2d jj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jg = Eigen::Vector2d::Zero();
    for (std::size_t a = 0; a < k; ++a) {
      const double ta = s.nu[a].sum();
      if (!fixed[a]) {
        jj(0, 0) += 1.0;
        jj(0, 1) += ta;
        jj(1, 1) += ta * ta;
        jg(0) += d.w[a];
        jg(1) += ta * d.w[a];
      }
      if (move_points) {
        jj(1, 1) += s.w[a] * s.w[a] * static_cast<double>(s.nu[a].size());
        jg(1) += s.w[a] * d.nu[a].sum();
      }
    }
    jj(1, 0) = jj(0, 1);
    const Eigen::Vector2d y = jj.completeOrthogonalDecomposition().solve(jg);
    for (std::size_t a = 0; a < k; ++a) {
      if (!fixed[a]) d.w[a] -= y(0) + y(1) * s.nu[a].sum();
      if (move_points) d.nu[a].array() -= y(1) * s.w[a];
    }
    bool changed = false;
    for (std::size_t a = 0; a < k; ++a)
      if (!fixed[a] && s.w[a] <= floor * (1.0 + 1e-9) && d.w[a] > 0.0) {
        fixed[a] = 1;
        changed = true;
      }
    if (!changed) break;
  }
  double sq = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    sq += d.w[a] * d.w[a] + d.nu[a].squaredNorm() + d.v[a].squaredNorm();
  }
  d.norm = std::sqrt(sq);
  return d;
}

// Projection of y onto {w >= floor, sum w = volume, sum t_a w_a = trace}.
// The minimizer is w_a = max(floor, y_a - alpha - beta t_a); alpha solves
// the volume equation for fixed beta and the trace is monotone in beta.
bool project_weights_with_trace(std::vector<double>& y, const std::vector<double>& t, double volume,
                                double trace, double floor) {
  const std::size_t k = y.size();
  auto weights_for = [&](double beta) {
    std::vector<double> shifted(k);
    for (std::size_t a = 0; a < k; ++a) shifted[a] = y[a] - beta * t[a];
    return project_simplex(shifted, volume, floor);
  };
  auto trace_of = [&](const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t a = 0; a < k; ++a) s += w[a] * t[a];
    return s;
  };
  double lo = -1.0, hi = 1.0;
  for (int i = 0; i < 200 && trace_of(weights_for(lo)) < trace; ++i) lo *= 2.0;
  for (int i = 0; i < 200 && trace_of(weights_for(hi)) > trace; ++i) hi *= 2.0;
  const double tol = 1e-13 * std::max(1.0, std::abs(trace));
  if (trace_of(weights_for(lo)) < trace - tol || trace_of(weights_for(hi)) > trace + tol) return false;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (trace_of(weights_for(mid)) > trace ? lo : hi) = mid;
  }
  std::vector<double> w_lo = weights_for(lo), w_hi = weights_for(hi);
  const double f_lo = trace_of(w_lo), f_hi = trace_of(w_hi);
  y = std::abs(f_lo - trace) <= std::abs(f_hi - trace) ? w_lo : w_hi;
  return std::abs(trace_of(y) - trace) <= 1e-9 * std::max(1.0, std::abs(trace));
}

// Pulls a trial state back onto the feasible set. Spectrum entries that
// crossed zero relative to `ref` are clamped to zero (and removed later by
// compact). Returns false if the trace correction cannot be made without
// another sign change.
bool retract(State& s, const State& ref, const Targets& t, double floor, bool move_points) {
  if (!move_points) {
    std::vector<double> tr(s.size());
    for (std::size_t a = 0; a < s.size(); ++a) tr[a] = s.nu[a].sum();
    return project_weights_with_trace(s.w, tr, t.volume, t.trace, floor);
  }
  s.w = project_simplex(s.w, t.volume, floor);
  double denom = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a) {
    const double cut = 1e-12 * ref.nu[a].cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < s.nu[a].size(); ++i) {
      if (s.nu[a](i) * ref.nu[a](i) <= 0.0 || std::abs(s.nu[a](i)) <= cut) s.nu[a](i) = 0.0;
      if (s.nu[a](i) != 0.0) denom += s.w[a] * s.w[a];
    }
  }
  const double gap = t.trace - state_trace(s);
  if (gap != 0.0) {
    if (denom == 0.0) return false;
    const double delta = gap / denom;
    for (std::size_t a = 0; a < s.size(); ++a) {
      for (Eigen::Index i = 0; i < s.nu[a].size(); ++i) {
        if (s.nu[a](i) == 0.0) continue;
        const double updated = s.nu[a](i) + delta * s.w[a];
        if (updated * s.nu[a](i) <= 0.0) return false;
        s.nu[a](i) = updated;
      }
    }
  }
  for (auto& v : s.v) {
    if (v.cols() == 0) continue;
    try {
      v = orthonormalize_columns(v);
    } catch (const Error&) {
      return false;
    }
  }
  return true;
}

// Removes zero spectrum entries together with their frame columns.
void compact(State& s) {
  for (std::size_t a = 0; a < s.size(); ++a) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < s.nu[a].size(); ++i)
      if (s.nu[a](i) != 0.0) keep.push_back(i);
    if (static_cast<Eigen::Index>(keep.size()) == s.nu[a].size()) continue;
    RealVector nu(static_cast<Eigen::Index>(keep.size()));
    ComplexMatrix v(s.v[a].rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
      nu(static_cast<Eigen::Index>(j)) = s.nu[a](keep[j]);
      v.col(static_cast<Eigen::Index>(j)) = s.v[a].col(keep[j]);
    }
    s.nu[a] = std::move(nu);
    s.v[a] = std::move(v);
  }
}

double directional(const MeasureGradient& g, const State& from, const State& to) {
  double sum = 0.0;
  for (std::size_t a = 0; a < from.size(); ++a) {
    sum += g.weight[a] * (to.w[a] - from.w[a]);
    sum += g.spectrum[a].dot(to.nu[a] - from.nu[a]);
    sum += (g.frame[a].adjoint() * (to.v[a] - from.v[a])).trace().real();
  }
  return sum;
}

State step_state(const State& s, const Direction& d, double t) {
  State out = s;
  for (std::size_t a = 0; a < s.size(); ++a) {
    out.w[a] -= t * d.w[a];
    out.nu[a] -= t * d.nu[a];
    out.v[a] -= t * d.v[a];
  }
  return out;
}

void anneal(State& s, const Targets& t, const OptConfig& cfg, double floor) {
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double f = penalized_objective(s, t);
  const double temp0 = cfg.anneal_temperature * std::max(f, 1e-300);
  for (int step = 0; step < cfg.anneal_steps; ++step) {
    const auto a = static_cast<std::size_t>(rng() % s.size());
    State trial = s;
    for (Eigen::Index i = 0; i < trial.v[a].rows(); ++i)
      for (Eigen::Index j = 0; j < trial.v[a].cols(); ++j)
        trial.v[a](i, j) += 0.1 * Complex(gauss(rng), gauss(rng));
    const double u = unif(rng);
    if (!retract(trial, s, t, floor, true)) continue;
    compact(trial);
    const double ft = penalized_objective(trial, t);
    const double temp = temp0 * (1.0 - static_cast<double>(step) / cfg.anneal_steps) + 1e-300;
    if (ft <= f || u < std::exp(-(ft - f) / temp)) {
      s = std::move(trial);
      f = ft;
    }
  }
}

// Fallback when the Armijo search fails at a kink of |lambda| (eigenvalue
// collisions), where -grad at s is not a descent direction. Directions are
// taken from gradients at randomly perturbed nearby states; the first one
// giving a strict decrease from s is accepted.
bool kink_escape(const State& s, double f, const Targets& t, const OptConfig& cfg, double floor, int iter,
                 State& trial, double& ft, std::vector<double>& lt) {
  std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(iter + 1)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  double radius = kKinkRadius;
  for (int sample = 0; sample < kKinkSamples; ++sample, radius *= 0.5) {
    State near = s;
    for (std::size_t a = 0; a < near.size(); ++a) {
      near.w[a] *= 1.0 + radius * gauss(rng);
      for (Eigen::Index i = 0; i < near.nu[a].size(); ++i) near.nu[a](i) *= 1.0 + radius * gauss(rng);
      for (Eigen::Index i = 0; i < near.v[a].rows(); ++i)
        for (Eigen::Index j = 0; j < near.v[a].cols(); ++j)
          near.v[a](i, j) += radius * Complex(gauss(rng), gauss(rng));
    }
    if (!retract(near, s, t, floor, true)) continue;
    bool lost_entry = false;
    for (const auto& nu : near.nu) lost_entry = lost_entry || (nu.array() == 0.0).any();
    if (lost_entry) continue;
    const MeasureGradient g = state_gradient(near, t, cfg.grad_mode, pair_values(near, cfg.mu));
    const Direction d = projected_gradient(near, g, true, floor);
    double step = cfg.step_init;
    for (int bt = 0; bt < 40; ++bt, step *= 0.5) {
      trial = step_state(s, d, step);
      if (!retract(trial, s, t, floor, true)) continue;
      compact(trial);
      lt = pair_values(trial, cfg.mu);
      const double vr = state_volume(trial) - t.volume, tr = state_trace(trial) - t.trace;
      ft = objective_from_pairs(trial, lt) + t.penalty * (vr * vr + tr * tr);
      if (ft < f) return true;
    }
  }
  return false;
}

}  // namespace

const char* to_string(OptStatus s) {
  switch (s) {
    case OptStatus::converged: return "converged";
    case OptStatus::max_iters: return "max-iters";
    case OptStatus::stalled: return "stalled";
  }
  return "unknown";
}

double objective_mu(const CausalFermionSystem& system, double mu) {
  if (mu < 0.0) throw Error(ErrorCode::invalid_argument, "mu must be nonnegative");
  if (system.size() == 0) throw Error(ErrorCode::invalid_argument, "objective of an empty measure");
  const auto spectra = pair_spectra(system);
  const std::size_t k = system.size();
  const auto& atoms = system.atoms();
  std::vector<double> terms(k * k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      terms[a * k + b] = atoms[a].weight * atoms[b].weight * lagrangian_mu_from_spectrum(spectra[a * k + b], mu);
  return pairwise_sum(terms);
}

bool lagrangian_mu_gradient(const OperatorPoint& x, const OperatorPoint& y, double mu, PairGradient& out) {
  if (x.dim() != y.dim()) throw Error(ErrorCode::dimension_mismatch, "operator points live on different spaces");
  return analytic_pair(x.frame(), x.spectrum(), y.frame(), y.spectrum(), mu, out);
}

PairGradient lagrangian_mu_gradient_fd(const OperatorPoint& x, const OperatorPoint& y, double mu, double h) {
  if (x.dim() != y.dim()) throw Error(ErrorCode::dimension_mismatch, "operator points live on different spaces");
  return fd_pair(x.frame(), x.spectrum(), y.frame(), y.spectrum(), mu, h);
}

MeasureGradient objective_gradient(const CausalFermionSystem& system, double mu, GradMode mode) {
  const State s = to_state(system);
  const Targets t{mu, state_volume(s), state_trace(s), 0.0};
  return state_gradient(s, t, mode, pair_values(s, mu));
}

std::vector<double> project_simplex(const std::vector<double>& w, double total, double floor) {
  const std::size_t k = w.size();
  if (k == 0) return {};
  const double budget = total - floor * static_cast<double>(k);
  if (budget < 0.0) throw Error(ErrorCode::infeasible, "weight floor exceeds the volume target");
  std::vector<double> y(k);
  for (std::size_t i = 0; i < k; ++i) y[i] = w[i] - floor;
  std::vector<double> u = y;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    cum += u[j];
    const double cand = (cum - budget) / static_cast<double>(j + 1);
    if (u[j] - cand > 0.0) theta = cand;
  }
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = floor + std::max(y[i] - theta, 0.0);
  return out;
}

DiscreteMeasure make_trace_feasible(const DiscreteMeasure& measure, double trace_target) {
  double pos = 0.0, neg = 0.0;
  for (const auto& a : measure.atoms)
    for (Eigen::Index i = 0; i < a.point.rank(); ++i) {
      const double v = a.weight * a.point.spectrum()(i);
      (v > 0 ? pos : neg) += std::abs(v);
    }
  double alpha = 1.0, beta = 1.0;  // scale factors for positive / negative parts
  if (pos > 0.0 && neg > 0.0) {
    if (trace_target < pos - neg)
      beta = (pos - trace_target) / neg;
    else
      alpha = (trace_target + neg) / pos;
  } else if (pos > 0.0 && trace_target > 0.0) {
    alpha = trace_target / pos;
  } else if (neg > 0.0 && trace_target < 0.0) {
    beta = -trace_target / neg;
  } else if (!(pos == 0.0 && neg == 0.0 && trace_target == 0.0)) {
    std::ostringstream os;
    os << "trace target " << trace_target << " is unreachable with the signature budget of the start measure";
    throw Error(ErrorCode::infeasible, os.str());
  }
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    std::ostringstream os;
    os << "trace target " << trace_target << " is unreachable with the signature budget of the start measure";
    throw Error(ErrorCode::infeasible, os.str());
  }
  DiscreteMeasure out;
  for (const auto& a : measure.atoms) {
    RealVector nu = a.point.spectrum();
    for (Eigen::Index i = 0; i < nu.size(); ++i) nu(i) *= nu(i) > 0 ? alpha : beta;
    out.atoms.push_back({OperatorPoint::from_orthonormal(a.point.frame(), nu, a.point.spin_dimension()), a.weight});
  }
  return out;
}

OptResult minimize_measure(const CausalFermionSystem& system, const OptConfig& cfg) {
  if (cfg.max_iters < 1) throw Error(ErrorCode::invalid_argument, "max_iters must be at least 1");
  if (!(cfg.penalty_weight > 0.0)) throw Error(ErrorCode::invalid_argument, "penalty_weight must be positive");
  if (!(cfg.volume_target > 0.0)) throw Error(ErrorCode::invalid_argument, "volume_target must be positive");
  if (cfg.mu < 0.0) throw Error(ErrorCode::invalid_argument, "mu must be nonnegative");
  if (!(cfg.step_init > 0.0)) throw Error(ErrorCode::invalid_argument, "step_init must be positive");
  if (system.size() == 0) throw Error(ErrorCode::invalid_argument, "cannot optimize an empty measure");

  const Targets t{cfg.mu, cfg.volume_target, cfg.trace_target, cfg.penalty_weight};
  const double floor = kFloorFraction * cfg.volume_target;

  // Feasibility phase: weights onto the simplex, then a sign-preserving
  // rescaling of the spectra for the trace.
  State s = to_state(system);
  if (cfg.optimize_points) {
    s.w = project_simplex(s.w, cfg.volume_target, floor);
    DiscreteMeasure m = to_measure(s);
    s = to_state(CausalFermionSystem(system.dim(), system.spin_dimension(),
                                     make_trace_feasible(m, cfg.trace_target)));
  }
  const State start = s;
  if (!retract(s, start, t, floor, cfg.optimize_points))
    throw Error(ErrorCode::infeasible, cfg.optimize_points
                                           ? "feasibility phase could not satisfy the trace target"
                                           : "trace target is outside the range reachable by the weights alone");
  if (cfg.anneal_steps > 0 && cfg.optimize_points) anneal(s, t, cfg, floor);

  OptResult res;
  auto l = pair_values(s, cfg.mu);
  double f = objective_from_pairs(s, l);
  {
    const double vr = state_volume(s) - t.volume, tr = state_trace(s) - t.trace;
    f += t.penalty * (vr * vr + tr * tr);
  }
  res.objective_history.push_back(f);

  double step = cfg.step_init;
  int stall = 0;
  res.status = OptStatus::max_iters;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const MeasureGradient g = state_gradient(s, t, cfg.grad_mode, l);
    if (it == 0 && cfg.grad_mode == GradMode::analytic_with_fd_check) {
      const MeasureGradient fd = state_gradient(s, t, GradMode::finite_difference, l);
      double diff = 0.0, ref = 0.0;
      for (std::size_t a = 0; a < s.size(); ++a) {
        diff += (g.spectrum[a] - fd.spectrum[a]).squaredNorm() + (g.frame[a] - fd.frame[a]).squaredNorm();
        ref += fd.spectrum[a].squaredNorm() + fd.frame[a].squaredNorm();
      }
      res.fd_check_error = ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff);
    }
    const Direction d = projected_gradient(s, g, cfg.optimize_points, floor);
    res.grad_norm = d.norm;
    res.log.push_back({it, f, state_volume(s) - t.volume, state_trace(s) - t.trace, d.norm});
    if (d.norm <= cfg.gradient_tolerance) {
      res.status = OptStatus::converged;
      break;
    }

    bool accepted = false;
    State trial;
    double ft = 0.0;
    std::vector<double> lt;
    for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
      trial = step_state(s, d, step);
      if (!retract(trial, s, t, floor, cfg.optimize_points)) continue;
      const double slope = directional(g, s, trial);
      compact(trial);
      lt = pair_values(trial, cfg.mu);
      const double vr = state_volume(trial) - t.volume, tr = state_trace(trial) - t.trace;
      ft = objective_from_pairs(trial, lt) + t.penalty * (vr * vr + tr * tr);
      if (ft <= f + kArmijo * slope && ft <= f) {
        accepted = true;
        break;
      }
    }
    if (!accepted && cfg.optimize_points) {
      accepted = kink_escape(s, f, t, cfg, floor, it, trial, ft, lt);
      if (accepted) step = cfg.step_init;
    }
    if (!accepted) {
      res.status = OptStatus::stalled;
      break;
    }
    const double rel = (f - ft) / std::max(std::abs(f), 1e-300);
    s = std::move(trial);
    l = std::move(lt);
    f = ft;
    res.objective_history.push_back(f);
    step *= 2.0;
    stall = rel < cfg.stall_tolerance ? stall + 1 : 0;
    if (stall >= cfg.stall_window) {
      res.status = OptStatus::stalled;
      break;
    }
  }

  // Prune negligible atoms at the end only.
  State kept;
  kept.dim = s.dim;
  kept.spin_dim = s.spin_dim;
  for (std::size_t a = 0; a < s.size(); ++a) {
    if (s.w[a] < kPruneFraction * cfg.volume_target) {
      ++res.pruned_atoms;
      continue;
    }
    kept.w.push_back(s.w[a]);
    kept.nu.push_back(s.nu[a]);
    kept.v.push_back(s.v[a]);
  }
  res.measure = to_measure(kept);
  res.volume_residual = state_volume(kept) - t.volume;
  res.trace_residual = state_trace(kept) - t.trace;
  return res;
}

StationarityReport stationarity_report(const CausalFermionSystem& system, const OptConfig& cfg,
                                       const std::vector<OperatorPoint>& probes) {
  if (system.size() == 0) throw Error(ErrorCode::invalid_argument, "stationarity of an empty measure");
  const State s = to_state(system);
  const Targets t{cfg.mu, cfg.volume_target, cfg.trace_target, cfg.penalty_weight};
  const auto l = pair_values(s, cfg.mu);
  const std::size_t k = s.size();
  StationarityReport rep;
  const MeasureGradient g = state_gradient(s, t, cfg.grad_mode, l);
  rep.grad_norm = projected_gradient(s, g, cfg.optimize_points, kFloorFraction * cfg.volume_target).norm;
  for (std::size_t a = 0; a < k; ++a) {
    std::vector<double> row(k);
    for (std::size_t b = 0; b < k; ++b) row[b] = s.w[b] * l[a * k + b];
    rep.ell_support.push_back(pairwise_sum(row));
  }
  for (const auto& p : probes) {
    std::vector<double> row(k);
    for (std::size_t b = 0; b < k; ++b) row[b] = s.w[b] * lmu_raw(p.frame(), p.spectrum(), s.v[b], s.nu[b], cfg.mu);
    rep.ell_probes.push_back(pairwise_sum(row));
  }
  const auto [mn, mx] = std::minmax_element(rep.ell_support.begin(), rep.ell_support.end());
  rep.ell_spread = *mx - *mn;
  rep.ell_mean = pairwise_sum(rep.ell_support) / static_cast<double>(k);

  // Least-squares fit ell_a ~ c0 + c1 tr(x_a).
  Eigen::MatrixXd a(static_cast<Eigen::Index>(k), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    a(static_cast<Eigen::Index>(i), 0) = 1.0;
    a(static_cast<Eigen::Index>(i), 1) = s.nu[i].sum();
    y(static_cast<Eigen::Index>(i)) = rep.ell_support[i];
  }
  const Eigen::VectorXd coef = a.completeOrthogonalDecomposition().solve(y);
  const Eigen::VectorXd resid = y - a * coef;
  rep.ell_kkt_spread = k > 0 ? resid.maxCoeff() - resid.minCoeff() : 0.0;
  return rep;
}

void write_iteration_csv(std::ostream& out, const std::vector<IterationRecord>& log) {
  out << "iter,objective,volume_residual,trace_residual,grad_norm\r\n";
  for (const auto& r : log)
    out << r.iter << ',' << io::format_double(r.objective) << ',' << io::format_double(r.volume_residual) << ','
        << io::format_double(r.trace_residual) << ',' << io::format_double(r.grad_norm) << "\r\n";
}

}  // namespace cfs
