#include "cfs/discrete_vp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "cfs/io.hpp"
#include "cfs/spectral.hpp"

namespace cfs::dvp {

namespace {

constexpr double kSimpleGap = 1e-6;

Eigen::VectorXcd sign_vector(const KreinSpace& s) {
  Eigen::VectorXcd v(s.dim());
  for (int i = 0; i < s.dim(); ++i) v(i) = static_cast<double>(s.signs()[static_cast<std::size_t>(i)]);
  return v;
}

ComplexMatrix hermitian_part(const ComplexMatrix& m) { return 0.5 * (m + m.adjoint()); }

void check_square(const ComplexMatrix& p, int d, const char* what) {
  if (p.rows() != d || p.cols() != d) {
    std::ostringstream os;
    os << what << " is " << p.rows() << "x" << p.cols() << ", expected " << d << "x" << d;
    throw Error(ErrorCode::dimension_mismatch, os.str());
  }
}

struct PairSpectrum {
  double abs_sq = 0.0;   // sum |l|^2 = |A^2|
  double abs_sum = 0.0;  // sum |l| = |A|
};

std::vector<PairSpectrum> all_pairs(const ComplexMatrix& p, const SpacetimePartition& part) {
  check_square(p, part.dim(), "fermion matrix");
  const auto k = static_cast<std::size_t>(part.count());
  std::vector<PairSpectrum> out(k * k);
  parallel_for(k * k, default_threads(), [&](std::size_t i) {
    const int x = static_cast<int>(i / k), y = static_cast<int>(i % k);
    const ComplexMatrix a = discrete_chain(p, part, x, y);
    Eigen::ComplexEigenSolver<ComplexMatrix> es(a, false);
    for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) {
      out[i].abs_sq += std::norm(es.eigenvalues()(j));
      out[i].abs_sum += std::abs(es.eigenvalues()(j));
    }
  });
  return out;
}

double lmu_of_chain(const ComplexMatrix& a, double mu) {
  Eigen::ComplexEigenSolver<ComplexMatrix> es(a, false);
  double sq = 0.0, s = 0.0;
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) {
    sq += std::norm(es.eigenvalues()(j));
    s += std::abs(es.eigenvalues()(j));
  }
  return sq - mu * s * s;
}

double t_of_chain(const ComplexMatrix& a) {
  Eigen::ComplexEigenSolver<ComplexMatrix> es(a, false);
  double s = 0.0;
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) s += std::abs(es.eigenvalues()(j));
  return s * s;
}

// Per-eigenvalue weights w_i with dF = 2 Re sum_i w_i dlambda_i.
using WeightFn = std::function<Complex(Complex lambda, double abs_sum)>;

// Fills block (y,x) of R from the pair (x,y): R(y,x) = 2 P(y,x) Z_xy with
// Z_xy = sum_i w_i r_i l_i^* / (l_i^* r_i). Falls back to differences of
// `value` in the entries of P(x,y) when the spectrum is not simple.
bool fill_block(const ComplexMatrix& p, const SpacetimePartition& part, int x, int y, const WeightFn& wfn,
                const std::function<double(const ComplexMatrix&)>& value, ComplexMatrix& r) {
  const Block& bx = part.block(x);
  const Block& by = part.block(y);
  const ComplexMatrix pxy = p.block(bx.offset, by.offset, bx.size, by.size);
  const ComplexMatrix pyx = p.block(by.offset, bx.offset, by.size, bx.size);
  const ComplexMatrix a = pxy * pyx;
  Eigen::ComplexEigenSolver<ComplexMatrix> es(a, false);
  const ComplexVector lam = es.eigenvalues();
  double scale = 0.0, abs_sum = 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    scale = std::max(scale, std::abs(lam(i)));
    abs_sum += std::abs(lam(i));
  }
  // Eigenvalues below the gap count as zero and get weight 0 (the symmetric
  // derivative of |lambda| there). The remaining ones must be simple.
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (std::abs(lam(i)) > kSimpleGap * scale) active.push_back(i);
  bool simple = true;
  for (std::size_t i = 0; simple && i < active.size(); ++i)
    for (std::size_t j = i + 1; simple && j < active.size(); ++j)
      if (std::abs(lam(active[i]) - lam(active[j])) < kSimpleGap * scale) simple = false;
  if (simple) {
    ComplexMatrix z = ComplexMatrix::Zero(a.rows(), a.cols());
    for (Eigen::Index i : active) {
      const ComplexMatrix shifted = a - lam(i) * ComplexMatrix::Identity(a.rows(), a.cols());
      Eigen::JacobiSVD<ComplexMatrix> svd(shifted, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const ComplexVector rv = svd.matrixV().col(a.cols() - 1);
      const ComplexVector lv = svd.matrixU().col(a.rows() - 1);
      const Complex overlap = lv.dot(rv);
      if (std::abs(overlap) < 1e-10) {
        simple = false;
        break;
      }
      z += (wfn(lam(i), abs_sum) / overlap) * rv * lv.adjoint();
    }
    if (simple) {
      r.block(by.offset, bx.offset, by.size, bx.size) = 2.0 * pyx * z;
      return true;
    }
  }
  // dL(A_xy) = Re tr(c R(y,x) dP(x,y)), c = 2 on the diagonal, 1 otherwise.
  const double c = (x == y) ? 2.0 : 1.0;
  const double h = 1e-6 * std::max(1.0, p.cwiseAbs().maxCoeff());
  ComplexMatrix blk(by.size, bx.size);
  for (int i = 0; i < bx.size; ++i)
    for (int j = 0; j < by.size; ++j) {
      Complex d;
      for (const Complex dir : {Complex(1, 0), Complex(0, 1)}) {
        ComplexMatrix pp = pxy, pm = pxy;
        pp(i, j) += h * dir;
        pm(i, j) -= h * dir;
        auto chain = [&](const ComplexMatrix& q) {
          if (x == y) return ComplexMatrix(q * q);
          return ComplexMatrix(q * pyx);
        };
        const double diff = (value(chain(pp)) - value(chain(pm))) / (2.0 * h);
        d += std::conj(dir) * diff;
      }
      blk(j, i) = d / c;
    }
  r.block(by.offset, bx.offset, by.size, bx.size) = blk;
  return false;
}

GradientKernel gradient_impl(const ComplexMatrix& p, const SpacetimePartition& part, const WeightFn& wfn,
                             const std::function<double(const ComplexMatrix&)>& value) {
  check_square(p, part.dim(), "fermion matrix");
  const auto k = static_cast<std::size_t>(part.count());
  GradientKernel g;
  g.r = ComplexMatrix::Zero(p.rows(), p.cols());
  std::vector<char> analytic(k * k, 1);
  parallel_for(k * k, default_threads(), [&](std::size_t i) {
    const int x = static_cast<int>(i / k), y = static_cast<int>(i % k);
    analytic[i] = fill_block(p, part, x, y, wfn, value, g.r) ? 1 : 0;
  });
  for (char a : analytic) g.fd_blocks += a ? 0 : 1;
  return g;
}

WeightFn lmu_weights(double mu) {
  return [mu](Complex l, double s) { return std::conj(l) - mu * s * std::conj(l) / std::abs(l); };
}

WeightFn t_weights() {
  return [](Complex l, double s) { return s * std::conj(l) / std::abs(l); };
}

int numerical_rank(const ComplexMatrix& p, double tau) {
  if (p.size() == 0) return 0;
  Eigen::JacobiSVD<ComplexMatrix> svd(p);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tau * sv(0)) ++r;
  return r;
}

double min_eigenvalue_ratio(const ComplexMatrix& p, const KreinSpace& s) {
  const ComplexMatrix g = hermitian_part(-(sign_vector(s).asDiagonal() * p));
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(g, Eigen::EigenvaluesOnly);
  const double nrm = es.eigenvalues().cwiseAbs().maxCoeff();
  return nrm == 0.0 ? 0.0 : es.eigenvalues().minCoeff() / nrm;
}

}  // namespace

KreinSpace::KreinSpace(std::vector<int> signs) : signs_(std::move(signs)) {
  for (int v : signs_)
    if (v != 1 && v != -1) throw Error(ErrorCode::invalid_argument, "Krein signature entries must be +1 or -1");
}

KreinSpace KreinSpace::canonical(const std::vector<int>& block_sizes) {
  std::vector<int> signs;
  for (int b : block_sizes) {
    if (b <= 0 || b % 2 != 0) throw Error(ErrorCode::invalid_argument, "canonical blocks must have positive even size");
    for (int i = 0; i < b / 2; ++i) signs.push_back(1);
    for (int i = 0; i < b / 2; ++i) signs.push_back(-1);
  }
  return KreinSpace(std::move(signs));
}

int KreinSpace::plus() const { return static_cast<int>(std::count(signs_.begin(), signs_.end(), 1)); }

ComplexMatrix KreinSpace::matrix() const { return sign_vector(*this).asDiagonal(); }

SpacetimePartition::SpacetimePartition(std::vector<int> sizes) {
  int offset = 0;
  for (int s : sizes) {
    if (s <= 0) throw Error(ErrorCode::invalid_argument, "spacetime blocks must be nonempty");
    blocks_.push_back({offset, s});
    offset += s;
  }
  dim_ = offset;
}

const Block& SpacetimePartition::block(int x) const {
  if (x < 0 || x >= count()) {
    std::ostringstream os;
    os << "block index " << x << " out of range [0," << count() << ")";
    throw Error(ErrorCode::invalid_argument, os.str());
  }
  return blocks_[static_cast<std::size_t>(x)];
}

ComplexMatrix krein_adjoint(const ComplexMatrix& m, const KreinSpace& s) {
  check_square(m, s.dim(), "matrix");
  const auto sv = sign_vector(s);
  return sv.asDiagonal() * m.adjoint() * sv.asDiagonal();
}

bool is_krein_selfadjoint(const ComplexMatrix& p, const KreinSpace& s, double rel_tol) {
  return (krein_adjoint(p, s) - p).norm() <= rel_tol * p.norm();
}

AdmissibilityReport check_admissible(const ComplexMatrix& p, int f, const KreinSpace& s, double tau_rank,
                                     int random_probes, std::uint64_t seed) {
  check_square(p, s.dim(), "fermion matrix");
  AdmissibilityReport rep;
  rep.krein_selfadjoint = is_krein_selfadjoint(p, s);
  rep.trace = p.trace();
  rep.trace_ok = std::abs(rep.trace - Complex(f, 0)) <= 1e-8;
  rep.rank = numerical_rank(p, tau_rank);
  rep.rank_ok = rep.rank <= f;

  const ComplexMatrix g = hermitian_part(-(sign_vector(s).asDiagonal() * p));
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(g);
  std::vector<ComplexVector> probes;
  for (Eigen::Index i = 0; i < es.eigenvectors().cols(); ++i) probes.push_back(es.eigenvectors().col(i));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < random_probes; ++i) {
    ComplexVector u(s.dim());
    for (int j = 0; j < s.dim(); ++j) u(j) = Complex(gauss(rng), gauss(rng));
    probes.push_back(u);
  }
  rep.min_probe_value = std::numeric_limits<double>::infinity();
  for (const auto& u : probes) {
    const double v = (u.adjoint() * g * u)(0).real() / u.squaredNorm();
    if (v < rep.min_probe_value) {
      rep.min_probe_value = v;
      rep.witness = u;
    }
  }
  if (probes.empty()) rep.min_probe_value = 0.0;
  const double pn = p.operatorNorm();
  rep.positive = rep.min_probe_value >= -1e-10 * pn;
  if (rep.positive) rep.witness = ComplexVector();
  rep.admissible = rep.krein_selfadjoint && rep.trace_ok && rep.rank_ok && rep.positive;
  return rep;
}

ComplexMatrix discrete_kernel(const ComplexMatrix& p, const SpacetimePartition& part, int x, int y) {
  check_square(p, part.dim(), "fermion matrix");
  const Block& bx = part.block(x);
  const Block& by = part.block(y);
  return p.block(bx.offset, by.offset, bx.size, by.size);
}

ComplexMatrix discrete_chain(const ComplexMatrix& p, const SpacetimePartition& part, int x, int y) {
  return discrete_kernel(p, part, x, y) * discrete_kernel(p, part, y, x);
}

double discrete_action(const ComplexMatrix& p, const SpacetimePartition& part) {
  const auto pairs = all_pairs(p, part);
  std::vector<double> v(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) v[i] = pairs[i].abs_sq;
  return pairwise_sum(v);
}

double discrete_constraint(const ComplexMatrix& p, const SpacetimePartition& part) {
  const auto pairs = all_pairs(p, part);
  std::vector<double> v(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) v[i] = pairs[i].abs_sum * pairs[i].abs_sum;
  return pairwise_sum(v);
}

double discrete_action_mu(const ComplexMatrix& p, const SpacetimePartition& part, double mu) {
  const auto pairs = all_pairs(p, part);
  std::vector<double> v(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) v[i] = pairs[i].abs_sq - mu * pairs[i].abs_sum * pairs[i].abs_sum;
  return pairwise_sum(v);
}

ComplexMatrix unitary_flow_step(const ComplexMatrix& p, const ComplexMatrix& g, double t, const KreinSpace& s,
                                bool verify) {
  check_square(p, s.dim(), "fermion matrix");
  check_square(g, s.dim(), "generator");
  if ((krein_adjoint(g, s) - g).norm() > 1e-10 * std::max(1.0, g.norm()))
    throw Error(ErrorCode::not_hermitian, "flow generator is not Krein self-adjoint");
  if (g.norm() == 0.0 || t == 0.0) return p;
  const ComplexMatrix itg = (kI * t) * g;
  const ComplexMatrix u = itg.exp();
  const ComplexMatrix uinv = (-itg).exp();
  const ComplexMatrix out = u * p * uinv;
  if (verify) {
    const double scale = std::max(1.0, p.norm());
    if ((krein_adjoint(out, s) - out).norm() > 1e-8 * scale)
      throw Error(ErrorCode::ill_conditioned, "flow step lost Krein self-adjointness");
    if (std::abs(out.trace() - p.trace()) > 1e-8 * scale)
      throw Error(ErrorCode::ill_conditioned, "flow step changed the trace");
    if (numerical_rank(out, 1e-10) != numerical_rank(p, 1e-10))
      throw Error(ErrorCode::ill_conditioned, "flow step changed the rank");
    if (min_eigenvalue_ratio(p, s) >= -1e-10 && min_eigenvalue_ratio(out, s) < -1e-8)
      throw Error(ErrorCode::ill_conditioned, "flow step broke positivity of -P");
  }
  return out;
}

GradientKernel gradient_kernel(const ComplexMatrix& p, const SpacetimePartition& part, double mu) {
  return gradient_impl(p, part, lmu_weights(mu), [mu](const ComplexMatrix& a) { return lmu_of_chain(a, mu); });
}

ComplexMatrix gradient_kernel_fd(const ComplexMatrix& p, const SpacetimePartition& part, double mu, double h) {
  check_square(p, part.dim(), "fermion matrix");
  ComplexMatrix r(p.rows(), p.cols());
  for (Eigen::Index a = 0; a < p.rows(); ++a)
    for (Eigen::Index b = 0; b < p.cols(); ++b) {
      Complex d;
      for (const Complex dir : {Complex(1, 0), Complex(0, 1)}) {
        ComplexMatrix pp = p, pm = p;
        pp(a, b) += h * dir;
        pm(a, b) -= h * dir;
        d += std::conj(dir) * (discrete_action_mu(pp, part, mu) - discrete_action_mu(pm, part, mu)) / (2.0 * h);
      }
      r(b, a) = 0.5 * d;
    }
  return r;
}

ComplexMatrix q_operator(const ComplexMatrix& r, const KreinSpace& s) { return 0.25 * (r + krein_adjoint(r, s)); }

double el_residual(const ComplexMatrix& p, const SpacetimePartition& part, const KreinSpace& s, double mu) {
  const ComplexMatrix q = q_operator(gradient_kernel(p, part, mu).r, s);
  return (p * q - q * p).norm();
}

FlowResult flow_descent(const ComplexMatrix& p0, const SpacetimePartition& part, const KreinSpace& s,
                        const FlowConfig& cfg) {
  check_square(p0, s.dim(), "fermion matrix");
  if (part.dim() != s.dim()) throw Error(ErrorCode::dimension_mismatch, "partition and Krein space differ in dimension");
  const auto sv = sign_vector(s);
  std::vector<char> in_region(static_cast<std::size_t>(s.dim()), cfg.region.empty() ? 1 : 0);
  for (int x : cfg.region) {
    const Block& b = part.block(x);
    for (int i = 0; i < b.size; ++i) in_region[static_cast<std::size_t>(b.offset + i)] = 1;
  }
  auto mask = [&](ComplexMatrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        if (!in_region[static_cast<std::size_t>(i)] || !in_region[static_cast<std::size_t>(j)]) m(i, j) = 0.0;
  };
  // [P,Q] for the kernel r, and the Hermitian K with dF/dt = tr(H K) along G = S H.
  auto commutator = [&](const ComplexMatrix& p, const ComplexMatrix& r) {
    const ComplexMatrix q = q_operator(r, s);
    return ComplexMatrix(p * q - q * p);
  };
  auto k_of = [&](const ComplexMatrix& comm) {
    ComplexMatrix k = hermitian_part(4.0 * kI * comm * sv.asDiagonal());
    mask(k);
    return k;
  };
  auto t_commutator = [&](const ComplexMatrix& p) {
    return commutator(p, gradient_impl(p, part, t_weights(), [](const ComplexMatrix& a) { return t_of_chain(a); }).r);
  };
  const double t0 = discrete_constraint(p0, part);
  // Newton steps along the T gradient flow back onto T = t0.
  auto restore = [&](ComplexMatrix p) -> std::optional<ComplexMatrix> {
    for (int i = 0; i < 12; ++i) {
      const double dt = discrete_constraint(p, part) - t0;
      if (std::abs(dt) <= 1e-12 * std::max(1.0, t0)) return p;
      const ComplexMatrix kt = k_of(t_commutator(p));
      const double kk = kt.squaredNorm();
      if (kk == 0.0) break;
      p = unitary_flow_step(p, sv.asDiagonal() * kt, -dt / kk, s, false);
      p = 0.5 * (p + krein_adjoint(p, s));
    }
    if (std::abs(discrete_constraint(p, part) - t0) <= 1e-10 * std::max(1.0, t0)) return p;
    return std::nullopt;
  };
  // With T held fixed the multiplier is fitted: min over lambda of ||C_S - lambda C_T||.
  auto residual = [&](const ComplexMatrix& comm, const ComplexMatrix* comm_t) {
    if (!comm_t) return comm.norm();
    const double tt = comm_t->squaredNorm();
    if (tt == 0.0) return comm.norm();
    const double lambda = (comm_t->adjoint() * comm).trace().real() / tt;
    return (comm - lambda * *comm_t).norm();
  };

  FlowResult res;
  res.p = p0;
  const double mu = cfg.preserve_constraint ? 0.0 : cfg.mu;
  double f = discrete_action_mu(res.p, part, mu);
  double step = cfg.step_init;
  for (int it = 0;; ++it) {
    const ComplexMatrix comm = commutator(res.p, gradient_kernel(res.p, part, mu).r);
    ComplexMatrix comm_t;
    if (cfg.preserve_constraint) comm_t = t_commutator(res.p);
    const double resid = residual(comm, cfg.preserve_constraint ? &comm_t : nullptr);
    if (it == 0) res.initial_residual = resid;
    res.final_residual = resid;
    const bool done = it >= cfg.max_iters || resid == 0.0 ||
                      (cfg.residual_reduction > 0.0 && resid <= cfg.residual_reduction * res.initial_residual);
    FlowRecord rec{it, discrete_action(res.p, part), discrete_constraint(res.p, part), resid, 0.0};
    if (done) {
      res.log.push_back(rec);
      break;
    }

    const ComplexMatrix k = k_of(comm);
    ComplexMatrix h = -k;
    if (cfg.preserve_constraint) {
      const ComplexMatrix kt = k_of(comm_t);
      const double kk = kt.squaredNorm();
      if (kk > 0.0) h -= ((kt * h).trace().real() / kk) * kt;
    }
    const double slope = (h * k).trace().real();
    if (!(slope < 0.0)) {
      res.stalled = true;
      res.log.push_back(rec);
      break;
    }
    const ComplexMatrix g = sv.asDiagonal() * h;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
      ComplexMatrix trial = unitary_flow_step(res.p, g, step, s, false);
      trial = 0.5 * (trial + krein_adjoint(trial, s));
      if (cfg.preserve_constraint) {
        auto back = restore(std::move(trial));
        if (!back) continue;
        trial = std::move(*back);
      }
      const double ft = discrete_action_mu(trial, part, mu);
      if (ft <= f + cfg.armijo * step * slope) {
        rec.step = step;
        res.p = std::move(trial);
        f = ft;
        accepted = true;
        break;
      }
    }
    res.log.push_back(rec);
    if (!accepted) {
      res.stalled = true;
      break;
    }
    step *= 2.0;
  }
  return res;
}

HilbertReconstruction reconstruct_hilbert(const ComplexMatrix& p, const KreinSpace& s, double tau) {
  check_square(p, s.dim(), "fermion matrix");
  const ComplexMatrix g = hermitian_part(-(sign_vector(s).asDiagonal() * p));
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(g);
  const RealVector ev = es.eigenvalues();
  const double nrm = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
  HilbertReconstruction h;
  if (nrm == 0.0) {
    h.basis = ComplexMatrix::Zero(s.dim(), 0);
    h.eigenvalues = RealVector(0);
    return h;
  }
  if (ev.minCoeff() < -tau * nrm) {
    std::ostringstream os;
    os << "-SP has eigenvalue " << ev.minCoeff() << " below -tau*||G|| = " << -tau * nrm;
    throw Error(ErrorCode::inadmissible, os.str());
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > tau * nrm) keep.push_back(i);
  h.dim = static_cast<int>(keep.size());
  h.basis = ComplexMatrix(s.dim(), h.dim);
  h.eigenvalues = RealVector(h.dim);
  for (int j = 0; j < h.dim; ++j) {
    const auto i = keep[static_cast<std::size_t>(j)];
    h.basis.col(j) = es.eigenvectors().col(i) / std::sqrt(ev(i));
    h.eigenvalues(j) = ev(i);
  }
  return h;
}

ComplexMatrix random_admissible(std::uint64_t seed, const KreinSpace& s, int f) {
  if (f < 0 || f > s.minus()) throw Error(ErrorCode::invalid_argument, "trace f must lie in [0, d_minus]");
  const int d = s.dim();
  if (f == 0) return ComplexMatrix::Zero(d, d);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (double lift = 2.0;; lift *= 2.0) {
    ComplexMatrix w(d, f);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < f; ++j)
        w(i, j) = (s.signs()[static_cast<std::size_t>(i)] < 0 ? lift : 1.0) * Complex(gauss(rng), gauss(rng));
    const ComplexMatrix m = hermitian_part(w.adjoint() * sign_vector(s).asDiagonal() * w);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(-m);
    if (es.eigenvalues().minCoeff() <= 0.0) continue;
    const ComplexMatrix inv_sqrt = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().cast<Complex>().asDiagonal() *
                                   es.eigenvectors().adjoint();
    const ComplexMatrix wn = w * inv_sqrt;
    return -(wn * wn.adjoint() * sign_vector(s).asDiagonal());
  }
}

ComplexMatrix random_generator(std::uint64_t seed, const KreinSpace& s, const SpacetimePartition* part) {
  const int d = s.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  ComplexMatrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = Complex(gauss(rng), gauss(rng));
  ComplexMatrix h = hermitian_part(a) / std::sqrt(static_cast<double>(d));
  if (part) {
    if (part->dim() != d) throw Error(ErrorCode::dimension_mismatch, "partition and Krein space differ in dimension");
    ComplexMatrix bd = ComplexMatrix::Zero(d, d);
    for (const auto& b : part->blocks()) bd.block(b.offset, b.offset, b.size, b.size) = h.block(b.offset, b.offset, b.size, b.size);
    h = bd;
  }
  return sign_vector(s).asDiagonal() * h;
}

void write_problem(std::ostream& out, const DvpProblem& problem) {
  out << "cfs-dvp 1\n";
  out << "dim " << problem.space.dim() << '\n';
  out << "signs";
  for (int v : problem.space.signs()) out << ' ' << v;
  out << "\nblocks " << problem.partition.count();
  for (const auto& b : problem.partition.blocks()) out << ' ' << b.size;
  out << "\nP\n";
  io::write_complex_matrix(out, problem.p);
  out << "end\n";
}

DvpProblem read_problem(std::istream& in) {
  io::TokenReader r(in);
  r.expect("cfs-dvp");
  if (r.integer() != 1) throw Error(ErrorCode::parse_error, "unsupported cfs-dvp container version");
  r.expect("dim");
  const long long d = r.integer();
  if (d < 0) throw Error(ErrorCode::parse_error, "negative dimension");
  r.expect("signs");
  std::vector<int> signs;
  for (long long i = 0; i < d; ++i) signs.push_back(static_cast<int>(r.integer()));
  r.expect("blocks");
  const long long count = r.integer();
  std::vector<int> sizes;
  for (long long i = 0; i < count; ++i) sizes.push_back(static_cast<int>(r.integer()));
  r.expect("P");
  DvpProblem prob;
  prob.space = KreinSpace(std::move(signs));
  prob.partition = SpacetimePartition(std::move(sizes));
  if (prob.partition.dim() != d) throw Error(ErrorCode::parse_error, "blocks do not cover the dimension");
  prob.p = io::read_complex_matrix(r, d, d);
  r.expect("end");
  return prob;
}

void write_flow_csv(std::ostream& out, const std::vector<FlowRecord>& log) {
  out << "iter,action,constraint,el_residual,step\r\n";
  for (const auto& r : log)
    out << r.iter << ',' << io::format_double(r.action) << ',' << io::format_double(r.constraint) << ','
        << io::format_double(r.el_residual) << ',' << io::format_double(r.step) << "\r\n";
}

}  // namespace cfs::dvp
