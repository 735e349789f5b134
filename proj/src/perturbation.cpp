#include "cfs/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "cfs/dirac_sea.hpp"
#include "cfs/io.hpp"

namespace cfs::pert {

namespace {

double spectral_norm(const ComplexMatrix& m) {
  if (m.size() == 0) return 0.0;
  const ComplexMatrix g = m.adjoint() * m;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(g, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

ComplexMatrix identity(int d) { return ComplexMatrix::Identity(d, d); }

double rel_scale(const ComplexMatrix& m) { return std::max(1.0, m.norm()); }

// Weights of the trapezoidal rule: P = sum_j w_j R~(lambda_j).
std::vector<Complex> contour_weights(const Contour& c) {
  std::vector<Complex> w(static_cast<std::size_t>(c.nodes));
  for (int j = 0; j < c.nodes; ++j) {
    const Complex e = std::exp(kI * (2.0 * kPi * j / c.nodes));
    w[static_cast<std::size_t>(j)] = c.node(j) * c.radius * e / static_cast<double>(c.nodes);
  }
  return w;
}

void check_clearance(const FiniteSeaModel& model, const Contour& c) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(model.perturbed(), Eigen::EigenvaluesOnly);
  for (int i = 0; i < model.dim(); ++i) {
    const double l = es.eigenvalues()(i);
    const double gap = std::abs(std::abs(Complex(l) - c.center) - c.radius);
    if (gap < 1e-6) {
      std::ostringstream msg;
      msg << "eigenvalue " << l << " of k+dk lies " << gap << " from the contour";
      throw Error(ErrorCode::ill_conditioned, msg.str());
    }
  }
}

ComplexMatrix sum_in_order(const std::vector<ComplexMatrix>& parts, int d) {
  ComplexMatrix out = ComplexMatrix::Zero(d, d);
  for (const auto& p : parts) out += p;
  return out;
}

}  // namespace

void FiniteSeaModel::validate() const {
  const auto d = k.rows();
  if (k.cols() != d || p.rows() != d || p.cols() != d || dk.rows() != d || dk.cols() != d)
    throw Error(ErrorCode::dimension_mismatch, "model matrices must share one square dimension");
  for (const auto* m : {&k, &p, &dk})
    if ((*m - m->adjoint()).norm() > 1e-10 * rel_scale(*m))
      throw Error(ErrorCode::not_hermitian, "model matrices must be Hermitian");
  if ((k * k - p).norm() > 1e-10 * rel_scale(p))
    throw Error(ErrorCode::invalid_argument, "k^2 = p violated");
  if ((p * p - p).norm() > 1e-10 * rel_scale(p))
    throw Error(ErrorCode::invalid_argument, "p is not a projector");
}

ComplexMatrix random_unitary(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> g;
  ComplexMatrix z(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) z(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<ComplexMatrix> qr(z);
  ComplexMatrix q = qr.householderQ();
  const ComplexMatrix r = qr.matrixQR();
  // Haar measure needs the phases of diag(R) divided out
  for (int j = 0; j < dim; ++j) {
    const double a = std::abs(r(j, j));
    if (a > 0) q.col(j) *= r(j, j) / a;
  }
  return q;
}

ComplexMatrix random_hermitian(std::mt19937_64& rng, int dim, double norm) {
  std::normal_distribution<double> g;
  ComplexMatrix z(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) z(i, j) = Complex(g(rng), g(rng));
  ComplexMatrix h = 0.5 * (z + z.adjoint());
  const double n = spectral_norm(h);
  if (norm == 0.0 || n == 0.0) return ComplexMatrix::Zero(dim, dim);
  return (norm / n) * h;
}

FiniteSeaModel random_model(std::mt19937_64& rng, int dim, double dk_norm) {
  if (dim < 1) throw Error(ErrorCode::invalid_argument, "model dimension must be positive");
  if (!(dk_norm >= 0.0)) throw Error(ErrorCode::invalid_argument, "perturbation norm must be nonnegative");
  std::uniform_int_distribution<int> sign(-1, 1);
  RealVector s(dim), a(dim);
  for (int i = 0; i < dim; ++i) {
    s(i) = i == 0 ? -1 : sign(rng);
    a(i) = std::abs(s(i));
  }
  const ComplexMatrix u = random_unitary(rng, dim);
  FiniteSeaModel m;
  m.k = u * s.cast<Complex>().asDiagonal() * u.adjoint();
  m.p = u * a.cast<Complex>().asDiagonal() * u.adjoint();
  m.k = 0.5 * (m.k + m.k.adjoint()).eval();
  m.p = 0.5 * (m.p + m.p.adjoint()).eval();
  m.dk = random_hermitian(rng, dim, dk_norm);
  return m;
}

void Contour::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw Error(ErrorCode::invalid_argument, "contour radius must be positive");
  if (nodes < 4) throw Error(ErrorCode::invalid_argument, "contour needs at least 4 nodes");
  if (!(std::abs(center - 1.0) > radius) || !(std::abs(center) > radius))
    throw Error(ErrorCode::invalid_argument, "contour must leave 0 and +1 outside");
}

Complex Contour::node(int j) const { return center + radius * std::exp(kI * (2.0 * kPi * j / nodes)); }

ComplexMatrix unperturbed_resolvent(const FiniteSeaModel& model, Complex lambda) {
  for (double pole : {-1.0, 0.0, 1.0})
    if (std::abs(lambda - pole) < 1e-14)
      throw Error(ErrorCode::invalid_argument, "resolvent evaluated at a pole");
  const ComplexMatrix plus = 0.5 * (model.p + model.k);
  const ComplexMatrix minus = 0.5 * (model.p - model.k);
  return plus / (1.0 - lambda) + minus / (-1.0 - lambda) - (identity(model.dim()) - model.p) / lambda;
}

NeumannResult neumann_resolvent(const FiniteSeaModel& model, Complex lambda, int order) {
  if (order < 0) throw Error(ErrorCode::invalid_argument, "Neumann order must be nonnegative");
  NeumannResult out;
  const ComplexMatrix r = unperturbed_resolvent(model, lambda);
  const ComplexMatrix m = r * model.dk;
  out.rate = spectral_norm(m);
  if (out.rate >= 1.0) {
    std::ostringstream msg;
    msg << "Neumann series diverges at lambda = " << lambda << ": ||R dk|| = " << out.rate;
    throw Error(ErrorCode::divergence, msg.str());
  }
  out.value = r;
  ComplexMatrix term = r;
  for (int n = 1; n <= order; ++n) {
    term = -(m * term);
    out.value += term;
  }
  out.tail_bound = std::pow(out.rate, order + 1) / (1.0 - out.rate) * spectral_norm(r);
  return out;
}

ComplexMatrix contour_sea_projector(const FiniteSeaModel& model, const Contour& contour, int order,
                                    unsigned threads) {
  contour.validate();
  check_clearance(model, contour);
  const auto w = contour_weights(contour);
  std::vector<ComplexMatrix> parts(w.size());
  parallel_for(w.size(), threads, [&](std::size_t j) {
    parts[j] = w[j] * neumann_resolvent(model, contour.node(static_cast<int>(j)), order).value;
  });
  return sum_in_order(parts, model.dim());
}

ComplexMatrix contour_sea_projector_derivative(const FiniteSeaModel& model, const Contour& contour,
                                               const ComplexMatrix& e) {
  contour.validate();
  check_clearance(model, contour);
  if (e.rows() != model.dim() || e.cols() != model.dim())
    throw Error(ErrorCode::dimension_mismatch, "direction must match the model dimension");
  const auto w = contour_weights(contour);
  const ComplexMatrix kt = model.perturbed();
  ComplexMatrix out = ComplexMatrix::Zero(model.dim(), model.dim());
  for (int j = 0; j < contour.nodes; ++j) {
    const ComplexMatrix r = (kt - contour.node(j) * identity(model.dim())).partialPivLu().inverse();
    out -= w[static_cast<std::size_t>(j)] * (r * e * r);
  }
  return out;
}

ComplexMatrix eigen_sea_projector(const FiniteSeaModel& model, const Contour& contour) {
  contour.validate();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(model.perturbed());
  ComplexMatrix out = ComplexMatrix::Zero(model.dim(), model.dim());
  for (int i = 0; i < model.dim(); ++i) {
    const double l = es.eigenvalues()(i);
    if (std::abs(Complex(l) - contour.center) < contour.radius) {
      const ComplexVector v = es.eigenvectors().col(i);
      out -= l * (v * v.adjoint());
    }
  }
  return out;
}

ComplexMatrix perturbed_dirac_operator(const FiniteSeaModel& model) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(model.perturbed());
  ComplexMatrix out = identity(model.dim());
  for (int i = 0; i < model.dim(); ++i)
    if (std::abs(es.eigenvalues()(i)) > 0.5) {
      const ComplexVector v = es.eigenvectors().col(i);
      out -= v * v.adjoint();
    }
  return out;
}

double dirac_identity_residual(const ComplexMatrix& p_sea, const ComplexMatrix& d_full) {
  if (p_sea.rows() != d_full.cols()) throw Error(ErrorCode::dimension_mismatch, "P and D dimensions differ");
  const double n = p_sea.norm();
  if (n == 0.0) return 0.0;
  return (d_full * p_sea).norm() / n;
}

double idempotency_defect(const ComplexMatrix& p_sea) { return (p_sea * p_sea - p_sea).norm(); }

std::vector<ConvergenceRow> contour_convergence(const FiniteSeaModel& model, const Contour& contour,
                                                int max_order) {
  contour.validate();
  check_clearance(model, contour);
  const ComplexMatrix exact = eigen_sea_projector(model, contour);
  const auto w = contour_weights(contour);
  const double root_d = std::sqrt(static_cast<double>(model.dim()));
  std::vector<ConvergenceRow> rows;
  for (int order = 0; order <= max_order; ++order) {
    ComplexMatrix p = ComplexMatrix::Zero(model.dim(), model.dim());
    double bound = 0.0;
    for (int j = 0; j < contour.nodes; ++j) {
      const auto nr = neumann_resolvent(model, contour.node(j), order);
      p += w[static_cast<std::size_t>(j)] * nr.value;
      bound += std::abs(w[static_cast<std::size_t>(j)]) * root_d * nr.tail_bound;
    }
    rows.push_back({order, (p - exact).norm(), bound});
  }
  return rows;
}

void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows) {
  out << "order,defect,bound\r\n";
  for (const auto& r : rows)
    out << r.order << ',' << io::format_double(r.defect) << ',' << io::format_double(r.bound) << "\r\n";
}

void write_model(std::ostream& out, const FiniteSeaModel& model) {
  out << "cfs-sea-model 1\n";
  out << "dim " << model.dim() << '\n';
  out << "k\n";
  io::write_complex_matrix(out, model.k);
  out << "p\n";
  io::write_complex_matrix(out, model.p);
  out << "dk\n";
  io::write_complex_matrix(out, model.dk);
  out << "end\n";
}

FiniteSeaModel read_model(std::istream& in) {
  io::TokenReader r(in);
  r.expect("cfs-sea-model");
  if (r.integer() != 1) throw Error(ErrorCode::parse_error, "unsupported cfs-sea-model container version");
  r.expect("dim");
  const long long d = r.integer();
  if (d < 1) throw Error(ErrorCode::parse_error, "model dimension must be positive");
  FiniteSeaModel m;
  r.expect("k");
  m.k = io::read_complex_matrix(r, d, d);
  r.expect("p");
  m.p = io::read_complex_matrix(r, d, d);
  r.expect("dk");
  m.dk = io::read_complex_matrix(r, d, d);
  r.expect("end");
  return m;
}

void LatticeDiracModel::validate() const {
  if (k0.empty() || k1.empty()) throw Error(ErrorCode::invalid_argument, "lattice grids must be non-empty");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw Error(ErrorCode::invalid_argument, "nu must be positive");
  if (!(mass >= 0.0) || !std::isfinite(mass)) throw Error(ErrorCode::invalid_argument, "mass must be nonnegative");
  for (double v : k0)
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "non-finite frequency");
  for (double v : k1)
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "non-finite momentum");
}

std::vector<double> symmetric_grid(int n, double h) {
  if (n < 1 || !(h > 0.0)) throw Error(ErrorCode::invalid_argument, "grid needs n >= 1 and h > 0");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = (i - 0.5 * (n - 1)) * h;
  return g;
}

ComplexMatrix lattice_metric(const LatticeDiracModel& model) {
  model.validate();
  const auto& g0 = sea::gamma_basis().gamma[0];
  ComplexMatrix s = ComplexMatrix::Zero(model.dim(), model.dim());
  for (int i = 0; i < model.blocks(); ++i) s.block(4 * i, 4 * i, 4, 4) = g0;
  return s;
}

ComplexMatrix lattice_dirac(const LatticeDiracModel& model, int sign) {
  model.validate();
  if (sign != 1 && sign != -1) throw Error(ErrorCode::invalid_argument, "sign must be +1 or -1");
  const auto& gb = sea::gamma_basis();
  const auto n1 = model.k1.size();
  ComplexMatrix d = ComplexMatrix::Zero(model.dim(), model.dim());
  for (int i = 0; i < model.blocks(); ++i) {
    const double f = model.k0[static_cast<std::size_t>(i) / n1];
    const double q = model.k1[static_cast<std::size_t>(i) % n1];
    d.block(4 * i, 4 * i, 4, 4) = gb.slash({f, q, 0.0, 0.0}) + (sign * model.nu) * kI * gb.gamma[0] -
                                  model.mass * sea::Matrix4::Identity();
  }
  return d;
}

GreensPair lattice_greens(const LatticeDiracModel& model) {
  GreensPair g;
  g.metric = lattice_metric(model);
  const ComplexMatrix adv = lattice_dirac(model, -1);
  const ComplexMatrix ret = lattice_dirac(model, +1);
  g.s_adv = ComplexMatrix::Zero(model.dim(), model.dim());
  g.s_ret = ComplexMatrix::Zero(model.dim(), model.dim());
  for (int i = 0; i < model.blocks(); ++i) {
    const sea::Matrix4 a = adv.block(4 * i, 4 * i, 4, 4);
    const sea::Matrix4 r = ret.block(4 * i, 4 * i, 4, 4);
    const Eigen::FullPivLU<sea::Matrix4> la(a), lr(r);
    if (!la.isInvertible() || !lr.isInvertible())
      throw Error(ErrorCode::ill_conditioned, "lattice Dirac operator is singular on a block");
    g.s_adv.block(4 * i, 4 * i, 4, 4) = la.inverse();
    g.s_ret.block(4 * i, 4 * i, 4, 4) = lr.inverse();
  }
  return g;
}

ComplexMatrix causal_fundamental(const GreensPair& g) {
  if (g.s_adv.rows() != g.s_ret.rows() || g.s_adv.cols() != g.s_ret.cols())
    throw Error(ErrorCode::dimension_mismatch, "Green's functions differ in shape");
  return (g.s_adv - g.s_ret) / (2.0 * kPi * kI);
}

ComplexMatrix causal_split_p(const LatticeDiracModel& model, const ComplexMatrix& k) {
  model.validate();
  if (k.rows() != model.dim() || k.cols() != model.dim())
    throw Error(ErrorCode::dimension_mismatch, "k does not match the lattice dimension");
  const auto n1 = model.k1.size();
  ComplexMatrix p = k;
  for (int i = 0; i < model.blocks(); ++i) {
    const double f = model.k0[static_cast<std::size_t>(i) / n1];
    const double eps = f > 0 ? 1.0 : (f < 0 ? -1.0 : 0.0);
    p.middleRows(4 * i, 4) *= eps;
  }
  return p;
}

GreensSeries greens_series(const GreensPair& g, const ComplexMatrix& b, int order, const ComplexMatrix& x) {
  if (order < 0) throw Error(ErrorCode::invalid_argument, "series order must be nonnegative");
  const auto d = g.s_adv.rows();
  if (g.s_adv.cols() != d || g.s_ret.rows() != d || g.s_ret.cols() != d || b.rows() != d || b.cols() != d)
    throw Error(ErrorCode::dimension_mismatch, "Green's functions and B must share one square dimension");

  if (x.size() != 0) {
    if (x.rows() != d || x.cols() != d) throw Error(ErrorCode::dimension_mismatch, "X must match B");
    const ComplexMatrix xstar = g.metric.size() != 0 ? ComplexMatrix(g.metric * x.adjoint() * g.metric)
                                                     : ComplexMatrix(x.adjoint());
    for (const auto* s : {&g.s_adv, &g.s_ret}) {
      const ComplexMatrix m = s->partialPivLu().inverse() + b;
      const double defect = (xstar * m - m * x).norm();
      if (defect > 1e-10 * std::max(1.0, m.norm() * x.norm())) {
        std::ostringstream msg;
        msg << "X violates the causality compatibility condition: ||X^*(D+B) - (D+B)X|| = " << defect;
        throw Error(ErrorCode::inadmissible, msg.str());
      }
    }
  }

  GreensSeries out;
  auto run = [&](const ComplexMatrix& s, std::vector<ComplexMatrix>& partial, double& rate) {
    const ComplexMatrix sb = s * b;
    rate = spectral_norm(sb);
    partial.reserve(static_cast<std::size_t>(order) + 1);
    partial.push_back(s);
    ComplexMatrix term = s;
    for (int n = 1; n <= order; ++n) {
      term = -(sb * term);
      partial.push_back(partial.back() + term);
    }
  };
  run(g.s_adv, out.adv_partial, out.rate_adv);
  run(g.s_ret, out.ret_partial, out.rate_ret);
  return out;
}

double greens_defect(const ComplexMatrix& s, const ComplexMatrix& b, const ComplexMatrix& s_tilde) {
  const auto d = s.rows();
  return ((s.partialPivLu().inverse() + b) * s_tilde - ComplexMatrix::Identity(d, d)).norm();
}

}  // namespace cfs::pert
