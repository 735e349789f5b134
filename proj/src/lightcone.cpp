#include "cfs/lightcone.hpp"

#include <algorithm>
#include <boost/math/special_functions/legendre.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>

#include "cfs/io.hpp"

namespace cfs::lc {

namespace {

constexpr int kMaxDysonOrder = 12;
constexpr std::array<double, 4> kEta{1.0, -1.0, -1.0, -1.0};

// Gauss-Legendre rule on [-1, 1] with the spectral integration matrix
// S(i, j) = int_{-1}^{x_i} l_j, l_j the Lagrange polynomial of node j.
struct SpectralRule {
  std::vector<double> x;
  std::vector<double> w;
  Eigen::MatrixXd s;
};

SpectralRule make_spectral_rule(int n) {
  SpectralRule rule;
  const auto zeros = boost::math::legendre_p_zeros<double>(n);
  for (double z : zeros) {
    rule.x.push_back(z);
    if (z != 0.0) rule.x.push_back(-z);
  }
  std::sort(rule.x.begin(), rule.x.end());
  for (double z : rule.x) {
    const double dp = boost::math::legendre_p_prime(n, z);
    rule.w.push_back(2.0 / ((1.0 - z * z) * dp * dp));
  }
  // l_j(t) = w_j sum_{k<n} (2k+1)/2 P_k(x_j) P_k(t), and
  // int_{-1}^x P_k = (P_{k+1}(x) - P_{k-1}(x)) / (2k+1) for k >= 1.
  rule.s.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double xi = rule.x[static_cast<std::size_t>(i)], xj = rule.x[static_cast<std::size_t>(j)];
      double acc = 0.5 * (xi + 1.0);
      for (int k = 1; k < n; ++k)
        acc += 0.5 * boost::math::legendre_p(k, xj) *
               (boost::math::legendre_p(k + 1, xi) - boost::math::legendre_p(k - 1, xi));
      rule.s(i, j) = rule.w[static_cast<std::size_t>(j)] * acc;
    }
  return rule;
}

const SpectralRule& spectral_rule(int n) {
  static std::mutex mu;
  static std::map<int, SpectralRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_spectral_rule(n)).first;
  return it->second;
}

ComplexMatrix eval_checked(const MatrixPath& path, double t) {
  ComplexMatrix f = path.eval(t);
  if (f.rows() != path.dim || f.cols() != path.dim)
    throw Error(ErrorCode::dimension_mismatch, "path evaluator returned a matrix of the wrong shape");
  return f;
}

// Dyson series on one segment by repeated spectral integration:
// I_k(t) = int_s0^t I_{k-1}(s) F(s) ds.
ComplexMatrix dyson_segment(const MatrixPath& path, double s0, double s1, int order, const SpectralRule& rule) {
  const auto n = rule.x.size();
  const double half = 0.5 * (s1 - s0);
  std::vector<ComplexMatrix> f(n);
  for (std::size_t j = 0; j < n; ++j) f[j] = eval_checked(path, s0 + half * (rule.x[j] + 1.0));
  const int d = path.dim;
  ComplexMatrix result = ComplexMatrix::Identity(d, d);
  std::vector<ComplexMatrix> prev(n, ComplexMatrix::Identity(d, d)), integrand(n), next(n);
  for (int k = 1; k <= order; ++k) {
    for (std::size_t j = 0; j < n; ++j) integrand[j] = prev[j] * f[j];
    ComplexMatrix end = ComplexMatrix::Zero(d, d);
    for (std::size_t j = 0; j < n; ++j) end += (half * rule.w[j]) * integrand[j];
    result += end;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = ComplexMatrix::Zero(d, d);
      for (std::size_t j = 0; j < n; ++j)
        next[i] += (half * rule.s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) * integrand[j];
    }
    std::swap(prev, next);
  }
  return result;
}

ComplexMatrix ode_solve(const MatrixPath& path, double a, double b, double tol) {
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;
  const int d = path.dim;
  const auto dd = static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
  State u(2 * dd, 0.0);
  for (int i = 0; i < d; ++i) u[2 * (static_cast<std::size_t>(i) * d + i)] = 1.0;
  auto unpack = [&](const State& s) {
    ComplexMatrix m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const auto k = 2 * (static_cast<std::size_t>(i) * d + j);
        m(i, j) = Complex(s[k], s[k + 1]);
      }
    return m;
  };
  auto rhs = [&](const State& s, State& ds, double t) {
    const ComplexMatrix du = unpack(s) * eval_checked(path, t);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const auto k = 2 * (static_cast<std::size_t>(i) * d + j);
        ds[k] = du(i, j).real();
        ds[k + 1] = du(i, j).imag();
      }
  };
  auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State>());
  odeint::integrate_adaptive(stepper, rhs, u, a, b, 1e-3 * (b - a));
  return unpack(u);
}

}  // namespace

GaussRule gauss_legendre(int n) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "Gauss rule needs at least one node");
  const auto& r = spectral_rule(n);
  GaussRule g;
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    g.nodes.push_back(0.5 * (r.x[i] + 1.0));
    g.weights.push_back(0.5 * r.w[i]);
  }
  return g;
}

double path_magnitude(const MatrixPath& path, double a, double b, int nodes) {
  const auto g = gauss_legendre(nodes);
  double m = 0.0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const ComplexMatrix f = eval_checked(path, a + (b - a) * g.nodes[i]);
    const ComplexMatrix ff = f.adjoint() * f;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(ff, Eigen::EigenvaluesOnly);
    m += g.weights[i] * std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }
  return (b - a) * m;
}

ComplexMatrix ordered_exp(const MatrixPath& path, double a, double b, const PexpOptions& opts) {
  if (path.dim < 1 || !path.eval) throw Error(ErrorCode::invalid_argument, "path needs a dimension and an evaluator");
  if (!(a <= b)) throw Error(ErrorCode::invalid_argument, "ordered_exp requires a <= b");
  if (opts.order < 0 || opts.order > kMaxDysonOrder)
    throw Error(ErrorCode::invalid_argument, "Dyson order must lie in [0, 12]");
  if (opts.nodes < 4) throw Error(ErrorCode::invalid_argument, "at least 4 quadrature nodes per segment");
  if (opts.segments < 0) throw Error(ErrorCode::invalid_argument, "negative segment count");
  if (!(opts.tolerance > 0.0)) throw Error(ErrorCode::invalid_argument, "ODE tolerance must be positive");
  if (a == b) return ComplexMatrix::Identity(path.dim, path.dim);
  if (opts.method == PexpMethod::ode) return ode_solve(path, a, b, opts.tolerance);

  int segments = opts.segments;
  if (segments == 0) segments = std::max(1, static_cast<int>(std::ceil(path_magnitude(path, a, b) / 0.25)));
  const auto& rule = spectral_rule(opts.nodes);
  ComplexMatrix u = ComplexMatrix::Identity(path.dim, path.dim);
  const double h = (b - a) / segments;
  for (int s = 0; s < segments; ++s) {
    const double s0 = a + s * h;
    const double s1 = s + 1 == segments ? b : a + (s + 1) * h;
    u = u * dyson_segment(path, s0, s1, opts.order, rule);
  }
  return u;
}

void LineIntegralSpec::validate() const {
  if (l < 0 || r < 0 || n < 0) throw Error(ErrorCode::invalid_argument, "l, r, n must be nonnegative");
  if (nodes < 4) throw Error(ErrorCode::invalid_argument, "line integrals need at least 4 nodes");
}

namespace {

template <class T, class F>
T weighted_line_sum(const F& f, const Point& x, const Point& y, const LineIntegralSpec& spec, T zero) {
  spec.validate();
  const auto g = gauss_legendre(spec.nodes);
  T acc = zero;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const double al = g.nodes[i];
    const double weight = std::pow(al, spec.l) * std::pow(1.0 - al, spec.r) * std::pow(al - al * al, spec.n);
    Point z;
    for (int j = 0; j < 4; ++j) z[j] = al * y[j] + (1.0 - al) * x[j];
    acc += (g.weights[i] * weight) * f(z);
  }
  return acc;
}

}  // namespace

Complex line_integral(const std::function<Complex(const Point&)>& f, const Point& x, const Point& y,
                      const LineIntegralSpec& spec) {
  return weighted_line_sum<Complex>(f, x, y, spec, Complex(0.0));
}

ComplexMatrix line_integral(const std::function<ComplexMatrix(const Point&)>& f, const Point& x, const Point& y,
                            const LineIntegralSpec& spec) {
  const ComplexMatrix first = f(x);
  return weighted_line_sum<ComplexMatrix>(f, x, y, spec, ComplexMatrix::Zero(first.rows(), first.cols()));
}

const sea::Matrix4& chiral_projector(Chirality c) {
  const auto& g = sea::gamma_basis();
  return c == Chirality::left ? g.chi_left : g.chi_right;
}

ComplexMatrix gauge_phase(const ChiralPotential& field, Chirality c, const Point& x, const Point& y,
                          const PexpOptions& opts) {
  std::array<double, 4> xi;
  for (int j = 0; j < 4; ++j) xi[j] = kEta[j] * (y[j] - x[j]);
  auto generator = [&, c](double al) {
    Point z;
    for (int j = 0; j < 4; ++j) z[j] = al * y[j] + (1.0 - al) * x[j];
    const auto a = field(z, c);
    ComplexMatrix g = xi[0] * a[0];
    for (int j = 1; j < 4; ++j) g += xi[j] * a[j];
    return ComplexMatrix(-kI * g);
  };
  const auto dim = static_cast<int>(field(x, c)[0].rows());
  return ordered_exp(MatrixPath{dim, generator}, 0.0, 1.0, opts);
}

MatrixPath random_smooth_path(std::mt19937_64& rng, int dim, double scale, int harmonics) {
  if (dim < 1 || harmonics < 0 || !(scale >= 0.0))
    throw Error(ErrorCode::invalid_argument, "random path needs dim >= 1, harmonics >= 0, scale >= 0");
  std::normal_distribution<double> g;
  std::vector<ComplexMatrix> cs, ss;
  double total = 0.0;
  auto draw = [&]() {
    ComplexMatrix m(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) m(i, j) = Complex(g(rng), g(rng));
    total += m.operatorNorm();
    return m;
  };
  for (int h = 0; h <= harmonics; ++h) {
    cs.push_back(draw());
    ss.push_back(h == 0 ? ComplexMatrix::Zero(dim, dim) : draw());
  }
  const double f = total > 0 ? scale / total : 0.0;
  for (auto& m : cs) m *= f;
  for (auto& m : ss) m *= f;
  return {dim, [cs, ss](double t) {
            ComplexMatrix out = cs[0];
            for (std::size_t h = 1; h < cs.size(); ++h)
              out += std::cos(h * t) * cs[h] + std::sin(h * t) * ss[h];
            return out;
          }};
}

std::vector<PexpConvergenceRow> pexp_convergence(const MatrixPath& path, double a, double b, int max_order) {
  if (max_order < 0 || max_order > kMaxDysonOrder)
    throw Error(ErrorCode::invalid_argument, "Dyson order must lie in [0, 12]");
  PexpOptions ode;
  ode.method = PexpMethod::ode;
  ode.tolerance = 1e-13;
  const ComplexMatrix reference = ordered_exp(path, a, b, ode);
  const double m = path_magnitude(path, a, b);
  const double root_d = std::sqrt(static_cast<double>(path.dim));
  std::vector<PexpConvergenceRow> rows;
  double power = m, factorial = 1.0;
  for (int k = 0; k <= max_order; ++k) {
    PexpOptions o;
    o.order = k;
    o.segments = 1;
    factorial *= (k + 1);
    rows.push_back({k, (ordered_exp(path, a, b, o) - reference).norm(), root_d * std::exp(m) * power / factorial});
    power *= m;
  }
  return rows;
}

void write_pexp_csv(std::ostream& out, const std::vector<PexpConvergenceRow>& rows) {
  out << "order,error,bound\r\n";
  for (const auto& r : rows)
    out << r.order << ',' << io::format_double(r.error) << ',' << io::format_double(r.bound) << "\r\n";
}

}  // namespace cfs::lc
