#include "cfs/experiments.hpp"

#include <algorithm>
#include <limits>

#include "cfs/io.hpp"
#include "cfs/measure_opt.hpp"
#include "cfs/spectral.hpp"

namespace cfs::experiments {

OperatorPoint random_operator_point(std::mt19937_64& rng, int dim, int spin_dim) {
  if (dim < 2 * spin_dim || spin_dim < 1)
    throw Error(ErrorCode::invalid_argument, "random point needs 1 <= n and 2n <= dim");
  std::normal_distribution<double> g;
  ComplexMatrix z(dim, 2 * spin_dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < 2 * spin_dim; ++j) z(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<ComplexMatrix> qr(z);
  const ComplexMatrix frame = qr.householderQ() * ComplexMatrix::Identity(dim, 2 * spin_dim);
  std::uniform_real_distribution<double> u(0.3, 2.0);
  RealVector nu(2 * spin_dim);
  for (int i = 0; i < spin_dim; ++i) nu(i) = u(rng);
  for (int i = 0; i < spin_dim; ++i) nu(spin_dim + i) = -u(rng);
  return make_operator_point(frame, nu, spin_dim);
}

CausalFermionSystem random_system(std::mt19937_64& rng, int atoms, int dim, int spin_dim, double volume_target,
                                  double trace_target) {
  if (atoms < 1) throw Error(ErrorCode::invalid_argument, "a system needs at least one atom");
  DiscreteMeasure m;
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(static_cast<std::size_t>(atoms));
  double total = 0.0;
  for (auto& x : w) total += (x = e(rng));
  for (int a = 0; a < atoms; ++a)
    m.atoms.push_back({random_operator_point(rng, dim, spin_dim), volume_target * w[static_cast<std::size_t>(a)] / total});
  return CausalFermionSystem(dim, spin_dim, make_trace_feasible(m, trace_target));
}

double multiset_distance(std::vector<Complex> a, std::vector<Complex> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  while (!a.empty()) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j)
        if (std::abs(a[i] - b[j]) < best) {
          best = std::abs(a[i] - b[j]);
          bi = i;
          bj = j;
        }
    worst = std::max(worst, best);
    a.erase(a.begin() + static_cast<long>(bi));
    b.erase(b.begin() + static_cast<long>(bj));
  }
  return worst;
}

std::vector<CoincidenceRow> eigen_coincidence(std::uint64_t seed, int pairs, const std::vector<int>& dims,
                                              const std::vector<int>& spin_dims, unsigned threads) {
  if (pairs < 0) throw Error(ErrorCode::invalid_argument, "pair count must be nonnegative");
  std::vector<std::pair<int, int>> cases;
  for (int d : dims)
    for (int n : spin_dims) {
      if (n < 1 || d < 2 * n) throw Error(ErrorCode::invalid_argument, "every dim must be at least 2 * spin_dim");
      cases.emplace_back(d, n);
    }
  const std::size_t total = cases.size() * static_cast<std::size_t>(pairs);
  std::vector<CoincidenceRow> rows(total);
  parallel_for(total, threads, [&](std::size_t i) {
    const auto [d, n] = cases[i / static_cast<std::size_t>(pairs)];
    std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(ss);
    const auto x = random_operator_point(rng, d, n);
    const auto y = random_operator_point(rng, d, n);
    auto chain = eigenvalues_dense(closed_chain(x, y)).values;
    auto full = eigenvalues_dense(ComplexMatrix(x.dense() * y.dense())).values;
    auto by_modulus = [](const Complex& a, const Complex& b) { return std::abs(a) > std::abs(b); };
    std::sort(full.begin(), full.end(), by_modulus);
    full.resize(static_cast<std::size_t>(2 * n));
    double scale = 0.0;
    for (const auto& v : full) scale = std::max(scale, std::abs(v));
    rows[i] = {static_cast<int>(i), d, n, multiset_distance(chain, full), scale};
  });
  return rows;
}

void write_coincidence_csv(std::ostream& out, const std::vector<CoincidenceRow>& rows) {
  out << "pair,dim,spin_dim,distance,scale,relative\r\n";
  for (const auto& r : rows)
    out << r.pair << ',' << r.dim << ',' << r.spin_dim << ',' << io::format_double(r.distance) << ','
        << io::format_double(r.scale) << ',' << io::format_double(r.relative()) << "\r\n";
}

}  // namespace cfs::experiments
