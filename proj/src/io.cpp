#include "cfs/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cfs::io {

namespace {

[[noreturn]] void parse_fail(const std::string& msg) { throw Error(ErrorCode::parse_error, msg); }

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string TokenReader::word() {
  std::string w;
  while (in_ >> w) {
    if (!w.empty() && w[0] == '#') {
      std::string rest;
      std::getline(in_, rest);
      continue;
    }
    return w;
  }
  parse_fail("unexpected end of container");
}

void TokenReader::expect(const std::string& keyword) {
  const std::string w = word();
  if (w != keyword) parse_fail("expected '" + keyword + "', found '" + w + "'");
}

long long TokenReader::integer() {
  const std::string w = word();
  long long v = 0;
  auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
  if (ec != std::errc{} || ptr != w.data() + w.size()) parse_fail("expected an integer, found '" + w + "'");
  return v;
}

double TokenReader::real() {
  const std::string w = word();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
  if (ec != std::errc{} || ptr != w.data() + w.size()) parse_fail("expected a real number, found '" + w + "'");
  return v;
}

Complex TokenReader::complex_pair() {
  const double re = real();
  const double im = real();
  return {re, im};
}

void write_complex_matrix(std::ostream& out, const ComplexMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(m(i, j).real()) << ' ' << format_double(m(i, j).imag());
    }
    out << '\n';
  }
}

ComplexMatrix read_complex_matrix(TokenReader& in, Eigen::Index rows, Eigen::Index cols) {
  ComplexMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = in.complex_pair();
  return m;
}

void write_system(std::ostream& out, const CausalFermionSystem& system) {
  out << "cfs-system 1\n";
  out << "dim " << system.dim() << '\n';
  out << "spin_dim " << system.spin_dimension() << '\n';
  out << "atoms " << system.size() << '\n';
  for (std::size_t a = 0; a < system.size(); ++a) {
    const auto& atom = system.atoms()[a];
    out << "atom " << a << " weight " << format_double(atom.weight) << " rank "
        << atom.point.rank() << '\n';
    out << "spectrum";
    for (Eigen::Index i = 0; i < atom.point.rank(); ++i)
      out << ' ' << format_double(atom.point.spectrum()(i));
    out << "\nframe\n";
    write_complex_matrix(out, atom.point.frame());
  }
  out << "end\n";
}

CausalFermionSystem read_system(std::istream& in) {
  TokenReader r(in);
  r.expect("cfs-system");
  const long long version = r.integer();
  if (version != 1) parse_fail("unsupported cfs-system container version " + std::to_string(version));
  r.expect("dim");
  const auto dim = static_cast<int>(r.integer());
  r.expect("spin_dim");
  const auto spin_dim = static_cast<int>(r.integer());
  r.expect("atoms");
  const long long count = r.integer();
  if (dim < 1 || spin_dim < 1 || count < 0) parse_fail("invalid cfs-system header");
  DiscreteMeasure measure;
  for (long long a = 0; a < count; ++a) {
    r.expect("atom");
    if (r.integer() != a) parse_fail("atoms out of order");
    r.expect("weight");
    const double w = r.real();
    r.expect("rank");
    const long long rank = r.integer();
    if (rank < 0 || rank > 2 * spin_dim) parse_fail("atom rank out of range");
    r.expect("spectrum");
    RealVector nu(rank);
    for (long long i = 0; i < rank; ++i) nu(i) = r.real();
    r.expect("frame");
    ComplexMatrix v = read_complex_matrix(r, dim, rank);
    measure.atoms.push_back({OperatorPoint::from_orthonormal(std::move(v), std::move(nu), spin_dim), w});
  }
  r.expect("end");
  return CausalFermionSystem(dim, spin_dim, std::move(measure));
}

void save_system(const std::string& path, const CausalFermionSystem& system) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::invalid_argument, "cannot write " + path);
  write_system(out, system);
}

CausalFermionSystem load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::invalid_argument, "cannot read " + path);
  return read_system(in);
}

}  // namespace cfs::io
