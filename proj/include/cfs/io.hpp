#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "cfs/common.hpp"
#include "cfs/core.hpp"

namespace cfs::io {

// %.17g; enough digits for an exact binary64 round trip.
std::string format_double(double v);

// Whitespace-separated token reader for the plain-text containers. Lines
// starting with '#' are comments.
class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word();
  void expect(const std::string& keyword);
  long long integer();
  double real();
  Complex complex_pair();

 private:
  std::istream& in_;
};

void write_complex_matrix(std::ostream& out, const ComplexMatrix& m);
ComplexMatrix read_complex_matrix(TokenReader& in, Eigen::Index rows, Eigen::Index cols);

/// Plain-text causal fermion system container, version 1:
///
///   cfs-system 1
///   dim <N>
///   spin_dim <n>
///   atoms <K>
///   atom <index> weight <w> rank <r>
///   spectrum <nu_1> ... <nu_r>
///   frame            (N rows of r "re im" pairs, row-major)
///   ...
///   end
void write_system(std::ostream& out, const CausalFermionSystem& system);
CausalFermionSystem read_system(std::istream& in);

void save_system(const std::string& path, const CausalFermionSystem& system);
CausalFermionSystem load_system(const std::string& path);

}  // namespace cfs::io
