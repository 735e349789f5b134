#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cfs {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

// Error categories surfaced by the library. Callers that need to branch on
// the failure kind inspect code(); everything else just reads what().
enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  not_square,
  not_hermitian,
  no_convergence,
  signature_violation,
  infeasible,
  divergence,
  ill_conditioned,
  inadmissible,
  parse_error,
  schema_error,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Sums values with a fixed binary tree so the result only depends on the
// order of the input, never on how the terms were produced.
double pairwise_sum(std::span<const double> values);

// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
// handled exactly once; callers write into per-index slots.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

// Global default worker count used by the pairwise evaluators (1 = serial).
unsigned default_threads();
void set_default_threads(unsigned threads);

}  // namespace cfs
