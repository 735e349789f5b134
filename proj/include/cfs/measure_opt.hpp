#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "cfs/core.hpp"

namespace cfs {

enum class GradMode { finite_difference, analytic_with_fd_check };

struct OptConfig {
  double mu = 0.5;  // 1/(2n) reproduces the causal action
  double volume_target = 1.0;
  double trace_target = 1.0;
  double penalty_weight = 1.0;
  int max_iters = 500;
  double step_init = 0.1;
  std::uint64_t seed = 0;
  GradMode grad_mode = GradMode::analytic_with_fd_check;
  // Stop once the projected gradient norm falls below this value.
  double gradient_tolerance = 1e-8;
  // Stop once the relative objective decrease stays below this for
  // stall_window consecutive accepted steps.
  double stall_tolerance = 1e-15;
  int stall_window = 25;
  bool optimize_points = true;
  // Optional Metropolis pre-pass over the points (0 disables it).
  int anneal_steps = 0;
  double anneal_temperature = 1e-2;
};

enum class OptStatus { converged, max_iters, stalled };

const char* to_string(OptStatus s);

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double volume_residual = 0.0;
  double trace_residual = 0.0;
  double grad_norm = 0.0;
};

struct OptResult {
  DiscreteMeasure measure;
  std::vector<double> objective_history;
  double volume_residual = 0.0;
  double trace_residual = 0.0;
  double grad_norm = 0.0;
  OptStatus status = OptStatus::max_iters;
  std::vector<IterationRecord> log;
  // Largest relative mismatch seen between analytic and finite-difference
  // gradients during the run (analytic mode only; checked once per run).
  double fd_check_error = 0.0;
  int pruned_atoms = 0;
};

/// sum_a sum_b w_a w_b (sum|l|^2 - mu (sum|l|)^2).
double objective_mu(const CausalFermionSystem& system, double mu);

OptResult minimize_measure(const CausalFermionSystem& system, const OptConfig& config);

// Full gradient of the penalized objective with respect to (w, nu, Re V, Im V)
// per atom, in the packing used by the optimizer. Exposed for testing.
struct MeasureGradient {
  std::vector<double> weight;
  std::vector<RealVector> spectrum;
  std::vector<ComplexMatrix> frame;  // d/dRe + i d/dIm
  int fd_fallback_pairs = 0;
};

MeasureGradient objective_gradient(const CausalFermionSystem& system, double mu, GradMode mode);

// Gradient of L_mu(x,y) with respect to the factors of x and y. Returns false
// (leaving outputs untouched) when the spectrum of xy is not simple or has
// a vanishing eigenvalue, i.e. where the analytic formula does not apply.
struct PairGradient {
  RealVector d_nu_x, d_nu_y;
  ComplexMatrix d_frame_x, d_frame_y;
};
bool lagrangian_mu_gradient(const OperatorPoint& x, const OperatorPoint& y, double mu, PairGradient& out);
PairGradient lagrangian_mu_gradient_fd(const OperatorPoint& x, const OperatorPoint& y, double mu,
                                       double h = 1e-6);

struct StationarityReport {
  double grad_norm = 0.0;
  std::vector<double> ell_support;
  std::vector<double> ell_probes;
  double ell_mean = 0.0;
  double ell_spread = 0.0;  // max - min over the support
  // ell(x_a) minus its fit against the trace multiplier: ell_a - (c0 + c1 tr x_a)
  double ell_kkt_spread = 0.0;
};

StationarityReport stationarity_report(const CausalFermionSystem& system, const OptConfig& config,
                                       const std::vector<OperatorPoint>& probes = {});

// Rescales the nonzero spectrum of each point (positive and negative parts
// separately) so that sum_a w_a tr(x_a) hits the target. Throws infeasible
// if no sign-preserving rescaling exists.
DiscreteMeasure make_trace_feasible(const DiscreteMeasure& measure, double trace_target);

// Euclidean projection of w onto {w_a >= floor, sum w_a = total}.
std::vector<double> project_simplex(const std::vector<double>& w, double total, double floor = 0.0);

// iter,objective,volume_residual,trace_residual,grad_norm
void write_iteration_csv(std::ostream& out, const std::vector<IterationRecord>& log);

}  // namespace cfs
