#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "evqp/problem.hpp"

namespace evqp {

/// Shared step-size schedule: alpha halves every alpha_decay_period
/// iterations and beta doubles every beta_growth_period iterations
/// (period 0 disables the corresponding update). Beta stops doubling
/// after kBetaMaxDoublings.
inline constexpr int kBetaMaxDoublings = 10;

struct HyperParams {
  double alpha0 = 1.0;
  double beta0 = 1.0;
  int alpha_decay_period = 100;
  int beta_growth_period = 100;
  std::int64_t max_iters = 5000;
  double conv_tol = 1e-6;
};

struct SolverState {
  std::vector<double> x;
  std::vector<double> v;
  std::vector<double> w;
  double alpha = 0.0;
  double beta = 0.0;
  std::int64_t iter = 0;
};

struct TraceRecord {
  std::int64_t iter = 0;
  double cost = 0.0;
  double violation = 0.0;
};

/// Per-iteration solver trace. records[0] is the initial state; one
/// record follows per executed iteration. final_state carries the
/// terminal primal/dual variables (v and w are empty for the solvers
/// that do not keep duals).
struct ConvergenceTrace {
  std::vector<TraceRecord> records;
  int snapshot_stride = 0;  // 0 = no snapshots kept
  std::vector<std::vector<double>> snapshots;
  SolverState final_state;
};

/// Raised when an iterate stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::int64_t iteration, const std::string& solver)
      : std::runtime_error(solver + ": diverged (non-finite state) at iteration " +
                           std::to_string(iteration) +
                           "; the step size is likely too large"),
        iteration(iteration) {}

  std::int64_t iteration;
};

/// max(r_j, 0) on inequality rows; passthrough on equality rows.
std::vector<double> relu_gate(const std::vector<double>& r,
                              const std::vector<Sense>& senses);

/// Unconstrained gradient descent x <- (I - alpha Q) x - alpha p.
/// Constraints, if any, are ignored. snapshot_stride > 0 stores an x
/// snapshot every that-many iterations in the trace.
std::pair<Solution, ConvergenceTrace> solve_gd(const QpProblem& problem,
                                               const HyperParams& hp,
                                               int snapshot_stride = 0);

/// Gradient descent with constraint correction:
/// x <- (I - alpha Q) x - alpha p - beta A' relu_gate(Ax - k).
std::pair<Solution, ConvergenceTrace> solve_gdcc(const QpProblem& problem,
                                                 const HyperParams& hp,
                                                 int snapshot_stride = 0);

/// Primal-dual dynamics with dual accumulator, in the network's
/// intra-iteration order: w += beta (Ax - k); v = relu_gate(w);
/// x <- project(x - alpha (Qx + p + A'v)).
std::pair<Solution, ConvergenceTrace> solve_pipg(const QpProblem& problem,
                                                 const HyperParams& hp,
                                                 int snapshot_stride = 0);

/// Power-iteration estimates of lambda_max(Q) and sigma_max(A) with the
/// derived step sizes; deterministic for a fixed seed.
HyperParams estimate_hyperparams(const QpProblem& problem,
                                 std::uint64_t seed = 1234);

/// The raw spectral estimates behind estimate_hyperparams, exposed for
/// metadata and condition reporting.
struct SpectralEstimates {
  double lambda_max = 0.0;
  double sigma_max = 0.0;
};
SpectralEstimates estimate_spectral(const QpProblem& problem,
                                    std::uint64_t seed = 1234);

}  // namespace evqp
