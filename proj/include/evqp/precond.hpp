#pragma once

#include <vector>

#include "evqp/problem.hpp"

namespace evqp {

/// Diagonal scaling produced by Ruiz equilibration.
/// Scaled problem: Q' = c * D Q D, p' = c * D p, A' = E A D, k' = E k,
/// with D = diag(d), E = diag(e). Minimizers map back as x = D x'.
struct Scaling {
  std::vector<double> d;  // length L, strictly positive
  std::vector<double> e;  // length M, strictly positive
  double c = 1.0;         // cost scalar, strictly positive
};

struct RuizResult {
  QpProblem problem;  // scaled problem
  Scaling scaling;
  int iterations = 0;   // scaling passes applied
  bool converged = false;  // norm criterion met before max_iters
};

/// Ruiz equilibration of the stacked [[Q, A'],[A, 0]] pattern. Each pass
/// divides row/column i by the square root of its infinity norm (factor 1
/// for all-zero indices), then normalizes the cost by the scalar c. Stops
/// when every nonzero row/col norm is within tol of 1.
RuizResult ruiz_equilibrate(const QpProblem& problem, int max_iters = 10,
                            double tol = 0.1);

/// Maps a scaled-frame solution back to the original frame: D * x_scaled.
std::vector<double> unscale_solution(const std::vector<double>& x_scaled,
                                     const Scaling& scaling);

/// Row/col infinity norms of the stacked matrix of `problem` (length L+M);
/// exposed so tests and metadata can check the equilibration contract.
std::vector<double> stacked_norms(const QpProblem& problem);

}  // namespace evqp
