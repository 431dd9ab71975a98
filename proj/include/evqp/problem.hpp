#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "evqp/sparse.hpp"

namespace evqp {

/// Per-row constraint sense: A_j x <= k_j or A_j x = k_j.
enum class Sense { Ineq, Eq };

/// Optional per-variable box bounds defining the simple feasible set.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Convex QP: minimize 1/2 x'Qx + p'x subject to Ax - k <= 0 (per-row
/// sense), optionally x in a box. LP is the Q = 0 sub-case.
struct QpProblem {
  SparseMatrix Q;                // L x L, symmetric PSD
  std::vector<double> p;         // length L
  SparseMatrix A;                // M x L
  std::vector<double> k;         // length M
  std::vector<Sense> senses;     // length M
  std::optional<Box> box;

  int L() const { return static_cast<int>(p.size()); }
  int M() const { return static_cast<int>(k.size()); }
};

struct Solution {
  std::vector<double> x;
  double cost = 0.0;
  double violation = 0.0;
  std::int64_t iterations = 0;
  bool converged = false;
};

/// Result of validate(); empty `violations` means the problem is
/// well-formed. `psd_skipped` flags that the PSD check was not run
/// because the problem exceeds the dense-check size limit.
struct ValidationReport {
  std::vector<std::string> violations;
  bool psd_skipped = false;

  bool ok() const { return violations.empty(); }
};

/// Checks all QpProblem invariants; reports, never throws.
ValidationReport validate(const QpProblem& problem);

/// Objective value 1/2 x'Qx + p'x.
double evaluate_cost(const QpProblem& problem, const std::vector<double>& x);

/// Residuals: max(A_j x - k_j, 0) on inequality rows, |A_j x - k_j| on
/// equality rows. Returns (L2 norm, per-row residuals).
std::pair<double, std::vector<double>> evaluate_violation(
    const QpProblem& problem, const std::vector<double>& x);

/// Thrown by load_problem on malformed files; message names the field.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

QpProblem load_problem(const std::filesystem::path& path);
void save_problem(const QpProblem& problem, const std::filesystem::path& path);

/// JSON form used by save_problem, exposed for embedding in other files.
std::string problem_to_json(const QpProblem& problem);
QpProblem problem_from_json(const std::string& text);

}  // namespace evqp
