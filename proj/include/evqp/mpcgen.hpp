#pragma once

#include <cstdint>
#include <vector>

#include "evqp/problem.hpp"

namespace evqp {

/// Small dense row-major block used by the stage model.
struct DenseBlock {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  DenseBlock() = default;
  DenseBlock(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

/// Per-stage cost and dynamics data for a horizon-N MPC problem.
/// Stage cost blocks assemble as [[S, K'],[K, T]] (symmetric PSD by
/// construction); dynamics are x_{j+1} = E_j x_j + F_j u_j + c_j.
struct StageModel {
  int n_states = 24;
  int n_controls = 24;
  int N = 1;
  std::vector<DenseBlock> S;             // N blocks, ns x ns
  std::vector<DenseBlock> K;             // N blocks, nc x ns
  std::vector<DenseBlock> T;             // N blocks, nc x nc
  std::vector<std::vector<double>> q_x;  // N stage linear cost terms, ns
  std::vector<std::vector<double>> q_u;  // N stage linear cost terms, nc
  std::vector<DenseBlock> E;             // N blocks, ns x ns
  std::vector<DenseBlock> F;             // N blocks, ns x nc
  std::vector<std::vector<double>> c;    // N dynamics affine terms, ns
  DenseBlock P;                          // terminal cost block, ns x ns
  std::vector<double> q_term;            // ns
  std::vector<double> x_init;            // ns
};

struct GeneratorSpec {
  int n_states = 24;
  int n_controls = 24;
  int horizon = 5;
  std::uint64_t seed = 0;
  double eps = 1e-3;    // PSD regularization of cost blocks
  double delta = 0.05;  // dynamics perturbation scale
};

/// Resource formulas for the (n_states, n_controls, N) problem family.
struct ResourceCount {
  std::int64_t n_neurons_decision = 0;
  std::int64_t n_neurons_total = 0;
  std::int64_t n_synapses = 0;
};

/// Tiles the stage model into the block-sparse QP over the interleaved
/// decision vector z = (x_0, u_0, ..., x_{N-1}, u_{N-1}, x_N); all
/// constraint rows are equalities (x_0 = x_init, then one row per
/// dynamics equation).
QpProblem tile(const StageModel& model);

ResourceCount count_resources(int n_states, int n_controls, int N);

/// Deterministic synthetic stage model: cost blocks B B' + eps I,
/// dynamics E = I + delta R, tracking linear terms.
StageModel generate_random(const GeneratorSpec& spec);

/// Seeded relative perturbation of the nonzero entries of the cost and
/// dynamics blocks; cost blocks are re-symmetrized and eigenvalue-clipped
/// back to PSD. Magnitude 0 returns the model unchanged.
StageModel perturb(const StageModel& model, double magnitude,
                   std::uint64_t seed);

/// A feasible point built by rolling the dynamics forward from x_init
/// with zero controls (used by feasibility checks and tests).
std::vector<double> feasible_point(const StageModel& model);

}  // namespace evqp
