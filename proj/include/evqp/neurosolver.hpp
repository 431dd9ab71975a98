#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "evqp/fxp.hpp"
#include "evqp/precond.hpp"
#include "evqp/problem.hpp"
#include "evqp/reference.hpp"

namespace evqp {

struct NetworkConfig {
  FxpFormat state_fmt{24, 6};
  int weight_bits = 8;
  int alpha_period = 100;  // 0 disables alpha halving
  int beta_period = 100;   // 0 disables beta doubling
  std::int64_t max_iters = 1000;
  int neurons_per_core = 8192;
  std::int64_t event_threshold = 0;  // raw units; emit when |value| > threshold
};

/// Message/operation accounting for a run. mac_ops counts executed
/// multiply-accumulates (receiver side); fanout_mac_ops counts the sum
/// of fan-out nnz over emitted messages (sender side). The two must
/// balance exactly.
struct IterationStats {
  std::int64_t messages_sent = 0;
  std::int64_t mac_ops = 0;
  std::int64_t fanout_mac_ops = 0;
  std::int64_t neuron_updates = 0;
  std::int64_t saturations = 0;
};

struct EventStats {
  std::int64_t messages_sent = 0;
  std::int64_t mac_ops = 0;
  std::int64_t fanout_mac_ops = 0;
  std::int64_t neuron_updates = 0;
  std::int64_t saturations = 0;
  std::vector<IterationStats> per_iteration;

  void add(const IterationStats& s) {
    messages_sent += s.messages_sent;
    mac_ops += s.mac_ops;
    fanout_mac_ops += s.fanout_mac_ops;
    neuron_updates += s.neuron_updates;
    saturations += s.saturations;
    per_iteration.push_back(s);
  }
};

/// Analytic multi-core partition cost model: greedy index-order
/// assignment; per-core work = neuron updates + structural synapse MACs
/// by post-synaptic neuron; cost = max core work + sync overhead.
struct PartitionReport {
  int n_cores = 0;
  std::vector<int> core_neurons;
  double per_iteration_cost = 0.0;
  double sync_overhead = 0.0;
  std::int64_t iterations = 1;
  double total_cost = 0.0;
  double speedup = 1.0;  // serial per-iteration cost / parallel
};

/// The two-layer event-based recurrent network: L gradient neurons
/// holding x, M constraint neurons holding (w, v), synapse weights
/// quantized from Q, A, A'.
class Network {
 public:
  Network(const QpProblem& problem, const HyperParams& hp,
          const NetworkConfig& cfg);

  /// Resets states to quantized initial values and restarts the
  /// schedule; null optionals mean zeros.
  void warm_start(const std::vector<double>& x0,
                  const std::vector<double>* v0 = nullptr,
                  const std::vector<double>* w0 = nullptr);

  /// One synchronous iteration; returns this iteration's stats delta.
  IterationStats step();

  int n_gradient_neurons() const { return L_; }
  int n_constraint_neurons() const { return M_; }
  int total_neurons() const { return L_ + M_; }

  const FxpTensor& x() const { return x_; }
  const FxpTensor& w() const { return w_; }
  const FxpTensor& v() const { return v_; }
  std::vector<double> dequantized_x() const { return x_.dequantize(); }

  std::int64_t iter() const { return iter_; }
  /// Alpha underflowed to raw zero: further iterations cannot move x.
  bool alpha_terminal() const { return alpha_raw_ == 0; }
  double alpha() const;
  double beta() const;

  const QpProblem& problem() const { return problem_; }
  const NetworkConfig& config() const { return cfg_; }
  const QuantizedMatrix& weights_q() const { return qQ_; }
  const QuantizedMatrix& weights_a() const { return qA_; }
  const QuantizedMatrix& weights_at() const { return qAT_; }

  /// When set, solve() records trace cost/violation against this
  /// original-frame problem instead of the (typically scaled) build
  /// problem, mapping states back through the scaling.
  void set_eval_frame(const QpProblem& original, const Scaling& scaling);
  bool has_eval_frame() const { return eval_problem_.has_value(); }
  const QpProblem& eval_problem() const { return *eval_problem_; }
  const Scaling& eval_scaling() const { return *eval_scaling_; }

 private:
  QpProblem problem_;
  NetworkConfig cfg_;
  int L_ = 0;
  int M_ = 0;
  QuantizedMatrix qQ_, qA_, qAT_;
  FxpTensor x_, w_, v_, p_bias_, k_bias_;
  std::optional<FxpTensor> box_lower_, box_upper_;
  int alpha_shift0_ = 0;  // initial shifts, restored by warm_start
  int beta_shift0_ = 0;
  int alpha_shift_ = 0;  // alpha = 2^alpha_shift while raw nonzero
  int beta_shift_ = 0;
  std::int64_t alpha_raw_ = 0;  // power-of-two raw in state format
  std::int64_t beta_raw_ = 0;
  int beta_doublings_ = 0;
  std::int64_t iter_ = 0;

  std::optional<QpProblem> eval_problem_;
  std::optional<Scaling> eval_scaling_;

  std::vector<std::int64_t> fanout_x_;  // col nnz of qQ + col nnz of qA
  std::vector<std::int64_t> fanout_v_;  // col nnz of qAT
};

Network build_network(const QpProblem& problem, const HyperParams& hp,
                      const NetworkConfig& cfg);

struct SolveOutput {
  Solution solution;
  ConvergenceTrace trace;
  EventStats stats;
};

/// Runs step() for `budget` iterations (stopping early only when alpha
/// has underflowed and x stopped moving); records a float-space trace
/// per iteration from the dequantized state.
SolveOutput solve(Network& network, std::int64_t budget);

PartitionReport partition(const Network& network, int neurons_per_core,
                          std::int64_t iterations = 1, double c_sync = 64.0);

}  // namespace evqp
