#include "evqp/neurosolver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace evqp {

namespace {

// Raw representation of 2^e in fmt: 0 on underflow, saturated on overflow.
std::int64_t pow2_raw(int e, const FxpFormat& fmt) {
  const int sh = e + fmt.frac_bits;
  if (sh < 0) return 0;
  if (sh > fmt.total_bits - 2) return fmt.raw_max();
  return std::int64_t{1} << sh;
}

// x * 2^shift with round-half-to-even on right shifts. Inputs are
// format-bounded and shifts are schedule-bounded, so int64 is exact.
std::int64_t apply_shift(std::int64_t v, int shift) {
  if (shift >= 0) {
    if (shift >= 62) throw std::logic_error("shift exponent out of range");
    return v << shift;
  }
  const int s = -shift;
  if (s >= 126) return 0;
  return static_cast<std::int64_t>(
      round_half_even_rshift(static_cast<__int128>(v), s));
}

std::int64_t clamp_raw(std::int64_t v, std::int64_t lo, std::int64_t hi) {
  return std::min(std::max(v, lo), hi);
}

}  // namespace

Network::Network(const QpProblem& problem, const HyperParams& hp,
                 const NetworkConfig& cfg)
    : problem_(problem), cfg_(cfg), L_(problem.L()), M_(problem.M()) {
  check_format(cfg.state_fmt);
  if (cfg.event_threshold < 0)
    throw std::invalid_argument("event_threshold must be >= 0");
  if (cfg.alpha_period < 0 || cfg.beta_period < 0)
    throw std::invalid_argument("schedule periods must be >= 0");
  if (!(hp.alpha0 > 0.0) || !std::isfinite(hp.alpha0))
    throw std::invalid_argument("alpha0 must be positive and finite");
  if (hp.beta0 < 0.0 || !std::isfinite(hp.beta0))
    throw std::invalid_argument("beta0 must be >= 0 and finite");

  qQ_ = quantize_matrix(problem.Q, cfg.weight_bits);
  qA_ = quantize_matrix(problem.A, cfg.weight_bits);
  qAT_ = quantize_matrix(problem.A.transposed(), cfg.weight_bits);
  if (problem.Q.nnz() > 0 && qQ_.nnz() == 0)
    throw std::invalid_argument(
        "weight quantization collapsed Q to all-zero; widen weight_bits or "
        "precondition the problem more strongly");
  if (problem.A.nnz() > 0 && qA_.nnz() == 0)
    throw std::invalid_argument(
        "weight quantization collapsed A to all-zero; widen weight_bits or "
        "precondition the problem more strongly");

  p_bias_ = quantize_vector(problem.p, cfg.state_fmt);
  k_bias_ = quantize_vector(problem.k, cfg.state_fmt);
  if (problem.box) {
    box_lower_ = quantize_vector(problem.box->lower, cfg.state_fmt);
    box_upper_ = quantize_vector(problem.box->upper, cfg.state_fmt);
  }

  // Step sizes as pure powers of two so the schedule is a shift.
  alpha_shift0_ = std::ilogb(hp.alpha0);
  beta_shift0_ = hp.beta0 > 0.0
                     ? static_cast<int>(std::lround(std::log2(hp.beta0)))
                     : 0;
  alpha_shift_ = alpha_shift0_;
  beta_shift_ = beta_shift0_;
  alpha_raw_ = pow2_raw(alpha_shift_, cfg.state_fmt);
  beta_raw_ = pow2_raw(beta_shift_, cfg.state_fmt);

  x_ = FxpTensor{std::vector<std::int64_t>(static_cast<std::size_t>(L_), 0),
                 cfg.state_fmt};
  w_ = FxpTensor{std::vector<std::int64_t>(static_cast<std::size_t>(M_), 0),
                 cfg.state_fmt};
  v_ = w_;
  if (box_lower_)
    for (int i = 0; i < L_; ++i)
      x_.raw[i] = clamp_raw(x_.raw[i], box_lower_->raw[i], box_upper_->raw[i]);

  // A gradient neuron's x message fans out to Q (gradient layer) and A
  // (constraint layer); a constraint neuron's v message fans out to A'.
  fanout_x_.assign(static_cast<std::size_t>(L_), 0);
  for (int i = 0; i < L_; ++i)
    fanout_x_[i] = qQ_.col_nnz(i) + qA_.col_nnz(i);
  fanout_v_.assign(static_cast<std::size_t>(M_), 0);
  for (int j = 0; j < M_; ++j) fanout_v_[j] = qAT_.col_nnz(j);
}

void Network::warm_start(const std::vector<double>& x0,
                         const std::vector<double>* v0,
                         const std::vector<double>* w0) {
  if (static_cast<int>(x0.size()) != L_)
    throw std::invalid_argument("warm_start: x0 has length " +
                                std::to_string(x0.size()) + ", expected " +
                                std::to_string(L_));
  if (v0 && static_cast<int>(v0->size()) != M_)
    throw std::invalid_argument("warm_start: v0 has length " +
                                std::to_string(v0->size()) + ", expected " +
                                std::to_string(M_));
  if (w0 && static_cast<int>(w0->size()) != M_)
    throw std::invalid_argument("warm_start: w0 has length " +
                                std::to_string(w0->size()) + ", expected " +
                                std::to_string(M_));

  x_ = quantize_vector(x0, cfg_.state_fmt);
  if (box_lower_)
    for (int i = 0; i < L_; ++i)
      x_.raw[i] = clamp_raw(x_.raw[i], box_lower_->raw[i], box_upper_->raw[i]);
  w_ = w0 ? quantize_vector(*w0, cfg_.state_fmt)
          : FxpTensor{std::vector<std::int64_t>(static_cast<std::size_t>(M_), 0),
                      cfg_.state_fmt};
  v_ = v0 ? quantize_vector(*v0, cfg_.state_fmt)
          : FxpTensor{std::vector<std::int64_t>(static_cast<std::size_t>(M_), 0),
                      cfg_.state_fmt};

  iter_ = 0;
  alpha_shift_ = alpha_shift0_;
  beta_shift_ = beta_shift0_;
  alpha_raw_ = pow2_raw(alpha_shift_, cfg_.state_fmt);
  beta_raw_ = pow2_raw(beta_shift_, cfg_.state_fmt);
  beta_doublings_ = 0;
}

IterationStats Network::step() {
  IterationStats s;
  const FxpFormat& fmt = cfg_.state_fmt;
  const std::int64_t thr = cfg_.event_threshold;

  // (1) Gradient neurons emit x where |x| exceeds the threshold.
  for (int i = 0; i < L_; ++i) {
    if (std::abs(x_.raw[i]) > thr) {
      ++s.messages_sent;
      s.fanout_mac_ops += fanout_x_[i];
    }
  }

  // (2) Constraint neurons integrate Ax, then w += beta (Ax - k),
  //     v = relu_gate(w).
  if (M_ > 0) {
    const FxpTensor ax = fxp_spmv(qA_, x_, fmt, thr, &s.mac_ops, &s.saturations);
    for (int j = 0; j < M_; ++j) {
      const std::int64_t r =
          saturate(ax.raw[j] - k_bias_.raw[j], fmt, &s.saturations);
      const std::int64_t dw = apply_shift(r, beta_shift_);
      w_.raw[j] = saturate(w_.raw[j] + dw, fmt, &s.saturations);
      const bool gate = problem_.senses[static_cast<std::size_t>(j)] ==
                            Sense::Ineq &&
                        w_.raw[j] < 0;
      v_.raw[j] = gate ? 0 : w_.raw[j];
    }

    // (3) Constraint neurons emit v.
    for (int j = 0; j < M_; ++j) {
      if (std::abs(v_.raw[j]) > thr) {
        ++s.messages_sent;
        s.fanout_mac_ops += fanout_v_[j];
      }
    }
  }

  // (4) Gradient neurons integrate Qx and A'v, then step and project.
  //     Once alpha has underflowed to raw 0 the value update is a no-op,
  //     but synaptic traffic still flows (and is still accounted).
  const FxpTensor gq = fxp_spmv(qQ_, x_, fmt, thr, &s.mac_ops, &s.saturations);
  FxpTensor gat;
  if (M_ > 0) gat = fxp_spmv(qAT_, v_, fmt, thr, &s.mac_ops, &s.saturations);
  const bool frozen = alpha_raw_ == 0;
  for (int i = 0; i < L_; ++i) {
    std::int64_t grad = saturate(gq.raw[i] + p_bias_.raw[i], fmt, &s.saturations);
    if (M_ > 0) grad = saturate(grad + gat.raw[i], fmt, &s.saturations);
    if (frozen) continue;
    const std::int64_t step_raw = apply_shift(grad, alpha_shift_);
    std::int64_t xi = saturate(x_.raw[i] - step_raw, fmt, &s.saturations);
    if (box_lower_)
      xi = clamp_raw(xi, box_lower_->raw[i], box_upper_->raw[i]);
    x_.raw[i] = xi;
  }
  s.neuron_updates += L_ + M_;

  // (5) Schedule: alpha halves (terminal at raw 0), beta doubles with a
  //     doubling cap mirroring the float reference.
  ++iter_;
  if (cfg_.alpha_period > 0 && iter_ % cfg_.alpha_period == 0 &&
      alpha_raw_ != 0) {
    alpha_raw_ = shift_halve_raw(alpha_raw_);
    --alpha_shift_;
  }
  if (cfg_.beta_period > 0 && iter_ % cfg_.beta_period == 0 &&
      beta_doublings_ < kBetaMaxDoublings) {
    ++beta_doublings_;
    beta_raw_ = shift_double_raw(beta_raw_, fmt);
    if (beta_shift_ + 1 + fmt.frac_bits <= fmt.total_bits - 2) ++beta_shift_;
  }
  return s;
}

double Network::alpha() const {
  return alpha_raw_ == 0 ? 0.0 : std::ldexp(1.0, alpha_shift_);
}

double Network::beta() const { return std::ldexp(1.0, beta_shift_); }

void Network::set_eval_frame(const QpProblem& original, const Scaling& scaling) {
  if (original.L() != L_ || original.M() != M_)
    throw std::invalid_argument("eval frame dimensions do not match network");
  eval_problem_ = original;
  eval_scaling_ = scaling;
}

Network build_network(const QpProblem& problem, const HyperParams& hp,
                      const NetworkConfig& cfg) {
  return Network(problem, hp, cfg);
}

namespace {

struct EvalPoint {
  std::vector<double> x;
  double cost = 0.0;
  double violation = 0.0;
};

EvalPoint evaluate_network(const Network& net) {
  EvalPoint ep;
  ep.x = net.dequantized_x();
  const QpProblem& prob = net.problem();
  ep.cost = evaluate_cost(prob, ep.x);
  ep.violation = evaluate_violation(prob, ep.x).first;
  return ep;
}

EvalPoint evaluate_network_frame(const Network& net, const QpProblem& original,
                                 const Scaling& scaling) {
  EvalPoint ep;
  ep.x = unscale_solution(net.dequantized_x(), scaling);
  ep.cost = evaluate_cost(original, ep.x);
  ep.violation = evaluate_violation(original, ep.x).first;
  return ep;
}

}  // namespace

SolveOutput solve(Network& network, std::int64_t budget) {
  if (budget < 1) throw std::invalid_argument("solve: budget must be >= 1");

  SolveOutput out;
  auto eval = [&]() {
    return network.has_eval_frame()
               ? evaluate_network_frame(network, network.eval_problem(),
                                        network.eval_scaling())
               : evaluate_network(network);
  };

  EvalPoint ep = eval();
  out.trace.records.push_back({network.iter(), ep.cost, ep.violation});

  bool early = false;
  for (std::int64_t t = 0; t < budget; ++t) {
    const std::vector<std::int64_t> prev = network.x().raw;
    out.stats.add(network.step());
    ep = eval();
    out.trace.records.push_back({network.iter(), ep.cost, ep.violation});
    if (network.alpha_terminal() && network.x().raw == prev) {
      early = true;
      break;
    }
  }

  out.solution.x = ep.x;
  out.solution.cost = ep.cost;
  out.solution.violation = ep.violation;
  out.solution.iterations =
      static_cast<std::int64_t>(out.trace.records.size()) - 1;
  out.solution.converged = early;
  return out;
}

PartitionReport partition(const Network& network, int neurons_per_core,
                          std::int64_t iterations, double c_sync) {
  if (neurons_per_core < 1)
    throw std::invalid_argument("partition: neurons_per_core must be >= 1");
  if (iterations < 1)
    throw std::invalid_argument("partition: iterations must be >= 1");
  if (c_sync < 0.0)
    throw std::invalid_argument("partition: c_sync must be >= 0");

  const int L = network.n_gradient_neurons();
  const int M = network.n_constraint_neurons();
  const int total = L + M;
  const std::vector<std::int64_t> rq = network.weights_q().row_nnz_counts();
  const std::vector<std::int64_t> rat = network.weights_at().row_nnz_counts();
  const std::vector<std::int64_t> ra = network.weights_a().row_nnz_counts();

  // Per-neuron work: one state update plus the post-synaptic MACs the
  // neuron performs per iteration (dense-traffic worst case).
  auto work_of = [&](int n) -> std::int64_t {
    if (n < L) return 1 + rq[static_cast<std::size_t>(n)] +
                      (M > 0 ? rat[static_cast<std::size_t>(n)] : 0);
    return 1 + ra[static_cast<std::size_t>(n - L)];
  };

  PartitionReport rep;
  rep.n_cores = (total + neurons_per_core - 1) / neurons_per_core;
  if (rep.n_cores < 1) rep.n_cores = 1;
  rep.core_neurons.assign(static_cast<std::size_t>(rep.n_cores), 0);
  std::vector<double> core_work(static_cast<std::size_t>(rep.n_cores), 0.0);
  double serial_work = 0.0;
  for (int n = 0; n < total; ++n) {
    const int core = n / neurons_per_core;
    const double w = static_cast<double>(work_of(n));
    ++rep.core_neurons[static_cast<std::size_t>(core)];
    core_work[static_cast<std::size_t>(core)] += w;
    serial_work += w;
  }

  int log2_cores = 0;
  while ((1 << log2_cores) < rep.n_cores) ++log2_cores;
  rep.sync_overhead = rep.n_cores > 1 ? c_sync * log2_cores : 0.0;
  const double max_work =
      core_work.empty() ? 0.0
                        : *std::max_element(core_work.begin(), core_work.end());
  rep.per_iteration_cost = max_work + rep.sync_overhead;
  rep.iterations = iterations;
  rep.total_cost = rep.per_iteration_cost * static_cast<double>(iterations);
  rep.speedup = rep.per_iteration_cost > 0.0
                    ? serial_work / rep.per_iteration_cost
                    : 1.0;
  return rep;
}

}  // namespace evqp
