#include "evqp/reference.hpp"

#include <cmath>
#include <random>

namespace evqp {
namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double inf_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void project_box(const QpProblem& problem, std::vector<double>& x) {
  if (!problem.box) return;
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = std::min(std::max(x[i], problem.box->lower[i]),
                    problem.box->upper[i]);
}

struct Schedule {
  double alpha;
  double beta;
  int doublings = 0;

  Schedule(const HyperParams& hp) : alpha(hp.alpha0), beta(hp.beta0) {}

  void advance(const HyperParams& hp, std::int64_t t) {
    if (hp.alpha_decay_period > 0 && t % hp.alpha_decay_period == 0)
      alpha *= 0.5;
    if (hp.beta_growth_period > 0 && t % hp.beta_growth_period == 0 &&
        doublings < kBetaMaxDoublings) {
      beta *= 2.0;
      ++doublings;
    }
  }
};

void record(ConvergenceTrace& trace, const QpProblem& problem,
            std::int64_t iter, const std::vector<double>& x, double cost,
            double violation) {
  trace.records.push_back({iter, cost, violation});
  if (trace.snapshot_stride > 0 && iter % trace.snapshot_stride == 0)
    trace.snapshots.push_back(x);
  (void)problem;
}

Solution finish(const QpProblem& problem, std::vector<double> x,
                std::int64_t iterations, bool converged) {
  Solution s;
  s.cost = evaluate_cost(problem, x);
  s.violation = evaluate_violation(problem, x).first;
  s.x = std::move(x);
  s.iterations = iterations;
  s.converged = converged;
  return s;
}

}  // namespace

std::vector<double> relu_gate(const std::vector<double>& r,
                              const std::vector<Sense>& senses) {
  if (r.size() != senses.size())
    throw std::invalid_argument("relu_gate: dimension mismatch");
  std::vector<double> out(r.size());
  for (std::size_t j = 0; j < r.size(); ++j)
    out[j] = senses[j] == Sense::Ineq ? std::max(r[j], 0.0) : r[j];
  return out;
}

std::pair<Solution, ConvergenceTrace> solve_gd(const QpProblem& problem,
                                               const HyperParams& hp,
                                               int snapshot_stride) {
  const int L = problem.L();
  std::vector<double> x(static_cast<std::size_t>(L), 0.0);
  Schedule sched(hp);
  ConvergenceTrace trace;
  trace.snapshot_stride = snapshot_stride;
  record(trace, problem, 0, x, evaluate_cost(problem, x),
         evaluate_violation(problem, x).first);

  std::int64_t t = 0;
  bool converged = false;
  while (t < hp.max_iters) {
    ++t;
    const std::vector<double> qx = spmv(problem.Q, x);
    std::vector<double> xn(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      xn[i] = x[i] - sched.alpha * (qx[i] + problem.p[i]);
    if (!all_finite(xn)) throw DivergenceError(t, "solve_gd");
    const double dx = inf_diff(xn, x);
    x = std::move(xn);
    record(trace, problem, t, x, evaluate_cost(problem, x),
           evaluate_violation(problem, x).first);
    if (dx <= hp.conv_tol) {
      converged = true;
      break;
    }
    sched.advance(hp, t);
  }
  trace.final_state = {x, {}, {}, sched.alpha, sched.beta, t};
  return {finish(problem, std::move(x), t, converged), std::move(trace)};
}

std::pair<Solution, ConvergenceTrace> solve_gdcc(const QpProblem& problem,
                                                 const HyperParams& hp,
                                                 int snapshot_stride) {
  const int L = problem.L();
  const int M = problem.M();
  std::vector<double> x(static_cast<std::size_t>(L), 0.0);
  Schedule sched(hp);
  ConvergenceTrace trace;
  trace.snapshot_stride = snapshot_stride;
  record(trace, problem, 0, x, evaluate_cost(problem, x),
         evaluate_violation(problem, x).first);

  std::int64_t t = 0;
  bool converged = false;
  while (t < hp.max_iters) {
    ++t;
    const std::vector<double> qx = spmv(problem.Q, x);
    std::vector<double> corr(static_cast<std::size_t>(L), 0.0);
    if (M > 0) {
      std::vector<double> r = spmv(problem.A, x);
      for (int j = 0; j < M; ++j) r[static_cast<std::size_t>(j)] -= problem.k[static_cast<std::size_t>(j)];
      const std::vector<double> g = relu_gate(r, problem.senses);
      corr = spmv(problem.A.transposed(), g);
    }
    std::vector<double> xn(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      xn[i] = x[i] - sched.alpha * (qx[i] + problem.p[i]) - sched.beta * corr[i];
    if (!all_finite(xn)) throw DivergenceError(t, "solve_gdcc");
    const double dx = inf_diff(xn, x);
    x = std::move(xn);
    record(trace, problem, t, x, evaluate_cost(problem, x),
           evaluate_violation(problem, x).first);
    if (dx <= hp.conv_tol) {
      converged = true;
      break;
    }
    sched.advance(hp, t);
  }
  trace.final_state = {x, {}, {}, sched.alpha, sched.beta, t};
  return {finish(problem, std::move(x), t, converged), std::move(trace)};
}

std::pair<Solution, ConvergenceTrace> solve_pipg(const QpProblem& problem,
                                                 const HyperParams& hp,
                                                 int snapshot_stride) {
  const int L = problem.L();
  const int M = problem.M();
  const SparseMatrix At = problem.A.transposed();
  std::vector<double> x(static_cast<std::size_t>(L), 0.0);
  std::vector<double> w(static_cast<std::size_t>(M), 0.0);
  project_box(problem, x);
  Schedule sched(hp);
  ConvergenceTrace trace;
  trace.snapshot_stride = snapshot_stride;
  double prev_cost = evaluate_cost(problem, x);
  record(trace, problem, 0, x, prev_cost,
         evaluate_violation(problem, x).first);

  std::int64_t t = 0;
  bool converged = false;
  while (t < hp.max_iters) {
    ++t;
    std::vector<double> atv(static_cast<std::size_t>(L), 0.0);
    if (M > 0) {
      std::vector<double> r = spmv(problem.A, x);
      for (int j = 0; j < M; ++j) r[static_cast<std::size_t>(j)] -= problem.k[static_cast<std::size_t>(j)];
      for (int j = 0; j < M; ++j) w[static_cast<std::size_t>(j)] += sched.beta * r[static_cast<std::size_t>(j)];
      const std::vector<double> v = relu_gate(w, problem.senses);
      atv = spmv(At, v);
    }
    const std::vector<double> qx = spmv(problem.Q, x);
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] -= sched.alpha * (qx[i] + problem.p[i] + atv[i]);
    project_box(problem, x);
    if (!all_finite(x) || !all_finite(w)) throw DivergenceError(t, "solve_pipg");

    const double cost = evaluate_cost(problem, x);
    const double violation = evaluate_violation(problem, x).first;
    record(trace, problem, t, x, cost, violation);
    if (std::abs(cost - prev_cost) <=
            hp.conv_tol * std::max(1.0, std::abs(prev_cost)) &&
        violation <= hp.conv_tol) {
      converged = true;
      break;
    }
    prev_cost = cost;
    sched.advance(hp, t);
  }
  trace.final_state = {x, relu_gate(w, problem.senses), w, sched.alpha,
                       sched.beta, t};
  return {finish(problem, std::move(x), t, converged), std::move(trace)};
}

namespace {

std::vector<double> seeded_start(int n, std::mt19937_64& gen) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& e : v) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    e = 2.0 * u - 1.0;
  }
  return v;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

SpectralEstimates estimate_spectral(const QpProblem& problem,
                                    std::uint64_t seed) {
  constexpr int kPowerSteps = 50;
  SpectralEstimates est;
  std::mt19937_64 gen(seed);
  const int L = problem.L();

  if (problem.Q.nnz() > 0) {
    std::vector<double> v = seeded_start(L, gen);
    for (int s = 0; s < kPowerSteps; ++s) {
      std::vector<double> u = spmv(problem.Q, v);
      const double n = norm2(u);
      if (n == 0.0) break;
      for (double& e : u) e /= n;
      v = std::move(u);
      est.lambda_max = dot(v, spmv(problem.Q, v));
    }
  }
  if (problem.M() > 0 && problem.A.nnz() > 0) {
    const SparseMatrix At = problem.A.transposed();
    std::vector<double> v = seeded_start(L, gen);
    for (int s = 0; s < kPowerSteps; ++s) {
      std::vector<double> u = spmv(At, spmv(problem.A, v));
      const double n = norm2(u);
      if (n == 0.0) break;
      for (double& e : u) e /= n;
      v = std::move(u);
      est.sigma_max = std::sqrt(std::max(dot(v, spmv(At, spmv(problem.A, v))), 0.0));
    }
  }
  return est;
}

HyperParams estimate_hyperparams(const QpProblem& problem,
                                 std::uint64_t seed) {
  const SpectralEstimates est = estimate_spectral(problem, seed);
  HyperParams hp;
  hp.beta0 = 1.0 / std::max(est.sigma_max, 1.0);
  const double den = est.lambda_max + est.sigma_max * hp.beta0;
  hp.alpha0 = den > 0.0 ? 1.0 / den : 1.0;
  hp.alpha_decay_period = 100;
  hp.beta_growth_period = 100;
  return hp;
}

}  // namespace evqp
