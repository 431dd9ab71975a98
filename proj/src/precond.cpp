#include "evqp/precond.hpp"

#include <cmath>
#include <stdexcept>

namespace evqp {

std::vector<double> stacked_norms(const QpProblem& problem) {
  const int L = problem.L();
  const int M = problem.M();
  std::vector<double> n(static_cast<std::size_t>(L) + M, 0.0);
  for (const Triplet& t : problem.Q.to_triplets()) {
    const double a = std::abs(t.value);
    n[static_cast<std::size_t>(t.col)] = std::max(n[static_cast<std::size_t>(t.col)], a);
    n[static_cast<std::size_t>(t.row)] = std::max(n[static_cast<std::size_t>(t.row)], a);
  }
  for (const Triplet& t : problem.A.to_triplets()) {
    const double a = std::abs(t.value);
    n[static_cast<std::size_t>(t.col)] = std::max(n[static_cast<std::size_t>(t.col)], a);
    n[static_cast<std::size_t>(L) + t.row] =
        std::max(n[static_cast<std::size_t>(L) + t.row], a);
  }
  return n;
}

RuizResult ruiz_equilibrate(const QpProblem& problem, int max_iters,
                            double tol) {
  if (max_iters < 1)
    throw std::invalid_argument("ruiz_equilibrate: max_iters must be >= 1");
  if (!(tol > 0.0 && tol < 1.0))
    throw std::invalid_argument("ruiz_equilibrate: tol must be in (0, 1)");

  const int L = problem.L();
  const int M = problem.M();
  RuizResult res;
  res.problem = problem;
  res.scaling.d.assign(static_cast<std::size_t>(L), 1.0);
  res.scaling.e.assign(static_cast<std::size_t>(M), 1.0);
  res.scaling.c = 1.0;

  QpProblem& s = res.problem;
  for (int pass = 0; pass < max_iters; ++pass) {
    const std::vector<double> n = stacked_norms(s);
    bool within = true;
    for (double v : n)
      if (v > 0.0 && std::abs(v - 1.0) > tol) {
        within = false;
        break;
      }
    if (within) {
      res.converged = true;
      break;
    }
    res.iterations = pass + 1;

    std::vector<double> dl(static_cast<std::size_t>(L));
    std::vector<double> el(static_cast<std::size_t>(M));
    for (int i = 0; i < L; ++i) {
      const double ni = n[static_cast<std::size_t>(i)];
      dl[static_cast<std::size_t>(i)] = ni > 0.0 ? 1.0 / std::sqrt(ni) : 1.0;
      res.scaling.d[static_cast<std::size_t>(i)] *= dl[static_cast<std::size_t>(i)];
    }
    for (int j = 0; j < M; ++j) {
      const double nj = n[static_cast<std::size_t>(L) + j];
      el[static_cast<std::size_t>(j)] = nj > 0.0 ? 1.0 / std::sqrt(nj) : 1.0;
      res.scaling.e[static_cast<std::size_t>(j)] *= el[static_cast<std::size_t>(j)];
    }

    s.Q = s.Q.map_values([&](int r, int c, double& v) {
      v *= dl[static_cast<std::size_t>(r)] * dl[static_cast<std::size_t>(c)];
    });
    s.A = s.A.map_values([&](int r, int c, double& v) {
      v *= el[static_cast<std::size_t>(r)] * dl[static_cast<std::size_t>(c)];
    });
    for (int i = 0; i < L; ++i) s.p[static_cast<std::size_t>(i)] *= dl[static_cast<std::size_t>(i)];
    for (int j = 0; j < M; ++j) s.k[static_cast<std::size_t>(j)] *= el[static_cast<std::size_t>(j)];

    // Cost normalization: gamma = 1 / max(mean column inf-norm of Q', |p'|_inf).
    std::vector<double> coln(static_cast<std::size_t>(L), 0.0);
    for (const Triplet& t : s.Q.to_triplets())
      coln[static_cast<std::size_t>(t.col)] =
          std::max(coln[static_cast<std::size_t>(t.col)], std::abs(t.value));
    double mean_col = 0.0;
    for (double v : coln) mean_col += v;
    if (L > 0) mean_col /= L;
    double p_inf = 0.0;
    for (double v : s.p) p_inf = std::max(p_inf, std::abs(v));
    const double den = std::max(mean_col, p_inf);
    const double gamma = den > 0.0 ? 1.0 / den : 1.0;
    res.scaling.c *= gamma;
    s.Q = s.Q.map_values([&](int, int, double& v) { v *= gamma; });
    for (double& v : s.p) v *= gamma;
  }

  if (s.box) {
    for (int i = 0; i < L; ++i) {
      s.box->lower[static_cast<std::size_t>(i)] /= res.scaling.d[static_cast<std::size_t>(i)];
      s.box->upper[static_cast<std::size_t>(i)] /= res.scaling.d[static_cast<std::size_t>(i)];
    }
  }
  return res;
}

std::vector<double> unscale_solution(const std::vector<double>& x_scaled,
                                     const Scaling& scaling) {
  if (x_scaled.size() != scaling.d.size())
    throw std::invalid_argument("unscale_solution: dimension mismatch");
  std::vector<double> x(x_scaled.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = scaling.d[i] * x_scaled[i];
  return x;
}

}  // namespace evqp
