#include "evqp/mpcgen.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "evqp/rng.hpp"

namespace evqp {
namespace {

DenseBlock random_block(Rng& rng, int rows, int cols, double scale) {
  DenseBlock b(rows, cols);
  for (double& v : b.a) v = scale * rng.normal();
  return b;
}

/// H = B B' + eps I for a freshly drawn B with entries N(0,1)/sqrt(d).
DenseBlock psd_block(Rng& rng, int d, double eps) {
  const DenseBlock b = random_block(rng, d, d, 1.0 / std::sqrt(static_cast<double>(d)));
  DenseBlock h(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) s += b.at(r, i) * b.at(c, i);
      h.at(r, c) = s + (r == c ? eps : 0.0);
    }
  return h;
}

std::vector<double> negated_product(const DenseBlock& h,
                                    const std::vector<double>& z) {
  std::vector<double> q(static_cast<std::size_t>(h.rows), 0.0);
  for (int r = 0; r < h.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < h.cols; ++c) s += h.at(r, c) * z[static_cast<std::size_t>(c)];
    q[static_cast<std::size_t>(r)] = -s;
  }
  return q;
}

std::vector<double> random_vector(Rng& rng, int n, double scale = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& e : v) e = scale * rng.normal();
  return v;
}

void push_block(std::vector<Triplet>& t, const DenseBlock& b, int row0,
                int col0, double sign = 1.0) {
  for (int r = 0; r < b.rows; ++r)
    for (int c = 0; c < b.cols; ++c)
      if (b.at(r, c) != 0.0) t.push_back({row0 + r, col0 + c, sign * b.at(r, c)});
}

/// Assembles [[S, K'],[K, T]] for one stage.
DenseBlock stage_cost_block(const StageModel& m, int j) {
  const int ns = m.n_states, nc = m.n_controls, d = ns + nc;
  DenseBlock h(d, d);
  for (int r = 0; r < ns; ++r)
    for (int c = 0; c < ns; ++c) h.at(r, c) = m.S[static_cast<std::size_t>(j)].at(r, c);
  for (int r = 0; r < nc; ++r)
    for (int c = 0; c < ns; ++c) {
      h.at(ns + r, c) = m.K[static_cast<std::size_t>(j)].at(r, c);
      h.at(c, ns + r) = m.K[static_cast<std::size_t>(j)].at(r, c);
    }
  for (int r = 0; r < nc; ++r)
    for (int c = 0; c < nc; ++c) h.at(ns + r, ns + c) = m.T[static_cast<std::size_t>(j)].at(r, c);
  return h;
}

void split_stage_cost_block(const DenseBlock& h, int ns, int nc, DenseBlock& s,
                            DenseBlock& k, DenseBlock& t) {
  s = DenseBlock(ns, ns);
  k = DenseBlock(nc, ns);
  t = DenseBlock(nc, nc);
  for (int r = 0; r < ns; ++r)
    for (int c = 0; c < ns; ++c) s.at(r, c) = h.at(r, c);
  for (int r = 0; r < nc; ++r)
    for (int c = 0; c < ns; ++c) k.at(r, c) = h.at(ns + r, c);
  for (int r = 0; r < nc; ++r)
    for (int c = 0; c < nc; ++c) t.at(r, c) = h.at(ns + r, ns + c);
}

void perturb_entries(Rng& rng, double magnitude, DenseBlock& b) {
  for (double& v : b.a)
    if (v != 0.0) v *= 1.0 + magnitude * rng.normal();
}

/// Symmetrize and clip eigenvalues below eps back to eps.
DenseBlock psd_project(const DenseBlock& h, double eps) {
  const int d = h.rows;
  Eigen::MatrixXd m(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = 0.5 * (h.at(r, c) + h.at(c, r));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  bool clipped = false;
  for (int i = 0; i < d; ++i)
    if (ev(i) < eps) {
      ev(i) = eps;
      clipped = true;
    }
  if (clipped)
    m = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  DenseBlock out(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) out.at(r, c) = 0.5 * (m(r, c) + m(c, r));
  return out;
}

}  // namespace

QpProblem tile(const StageModel& m) {
  const int ns = m.n_states, nc = m.n_controls, N = m.N, d = ns + nc;
  const int L = (N + 1) * ns + N * nc;
  const int M = (N + 1) * ns;

  std::vector<Triplet> qt;
  QpProblem p;
  p.p.assign(static_cast<std::size_t>(L), 0.0);
  for (int j = 0; j < N; ++j) {
    const int o = j * d;
    push_block(qt, stage_cost_block(m, j), o, o);
    for (int i = 0; i < ns; ++i) p.p[static_cast<std::size_t>(o + i)] = m.q_x[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    for (int i = 0; i < nc; ++i) p.p[static_cast<std::size_t>(o + ns + i)] = m.q_u[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  }
  push_block(qt, m.P, N * d, N * d);
  for (int i = 0; i < ns; ++i) p.p[static_cast<std::size_t>(N * d + i)] = m.q_term[static_cast<std::size_t>(i)];
  p.Q = SparseMatrix::from_triplets(L, L, std::move(qt));

  std::vector<Triplet> at;
  p.k.assign(static_cast<std::size_t>(M), 0.0);
  for (int i = 0; i < ns; ++i) {
    at.push_back({i, i, 1.0});
    p.k[static_cast<std::size_t>(i)] = m.x_init[static_cast<std::size_t>(i)];
  }
  for (int j = 0; j < N; ++j) {
    const int r0 = (j + 1) * ns;
    const int o = j * d;
    push_block(at, m.E[static_cast<std::size_t>(j)], r0, o, -1.0);
    push_block(at, m.F[static_cast<std::size_t>(j)], r0, o + ns, -1.0);
    for (int i = 0; i < ns; ++i) at.push_back({r0 + i, o + d + i, 1.0});
    for (int i = 0; i < ns; ++i) p.k[static_cast<std::size_t>(r0 + i)] = m.c[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  }
  p.A = SparseMatrix::from_triplets(M, L, std::move(at));
  p.senses.assign(static_cast<std::size_t>(M), Sense::Eq);
  return p;
}

ResourceCount count_resources(int n_states, int n_controls, int N) {
  if (n_states < 1 || n_controls < 1 || N < 1)
    throw std::invalid_argument("count_resources: all counts must be >= 1");
  const std::int64_t ns = n_states, nc = n_controls, n = N;
  ResourceCount r;
  r.n_neurons_decision = (n + 1) * ns + n * nc;
  r.n_neurons_total = r.n_neurons_decision + (n + 1) * ns;
  r.n_synapses = ns * (2 * ns + nc) * n + (ns + nc) * (ns + nc) * n + ns * ns;
  return r;
}

StageModel generate_random(const GeneratorSpec& spec) {
  const int ns = spec.n_states, nc = spec.n_controls, N = spec.horizon;
  if (ns < 1 || nc < 1 || N < 1)
    throw std::invalid_argument("generate_random: sizes must be >= 1");
  const int d = ns + nc;
  Rng rng(spec.seed);
  StageModel m;
  m.n_states = ns;
  m.n_controls = nc;
  m.N = N;
  for (int j = 0; j < N; ++j) {
    const DenseBlock h = psd_block(rng, d, spec.eps);
    DenseBlock s, k, t;
    split_stage_cost_block(h, ns, nc, s, k, t);
    m.S.push_back(std::move(s));
    m.K.push_back(std::move(k));
    m.T.push_back(std::move(t));
    const std::vector<double> zref = random_vector(rng, d);
    const std::vector<double> q = negated_product(h, zref);
    m.q_x.emplace_back(q.begin(), q.begin() + ns);
    m.q_u.emplace_back(q.begin() + ns, q.end());
    DenseBlock e = random_block(rng, ns, ns, spec.delta / std::sqrt(static_cast<double>(ns)));
    for (int i = 0; i < ns; ++i) e.at(i, i) += 1.0;
    m.E.push_back(std::move(e));
    m.F.push_back(random_block(rng, ns, nc, spec.delta / std::sqrt(static_cast<double>(nc))));
    m.c.push_back(random_vector(rng, ns, spec.delta));
  }
  m.P = psd_block(rng, ns, spec.eps);
  m.q_term = negated_product(m.P, random_vector(rng, ns));
  m.x_init = random_vector(rng, ns);
  return m;
}

StageModel perturb(const StageModel& model, double magnitude,
                   std::uint64_t seed) {
  if (magnitude < 0.0)
    throw std::invalid_argument("perturb: magnitude must be >= 0");
  if (magnitude == 0.0) return model;
  constexpr double kEps = 1e-3;
  Rng rng(seed);
  StageModel m = model;
  for (int j = 0; j < m.N; ++j) {
    DenseBlock h = stage_cost_block(m, j);
    perturb_entries(rng, magnitude, h);
    h = psd_project(h, kEps);
    split_stage_cost_block(h, m.n_states, m.n_controls,
                           m.S[static_cast<std::size_t>(j)], m.K[static_cast<std::size_t>(j)],
                           m.T[static_cast<std::size_t>(j)]);
    perturb_entries(rng, magnitude, m.E[static_cast<std::size_t>(j)]);
    perturb_entries(rng, magnitude, m.F[static_cast<std::size_t>(j)]);
  }
  DenseBlock p = m.P;
  perturb_entries(rng, magnitude, p);
  m.P = psd_project(p, kEps);
  return m;
}

std::vector<double> feasible_point(const StageModel& m) {
  const int ns = m.n_states, nc = m.n_controls, N = m.N, d = ns + nc;
  std::vector<double> z(static_cast<std::size_t>((N + 1) * ns + N * nc), 0.0);
  std::vector<double> x = m.x_init;
  for (int i = 0; i < ns; ++i) z[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
  for (int j = 0; j < N; ++j) {
    std::vector<double> xn(static_cast<std::size_t>(ns), 0.0);
    for (int r = 0; r < ns; ++r) {
      double s = m.c[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)];
      for (int c = 0; c < ns; ++c) s += m.E[static_cast<std::size_t>(j)].at(r, c) * x[static_cast<std::size_t>(c)];
      xn[static_cast<std::size_t>(r)] = s;
    }
    x = std::move(xn);
    for (int i = 0; i < ns; ++i) z[static_cast<std::size_t>((j + 1) * d + i)] = x[static_cast<std::size_t>(i)];
  }
  return z;
}

}  // namespace evqp
