#include <doctest.h>

#include <cmath>
#include <vector>

#include "evqp/mpcgen.hpp"
#include "evqp/problem.hpp"
#include "test_util.hpp"

using namespace evqp;
namespace tu = evqp::testutil;

namespace {

StageModel hand_model() {
  StageModel m;
  m.n_states = 1;
  m.n_controls = 1;
  m.N = 1;
  m.S = {DenseBlock(1, 1)};
  m.S[0].at(0, 0) = 2.0;
  m.K = {DenseBlock(1, 1)};
  m.K[0].at(0, 0) = 0.5;
  m.T = {DenseBlock(1, 1)};
  m.T[0].at(0, 0) = 3.0;
  m.q_x = {{0.7}};
  m.q_u = {{-0.3}};
  m.E = {DenseBlock(1, 1)};
  m.E[0].at(0, 0) = 1.0;
  m.F = {DenseBlock(1, 1)};
  m.F[0].at(0, 0) = 1.0;
  m.c = {{0.25}};
  m.P = DenseBlock(1, 1);
  m.P.at(0, 0) = 1.5;
  m.q_term = {0.9};
  m.x_init = {0.6};
  return m;
}

double frob(const SparseMatrix& m) {
  double s = 0.0;
  for (const Triplet& t : m.to_triplets()) s += t.value * t.value;
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("mpcgen") {

TEST_CASE("count_resources reproduces the size ladder") {
  const int horizons[] = {5, 50, 75, 100, 150, 175};
  const std::int64_t decisions[] = {264, 2424, 3624, 4824, 7224, 8424};
  for (int i = 0; i < 6; ++i) {
    const ResourceCount rc = count_resources(24, 24, horizons[i]);
    CHECK(rc.n_neurons_decision == decisions[i]);
    CHECK(rc.n_neurons_total ==
          decisions[i] + 24 * (static_cast<std::int64_t>(horizons[i]) + 1));
  }
  const ResourceCount rc100 = count_resources(24, 24, 100);
  CHECK(rc100.n_neurons_total == 7248);
  CHECK(rc100.n_synapses == 403776);
}

TEST_CASE("count_resources matches tiled problem dimensions") {
  const int cases[][3] = {{1, 1, 1}, {2, 1, 3}, {3, 2, 6}, {24, 24, 5}};
  for (const auto& c : cases) {
    GeneratorSpec gs;
    gs.n_states = c[0];
    gs.n_controls = c[1];
    gs.horizon = c[2];
    gs.seed = 3;
    const QpProblem p = tile(generate_random(gs));
    const ResourceCount rc = count_resources(c[0], c[1], c[2]);
    CHECK(p.L() == rc.n_neurons_decision);
    CHECK(p.L() + p.M() == rc.n_neurons_total);
    CHECK(p.M() == c[0] * (c[2] + 1));
  }
}

TEST_CASE("tile of a unit-horizon scalar model matches hand arithmetic") {
  const QpProblem p = tile(hand_model());
  REQUIRE(p.L() == 3);
  REQUIRE(p.M() == 2);

  // z = (x0, u0, x1); objective blocks [[S, K'], [K, T]] then P.
  CHECK(p.Q.coeff(0, 0) == 2.0);
  CHECK(p.Q.coeff(0, 1) == 0.5);
  CHECK(p.Q.coeff(1, 0) == 0.5);
  CHECK(p.Q.coeff(1, 1) == 3.0);
  CHECK(p.Q.coeff(2, 2) == 1.5);
  CHECK(p.Q.coeff(0, 2) == 0.0);
  CHECK(p.p == std::vector<double>{0.7, -0.3, 0.9});

  // Row 0 pins x0 = x_init; row 1 encodes x1 = E x0 + F u0 + c.
  const std::vector<double> a = p.A.to_dense();
  CHECK(a == std::vector<double>{1, 0, 0, -1, -1, 1});
  CHECK(p.k == std::vector<double>{0.6, 0.25});
  CHECK(p.senses == std::vector<Sense>{Sense::Eq, Sense::Eq});
}

TEST_CASE("generated problems are deterministic per seed") {
  GeneratorSpec gs;
  gs.n_states = 3;
  gs.n_controls = 2;
  gs.horizon = 4;
  gs.seed = 11;
  const QpProblem a = tile(generate_random(gs));
  const QpProblem b = tile(generate_random(gs));
  CHECK(a.Q.values() == b.Q.values());
  CHECK(a.A.values() == b.A.values());
  CHECK(a.p == b.p);
  CHECK(a.k == b.k);

  gs.seed = 12;
  const QpProblem c = tile(generate_random(gs));
  CHECK(a.Q.values() != c.Q.values());
}

TEST_CASE("tiled problems validate, including the dense PSD check") {
  GeneratorSpec gs;
  gs.n_states = 24;
  gs.n_controls = 24;
  gs.horizon = 5;
  gs.seed = 41;
  const QpProblem p = tile(generate_random(gs));
  REQUIRE(p.L() == 264);
  ValidationReport r = validate(p);
  CHECK(r.ok());
  CHECK_FALSE(r.psd_skipped);

  GeneratorSpec small;
  small.n_states = 4;
  small.n_controls = 2;
  small.horizon = 20;
  small.seed = 9;
  r = validate(tile(generate_random(small)));
  CHECK(r.ok());
  CHECK_FALSE(r.psd_skipped);
}

TEST_CASE("all senses are equalities and the block structure is banded") {
  GeneratorSpec gs;
  gs.n_states = 2;
  gs.n_controls = 1;
  gs.horizon = 3;
  gs.seed = 5;
  const StageModel model = generate_random(gs);
  const QpProblem p = tile(model);
  const int ns = 2, nc = 1, stage = ns + nc;

  for (Sense s : p.senses) CHECK(s == Sense::Eq);

  // Q couples variables only within one stage (or the terminal block).
  for (const Triplet& t : p.Q.to_triplets()) {
    const int sr = std::min(t.row / stage, gs.horizon);
    const int sc = std::min(t.col / stage, gs.horizon);
    CHECK(sr == sc);
  }
  // Dynamics row j touches stage j and the next state block only.
  for (const Triplet& t : p.A.to_triplets()) {
    if (t.row < ns) {
      CHECK(t.col < ns);  // x0 pin
      continue;
    }
    const int j = (t.row - ns) / ns;  // dynamics stage
    const int lo = j * stage;
    const int hi = (j + 1) * stage + ns;
    CHECK(t.col >= lo);
    CHECK(t.col < hi);
  }
}

TEST_CASE("density stays within the banded bound") {
  for (const auto& c : {std::pair{24, 5}, std::pair{3, 6}}) {
    GeneratorSpec gs;
    gs.n_states = c.first;
    gs.n_controls = c.first == 24 ? 24 : 2;
    gs.horizon = c.second;
    gs.seed = 2;
    const QpProblem p = tile(generate_random(gs));
    const double l = p.L();
    CHECK(static_cast<double>(p.Q.nnz()) / (l * l) <=
          2.0 * (gs.n_states + gs.n_controls) / l);
  }
}

TEST_CASE("feasible_point satisfies the tiled constraints") {
  GeneratorSpec gs;
  gs.n_states = 5;
  gs.n_controls = 3;
  gs.horizon = 7;
  gs.seed = 13;
  const StageModel model = generate_random(gs);
  const QpProblem p = tile(model);
  const std::vector<double> z = feasible_point(model);
  REQUIRE(static_cast<int>(z.size()) == p.L());
  CHECK(evaluate_violation(p, z).first <= 1e-9);
}

TEST_CASE("perturb: magnitude zero is the identity") {
  GeneratorSpec gs;
  gs.n_states = 3;
  gs.n_controls = 2;
  gs.horizon = 4;
  gs.seed = 21;
  const StageModel model = generate_random(gs);
  const QpProblem base = tile(model);
  const QpProblem same = tile(perturb(model, 0.0, 77));
  CHECK(base.Q.values() == same.Q.values());
  CHECK(base.A.values() == same.A.values());
  CHECK(base.k == same.k);
}

TEST_CASE("perturb: small magnitude stays close, valid and deterministic") {
  GeneratorSpec gs;
  gs.n_states = 4;
  gs.n_controls = 3;
  gs.horizon = 5;
  gs.seed = 31;
  const StageModel model = generate_random(gs);
  const QpProblem base = tile(model);

  const StageModel pert = perturb(model, 0.01, 123);
  const QpProblem moved = tile(pert);

  REQUIRE(moved.Q.same_pattern(base.Q));
  REQUIRE(moved.A.same_pattern(base.A));
  CHECK(validate(moved).ok());

  double dq = 0.0;
  for (const Triplet& t : base.Q.to_triplets()) {
    const double d = moved.Q.coeff(t.row, t.col) - t.value;
    dq += d * d;
  }
  CHECK(std::sqrt(dq) / frob(base.Q) <= 0.05);
  CHECK(std::sqrt(dq) > 0.0);

  const QpProblem again = tile(perturb(model, 0.01, 123));
  CHECK(again.Q.values() == moved.Q.values());
  const QpProblem other = tile(perturb(model, 0.01, 124));
  CHECK(other.Q.values() != moved.Q.values());
}

}  // TEST_SUITE("mpcgen")
