#include "evqp/problem.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace evqp {
namespace {

using OrderedJson = nlohmann::ordered_json;

constexpr int kPsdDenseLimit = 512;
constexpr double kSymmetryTol = 1e-9;
constexpr double kPsdTol = 1e-7;

}  // namespace

ValidationReport validate(const QpProblem& problem) {
  ValidationReport report;
  const int L = problem.L();
  const int M = problem.M();

  if (problem.Q.n_rows() != problem.Q.n_cols())
    report.violations.push_back("Q not square: " +
                                std::to_string(problem.Q.n_rows()) + "x" +
                                std::to_string(problem.Q.n_cols()));
  if (problem.Q.n_cols() != L)
    report.violations.push_back("dimension mismatch: Q is " +
                                std::to_string(problem.Q.n_cols()) +
                                " cols but p has length " + std::to_string(L));
  if (problem.A.n_cols() != L)
    report.violations.push_back("dimension mismatch: A is " +
                                std::to_string(problem.A.n_cols()) +
                                " cols but p has length " + std::to_string(L));
  if (problem.A.n_rows() != M)
    report.violations.push_back("dimension mismatch: A has " +
                                std::to_string(problem.A.n_rows()) +
                                " rows but k has length " + std::to_string(M));
  if (static_cast<int>(problem.senses.size()) != M)
    report.violations.push_back(
        "dimension mismatch: senses has length " +
        std::to_string(problem.senses.size()) + " but k has length " +
        std::to_string(M));
  if (problem.box) {
    if (static_cast<int>(problem.box->lower.size()) != L ||
        static_cast<int>(problem.box->upper.size()) != L)
      report.violations.push_back("dimension mismatch: box bounds vs L");
    else
      for (int i = 0; i < L; ++i)
        if (!(problem.box->lower[i] <= problem.box->upper[i]))
          report.violations.push_back("box: lower > upper at index " +
                                      std::to_string(i));
  }
  if (!report.violations.empty()) return report;

  // Symmetry, entrywise on the union pattern.
  for (const Triplet& t : problem.Q.to_triplets()) {
    const double mirror = problem.Q.coeff(t.col, t.row);
    const double diff = std::abs(t.value - mirror);
    if (diff > kSymmetryTol * std::max(std::abs(t.value), std::abs(mirror)))
      report.violations.push_back("Q not symmetric at (" +
                                  std::to_string(t.row) + ", " +
                                  std::to_string(t.col) + ")");
  }
  if (!report.violations.empty()) return report;

  if (L > kPsdDenseLimit) {
    report.psd_skipped = true;
  } else if (L > 0 && problem.Q.nnz() > 0) {
    Eigen::MatrixXd dense(L, L);
    dense.setZero();
    for (const Triplet& t : problem.Q.to_triplets()) dense(t.row, t.col) = t.value;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense,
                                                      Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
    if (min_eig < -kPsdTol * norm)
      report.violations.push_back("Q not positive semidefinite: min eigenvalue " +
                                  std::to_string(min_eig));
  }
  return report;
}

double evaluate_cost(const QpProblem& problem, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != problem.L())
    throw std::invalid_argument("evaluate_cost: dimension mismatch");
  const std::vector<double> qx = spmv(problem.Q, x);
  double quad = 0.0, lin = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    quad += x[i] * qx[i];
    lin += problem.p[i] * x[i];
  }
  return 0.5 * quad + lin;
}

std::pair<double, std::vector<double>> evaluate_violation(
    const QpProblem& problem, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != problem.L())
    throw std::invalid_argument("evaluate_violation: dimension mismatch");
  std::vector<double> resid = spmv(problem.A, x);
  double sq = 0.0;
  for (int j = 0; j < problem.M(); ++j) {
    double r = resid[static_cast<std::size_t>(j)] - problem.k[static_cast<std::size_t>(j)];
    if (problem.senses[static_cast<std::size_t>(j)] == Sense::Ineq)
      r = std::max(r, 0.0);
    else
      r = std::abs(r);
    resid[static_cast<std::size_t>(j)] = r;
    sq += r * r;
  }
  return {std::sqrt(sq), std::move(resid)};
}

namespace {

OrderedJson matrix_to_json(const SparseMatrix& m) {
  OrderedJson rows = OrderedJson::array();
  OrderedJson cols = OrderedJson::array();
  OrderedJson vals = OrderedJson::array();
  for (const Triplet& t : m.to_triplets()) {
    rows.push_back(t.row);
    cols.push_back(t.col);
    vals.push_back(t.value);
  }
  return OrderedJson{{"rows", std::move(rows)},
                     {"cols", std::move(cols)},
                     {"vals", std::move(vals)}};
}

const OrderedJson& require_field(const OrderedJson& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end())
    throw ParseError(std::string("problem file: missing field \"") + name +
                     "\"");
  return *it;
}

SparseMatrix matrix_from_json(const OrderedJson& j, int n_rows, int n_cols,
                              const char* name) {
  const auto& rows = require_field(j, "rows");
  const auto& cols = require_field(j, "cols");
  const auto& vals = require_field(j, "vals");
  if (!rows.is_array() || !cols.is_array() || !vals.is_array() ||
      rows.size() != cols.size() || rows.size() != vals.size())
    throw ParseError(std::string("problem file: field \"") + name +
                     "\" must hold equal-length rows/cols/vals arrays");
  std::vector<Triplet> t(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    t[i] = {rows[i].get<int>(), cols[i].get<int>(), vals[i].get<double>()};
  try {
    return SparseMatrix::from_triplets(n_rows, n_cols, std::move(t));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("problem file: field \"") + name + "\": " +
                     e.what());
  }
}

std::vector<double> vector_from_json(const OrderedJson& j, const char* name) {
  if (!j.is_array())
    throw ParseError(std::string("problem file: field \"") + name +
                     "\" must be an array");
  std::vector<double> v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

std::string problem_to_json(const QpProblem& problem) {
  OrderedJson j;
  j["version"] = 1;
  j["L"] = problem.L();
  j["M"] = problem.M();
  j["Q"] = matrix_to_json(problem.Q);
  j["p"] = problem.p;
  j["A"] = matrix_to_json(problem.A);
  j["k"] = problem.k;
  OrderedJson senses = OrderedJson::array();
  for (Sense s : problem.senses)
    senses.push_back(s == Sense::Ineq ? "ineq" : "eq");
  j["senses"] = std::move(senses);
  if (problem.box)
    j["box"] = OrderedJson{{"lower", problem.box->lower},
                           {"upper", problem.box->upper}};
  else
    j["box"] = nullptr;
  return j.dump(2);
}

QpProblem problem_from_json(const std::string& text) {
  OrderedJson j;
  try {
    j = OrderedJson::parse(text);
  } catch (const OrderedJson::parse_error& e) {
    throw ParseError(std::string("problem file: ") + e.what());
  }
  try {
    const int version = require_field(j, "version").get<int>();
    if (version != 1)
      throw ParseError("problem file: unsupported schema version " +
                       std::to_string(version) + " (expected 1)");
    const int L = require_field(j, "L").get<int>();
    const int M = require_field(j, "M").get<int>();
    QpProblem p;
    p.Q = matrix_from_json(require_field(j, "Q"), L, L, "Q");
    p.p = vector_from_json(require_field(j, "p"), "p");
    p.A = matrix_from_json(require_field(j, "A"), M, L, "A");
    p.k = vector_from_json(require_field(j, "k"), "k");
    const auto& senses = require_field(j, "senses");
    if (!senses.is_array())
      throw ParseError("problem file: field \"senses\" must be an array");
    for (const auto& s : senses) {
      const std::string str = s.get<std::string>();
      if (str == "ineq")
        p.senses.push_back(Sense::Ineq);
      else if (str == "eq")
        p.senses.push_back(Sense::Eq);
      else
        throw ParseError("problem file: unknown sense \"" + str + "\"");
    }
    const auto& box = require_field(j, "box");
    if (!box.is_null())
      p.box = Box{vector_from_json(require_field(box, "lower"), "box.lower"),
                  vector_from_json(require_field(box, "upper"), "box.upper")};
    return p;
  } catch (const OrderedJson::exception& e) {
    throw ParseError(std::string("problem file: ") + e.what());
  }
}

QpProblem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("load_problem: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return problem_from_json(buf.str());
}

void save_problem(const QpProblem& problem,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("save_problem: cannot open " + path.string());
  out << problem_to_json(problem) << '\n';
}

}  // namespace evqp
