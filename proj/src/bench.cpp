#include "evqp/bench.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "evqp/precond.hpp"

namespace evqp {
namespace {

using OrderedJson = nlohmann::ordered_json;

constexpr double kRefConvTol = 1e-9;
constexpr std::int64_t kRefMinIters = 60000;

// ---------------------------------------------------------------------------
// JSON (de)serialization of the spec types.

const OrderedJson& require(const OrderedJson& j, const char* field) {
  const auto it = j.find(field);
  if (it == j.end())
    throw ParseError(std::string("missing field: ") + field);
  return *it;
}

OrderedJson generator_to_json(const GeneratorSpec& g) {
  return OrderedJson{{"n_states", g.n_states},
                     {"n_controls", g.n_controls},
                     {"horizon", g.horizon},
                     {"seed", g.seed},
                     {"eps", g.eps},
                     {"delta", g.delta}};
}

GeneratorSpec generator_from_json(const OrderedJson& j) {
  GeneratorSpec g;
  g.n_states = j.value("n_states", g.n_states);
  g.n_controls = j.value("n_controls", g.n_controls);
  g.horizon = j.value("horizon", g.horizon);
  g.seed = j.value("seed", g.seed);
  g.eps = j.value("eps", g.eps);
  g.delta = j.value("delta", g.delta);
  return g;
}

OrderedJson solver_to_json(const SolverSpec& s) {
  return OrderedJson{{"name", s.name},
                     {"mode", s.mode},
                     {"state_fmt", s.state_fmt.to_string()},
                     {"weight_bits", s.weight_bits},
                     {"alpha_period", s.alpha_period},
                     {"beta_period", s.beta_period},
                     {"event_threshold", s.event_threshold},
                     {"neurons_per_core", s.neurons_per_core}};
}

SolverSpec solver_from_json(const OrderedJson& j) {
  SolverSpec s;
  s.mode = j.value("mode", s.mode);
  s.name = j.value("name", s.mode);
  if (j.contains("state_fmt"))
    s.state_fmt = FxpFormat::parse(j.at("state_fmt").get<std::string>());
  s.weight_bits = j.value("weight_bits", s.weight_bits);
  s.alpha_period = j.value("alpha_period", s.alpha_period);
  s.beta_period = j.value("beta_period", s.beta_period);
  s.event_threshold = j.value("event_threshold", s.event_threshold);
  s.neurons_per_core = j.value("neurons_per_core", s.neurons_per_core);
  return s;
}

OrderedJson problem_spec_to_json(const ProblemSpec& p) {
  OrderedJson j{{"name", p.name}};
  if (p.generator)
    j["generator"] = generator_to_json(*p.generator);
  else
    j["path"] = p.path;
  return j;
}

ProblemSpec problem_spec_from_json(const OrderedJson& j) {
  ProblemSpec p;
  p.name = require(j, "name").get<std::string>();
  if (j.contains("generator"))
    p.generator = generator_from_json(j.at("generator"));
  if (j.contains("path")) p.path = j.at("path").get<std::string>();
  return p;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                          c == '_'
                      ? c
                      : '_');
  return out.empty() ? std::string("cell") : out;
}

std::string cell_filename(const BenchResult& r) {
  return sanitize(r.problem) + "__" + sanitize(r.solver) + "__rep" +
         std::to_string(r.repetition) + ".csv";
}

// ---------------------------------------------------------------------------
// Shared cell pipeline.

QpProblem materialize(const ProblemSpec& ps) {
  if (ps.generator) return tile(generate_random(*ps.generator));
  return load_problem(ps.path);
}

struct PreparedProblem {
  QpProblem original;
  RuizResult rr;
  SpectralEstimates est;
  HyperParams hp;
  bool ref_converged = false;
  std::int64_t ref_iterations = 0;
  double fstar = 0.0;
};

PreparedProblem prepare(QpProblem original, std::uint64_t seed,
                        std::int64_t budget) {
  PreparedProblem pp;
  pp.original = std::move(original);
  pp.rr = ruiz_equilibrate(pp.original);
  pp.est = estimate_spectral(pp.rr.problem, seed);
  pp.hp = estimate_hyperparams(pp.rr.problem, seed);

  // The gap denominator: the float primal-dual reference on the scaled
  // problem, constant schedule, run to 1e-9 relative cost change.
  HyperParams ref = pp.hp;
  ref.alpha_decay_period = 0;
  ref.beta_growth_period = 0;
  ref.conv_tol = kRefConvTol;
  ref.max_iters = std::max<std::int64_t>(kRefMinIters, 20 * budget);
  try {
    const auto [sol, trace] = solve_pipg(pp.rr.problem, ref);
    pp.ref_converged = sol.converged;
    pp.ref_iterations = sol.iterations;
    if (sol.converged) {
      const std::vector<double> xo = unscale_solution(sol.x, pp.rr.scaling);
      pp.fstar = evaluate_cost(pp.original, xo);
    }
  } catch (const DivergenceError&) {
    pp.ref_converged = false;
  }
  return pp;
}

double signed_gap(double f, double fstar) {
  if (std::abs(fstar) < 1e-12 && std::abs(f - fstar) < 1e-9) return 0.0;
  return (f - fstar) / std::abs(fstar);
}

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

struct CellSeries {
  std::vector<double> cost;       // original frame, one per record
  std::vector<double> violation;  // raw L2 residual, original frame
  std::vector<double> x_final;    // original frame
  EventStats stats;
  PartitionReport part;
  bool diverged = false;
};

CellSeries run_float_series(const PreparedProblem& pp, const SolverSpec& ss,
                            std::int64_t budget) {
  HyperParams hp = pp.hp;
  hp.alpha_decay_period = ss.alpha_period;
  hp.beta_growth_period = ss.beta_period;
  hp.max_iters = budget;
  hp.conv_tol = 0.0;  // spend the whole budget

  CellSeries cs;
  std::pair<Solution, ConvergenceTrace> run;
  try {
    if (ss.mode == "float-gd")
      run = solve_gd(pp.rr.problem, hp, 1);
    else if (ss.mode == "float-gdcc")
      run = solve_gdcc(pp.rr.problem, hp, 1);
    else
      run = solve_pipg(pp.rr.problem, hp, 1);
  } catch (const DivergenceError&) {
    cs.diverged = true;
    return cs;
  }
  for (const std::vector<double>& snap : run.second.snapshots) {
    const std::vector<double> xo = unscale_solution(snap, pp.rr.scaling);
    cs.cost.push_back(evaluate_cost(pp.original, xo));
    cs.violation.push_back(evaluate_violation(pp.original, xo).first);
  }
  cs.x_final = unscale_solution(run.first.x, pp.rr.scaling);
  return cs;
}

CellSeries run_fxp_series(const PreparedProblem& pp, const SolverSpec& ss,
                          std::int64_t budget,
                          const std::vector<double>* warm_x0_scaled) {
  NetworkConfig cfg;
  cfg.state_fmt = ss.state_fmt;
  cfg.weight_bits = ss.weight_bits;
  cfg.alpha_period = ss.alpha_period;
  cfg.beta_period = ss.beta_period;
  cfg.max_iters = budget;
  cfg.neurons_per_core = ss.neurons_per_core;
  cfg.event_threshold = ss.event_threshold;

  Network net = build_network(pp.rr.problem, pp.hp, cfg);
  net.set_eval_frame(pp.original, pp.rr.scaling);
  if (warm_x0_scaled) net.warm_start(*warm_x0_scaled);
  SolveOutput so = solve(net, budget);

  CellSeries cs;
  cs.cost.reserve(so.trace.records.size());
  cs.violation.reserve(so.trace.records.size());
  for (const TraceRecord& rec : so.trace.records) {
    cs.cost.push_back(rec.cost);
    cs.violation.push_back(rec.violation);
  }
  cs.x_final = so.solution.x;
  cs.stats = std::move(so.stats);
  cs.part = partition(net, ss.neurons_per_core);
  return cs;
}

BenchResult run_cell(const PreparedProblem& pp, const OrderedJson& problem_meta,
                     const std::string& problem_name, const SolverSpec& ss,
                     const BenchSpec& spec, int repetition,
                     const std::vector<double>* warm_x0_scaled) {
  BenchResult r;
  r.problem = problem_name;
  r.solver = ss.name;
  r.repetition = repetition;
  r.L = pp.original.L();
  r.M = pp.original.M();
  r.usable = pp.ref_converged;
  r.fstar = pp.fstar;

  OrderedJson meta{{"version", 1},
                   {"problem", problem_meta},
                   {"problem_name", problem_name},
                   {"solver", solver_to_json(ss)},
                   {"budget", spec.budget},
                   {"gap_target", spec.gap_target},
                   {"repetition", repetition},
                   {"seed", spec.seed}};
  meta["precondition"] = OrderedJson{{"method", "ruiz"},
                                     {"iterations", pp.rr.iterations},
                                     {"converged", pp.rr.converged},
                                     {"cost_scale", pp.rr.scaling.c}};
  meta["hyperparams"] = OrderedJson{{"alpha0", pp.hp.alpha0},
                                    {"beta0", pp.hp.beta0},
                                    {"lambda_max", pp.est.lambda_max},
                                    {"sigma_max", pp.est.sigma_max}};
  meta["reference"] = OrderedJson{
      {"note",
       "gap denominator is the float primal-dual solver on the scaled "
       "problem, constant schedule, run to 1e-9 relative cost change"},
      {"mode", "float-pipg"},
      {"conv_tol", kRefConvTol},
      {"max_iters", std::max<std::int64_t>(kRefMinIters, 20 * spec.budget)},
      {"converged", pp.ref_converged},
      {"iterations", pp.ref_iterations},
      {"fstar", pp.fstar}};
  if (warm_x0_scaled) meta["warm_x0_scaled"] = *warm_x0_scaled;

  if (!pp.ref_converged) {
    r.metadata_json = meta.dump(2);
    return r;
  }

  const auto t0 = std::chrono::steady_clock::now();
  const CellSeries cs =
      ss.mode == "fxp" ? run_fxp_series(pp, ss, spec.budget, warm_x0_scaled)
                       : run_float_series(pp, ss, spec.budget);
  const auto t1 = std::chrono::steady_clock::now();
  r.wall_time_s = std::chrono::duration<double>(t1 - t0).count();

  if (cs.diverged) {
    meta["diverged"] = true;
    r.metadata_json = meta.dump(2);
    return r;
  }

  r.stats = cs.stats;
  r.partition = cs.part;
  r.x_final = cs.x_final;

  const double xnorm = std::max(l2_norm(cs.x_final), 1e-12);
  r.trace.resize(cs.cost.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < cs.cost.size(); ++t) {
    TracePoint& tp = r.trace[t];
    tp.iter = static_cast<std::int64_t>(t);
    tp.cost = cs.cost[t];
    tp.gap = signed_gap(cs.cost[t], pp.fstar);
    tp.violation = cs.violation[t] / xnorm;
    if (t >= 1 && t - 1 < cs.stats.per_iteration.size()) {
      const IterationStats& is = cs.stats.per_iteration[t - 1];
      tp.messages = is.messages_sent;
      tp.mac_ops = is.mac_ops;
      tp.saturations = is.saturations;
    }
    best = std::min(best, std::abs(tp.gap));
    if (!r.reached && tp.gap <= spec.gap_target &&
        tp.violation <= spec.gap_target) {
      r.reached = true;
      r.iterations_to_gap = tp.iter;
    }
  }
  if (!r.trace.empty()) {
    r.terminal_gap = r.trace.back().gap;
    r.terminal_violation = r.trace.back().violation;
    r.best_abs_gap = best;
  }
  r.metadata_json = meta.dump(2);
  return r;
}

double mean_or_zero(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double e : v) s += e;
  return s / static_cast<double>(v.size());
}

// Least-squares slope of log(y) vs log(x) over positive pairs.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y,
                    int* n_used = nullptr) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  if (n_used) *n_used = static_cast<int>(lx.size());
  if (lx.size() < 2) return 0.0;
  const double mx = mean_or_zero(lx), my = mean_or_zero(ly);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return den > 0.0 ? num / den : 0.0;
}

std::uint64_t perturb_seed(std::uint64_t base, int chain, int link) {
  // splitmix-style mix keeps chains and links decorrelated
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull *
                               (static_cast<std::uint64_t>(chain) * 1000003ull +
                                static_cast<std::uint64_t>(link));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec plumbing.

void validate_spec(const BenchSpec& spec) {
  if (spec.problems.empty())
    throw std::invalid_argument("bench spec: problems must be nonempty");
  if (spec.solvers.empty())
    throw std::invalid_argument("bench spec: solvers must be nonempty");
  if (spec.budget < 1)
    throw std::invalid_argument("bench spec: budget must be >= 1");
  if (!(spec.gap_target > 0.0) || !(spec.gap_target < 1.0))
    throw std::invalid_argument("bench spec: gap_target must be in (0, 1)");
  if (spec.repetitions < 1)
    throw std::invalid_argument("bench spec: repetitions must be >= 1");

  std::set<std::string> names;
  for (const ProblemSpec& p : spec.problems) {
    if (p.name.empty())
      throw std::invalid_argument("bench spec: problem name must be nonempty");
    if (!names.insert(p.name).second)
      throw std::invalid_argument("bench spec: duplicate problem name " +
                                  p.name);
    if (p.generator && !p.path.empty())
      throw std::invalid_argument("bench spec: problem " + p.name +
                                  " must have exactly one of path/generator");
    if (!p.generator && p.path.empty())
      throw std::invalid_argument("bench spec: problem " + p.name +
                                  " needs a path or a generator");
  }
  names.clear();
  for (const SolverSpec& s : spec.solvers) {
    if (s.name.empty())
      throw std::invalid_argument("bench spec: solver name must be nonempty");
    if (!names.insert(s.name).second)
      throw std::invalid_argument("bench spec: duplicate solver name " +
                                  s.name);
    if (s.mode != "float-gd" && s.mode != "float-gdcc" &&
        s.mode != "float-pipg" && s.mode != "fxp")
      throw std::invalid_argument("bench spec: unknown mode " + s.mode);
    check_format(s.state_fmt);
    if (s.weight_bits < 2 || s.weight_bits > 32)
      throw std::invalid_argument("bench spec: weight_bits out of range");
    if (s.alpha_period < 0 || s.beta_period < 0)
      throw std::invalid_argument("bench spec: schedule periods must be >= 0");
    if (s.event_threshold < 0)
      throw std::invalid_argument("bench spec: event_threshold must be >= 0");
    if (s.neurons_per_core < 1)
      throw std::invalid_argument("bench spec: neurons_per_core must be >= 1");
  }
}

BenchSpec bench_spec_from_json(const std::string& text) {
  OrderedJson j;
  try {
    j = OrderedJson::parse(text);
  } catch (const OrderedJson::parse_error& e) {
    throw ParseError(std::string("bench spec: invalid JSON: ") + e.what());
  }
  if (require(j, "version").get<int>() != 1)
    throw ParseError("bench spec: unsupported version");
  BenchSpec spec;
  for (const auto& pj : require(j, "problems"))
    spec.problems.push_back(problem_spec_from_json(pj));
  for (const auto& sj : require(j, "solvers"))
    spec.solvers.push_back(solver_from_json(sj));
  spec.budget = j.value("budget", spec.budget);
  spec.gap_target = j.value("gap_target", spec.gap_target);
  spec.repetitions = j.value("repetitions", spec.repetitions);
  spec.seed = j.value("seed", spec.seed);
  spec.output_dir = j.value("output_dir", spec.output_dir);
  validate_spec(spec);
  return spec;
}

std::string bench_spec_to_json(const BenchSpec& spec) {
  OrderedJson j{{"version", 1}};
  j["problems"] = OrderedJson::array();
  for (const ProblemSpec& p : spec.problems)
    j["problems"].push_back(problem_spec_to_json(p));
  j["solvers"] = OrderedJson::array();
  for (const SolverSpec& s : spec.solvers)
    j["solvers"].push_back(solver_to_json(s));
  j["budget"] = spec.budget;
  j["gap_target"] = spec.gap_target;
  j["repetitions"] = spec.repetitions;
  j["seed"] = spec.seed;
  j["output_dir"] = spec.output_dir;
  return j.dump(2);
}

BenchSpec load_bench_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("load_bench_spec: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return bench_spec_from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Studies.

std::vector<BenchResult> run_gap_study(const BenchSpec& spec) {
  validate_spec(spec);
  std::vector<BenchResult> results;
  for (const ProblemSpec& ps : spec.problems) {
    const PreparedProblem pp =
        prepare(materialize(ps), spec.seed, spec.budget);
    const OrderedJson pmeta = problem_spec_to_json(ps);
    for (const SolverSpec& ss : spec.solvers)
      for (int rep = 0; rep < spec.repetitions; ++rep)
        results.push_back(
            run_cell(pp, pmeta, ps.name, ss, spec, rep, nullptr));
  }
  if (!spec.output_dir.empty())
    write_outputs(spec.output_dir, spec, results,
                  R"({"study":"gap"})");
  return results;
}

ScalingStudyResult run_scaling_study(const BenchSpec& spec) {
  BenchSpec inner = spec;
  inner.output_dir.clear();
  ScalingStudyResult out;
  out.cells = run_gap_study(inner);

  std::vector<double> L, mac_rate, macs_to_target, part_cost;
  for (const BenchResult& r : out.cells) {
    if (r.repetition != 0 || !r.usable || r.trace.empty()) continue;
    bool is_fxp = false;
    for (const SolverSpec& s : spec.solvers)
      if (s.name == r.solver) is_fxp = s.mode == "fxp";
    if (!is_fxp) continue;
    const auto iters = static_cast<double>(r.trace.size() - 1);
    if (iters <= 0) continue;
    L.push_back(static_cast<double>(r.L));
    mac_rate.push_back(static_cast<double>(r.stats.mac_ops) / iters);
    part_cost.push_back(r.partition.per_iteration_cost);
    double to_target = 0.0;
    if (r.reached)
      for (const TracePoint& tp : r.trace) {
        to_target += static_cast<double>(tp.mac_ops);
        if (tp.iter >= r.iterations_to_gap) break;
      }
    macs_to_target.push_back(to_target);
  }
  out.slope_mac_per_iteration = loglog_slope(L, mac_rate, &out.fit_points);
  out.slope_macs_to_target = loglog_slope(L, macs_to_target);
  out.slope_partition_cost = loglog_slope(L, part_cost);

  if (!spec.output_dir.empty()) {
    OrderedJson extras{{"study", "scaling"},
                       {"slope_mac_per_iteration", out.slope_mac_per_iteration},
                       {"slope_macs_to_target", out.slope_macs_to_target},
                       {"slope_partition_cost", out.slope_partition_cost},
                       {"fit_points", out.fit_points}};
    write_outputs(spec.output_dir, spec, out.cells, extras.dump());
  }
  return out;
}

WarmstartStudyResult run_warmstart_study(const BenchSpec& spec,
                                         double perturb_magnitude,
                                         int chain_length) {
  validate_spec(spec);
  if (chain_length < 2)
    throw std::invalid_argument("warm-start study: chain length must be >= 2");
  if (perturb_magnitude < 0.0)
    throw std::invalid_argument("warm-start study: magnitude must be >= 0");
  const SolverSpec* fxp = nullptr;
  for (const SolverSpec& s : spec.solvers)
    if (s.mode == "fxp" && !fxp) fxp = &s;
  if (!fxp)
    throw std::invalid_argument(
        "warm-start study: spec needs at least one fxp solver");

  WarmstartStudyResult out;
  int chain_idx = 0;
  for (const ProblemSpec& ps : spec.problems) {
    if (!ps.generator)
      throw std::invalid_argument(
          "warm-start study: problem " + ps.name +
          " must be generator-backed (chains perturb the stage model)");
    StageModel model = generate_random(*ps.generator);
    OrderedJson perturb_chain = OrderedJson::array();
    std::vector<double> prev_x;  // original frame, warm lineage
    std::vector<double> warm_iters, cold_iters;

    for (int link = 0; link < chain_length; ++link) {
      if (link > 0) {
        const std::uint64_t seed =
            perturb_seed(ps.generator->seed, chain_idx, link);
        model = perturb(model, perturb_magnitude, seed);
        perturb_chain.push_back(
            OrderedJson{{"magnitude", perturb_magnitude}, {"seed", seed}});
      }
      const PreparedProblem pp =
          prepare(tile(model), spec.seed, spec.budget);

      OrderedJson pmeta = problem_spec_to_json(ps);
      pmeta["perturb_chain"] = perturb_chain;
      const std::string link_name =
          ps.name + "_link" + std::to_string(link);

      // Cold arm: zeros. Warm arm: previous link's solution mapped into
      // this link's scaled frame.
      BenchResult cold = run_cell(pp, pmeta, link_name, *fxp, spec, 0, nullptr);
      cold.solver = fxp->name + "_cold";
      std::vector<double> x0_scaled;
      const bool have_warm = link > 0 && !prev_x.empty();
      if (have_warm) {
        x0_scaled.resize(prev_x.size());
        for (std::size_t i = 0; i < prev_x.size(); ++i)
          x0_scaled[i] = prev_x[i] / pp.rr.scaling.d[i];
      }
      BenchResult warm = run_cell(pp, pmeta, link_name, *fxp, spec, 0,
                                  have_warm ? &x0_scaled : nullptr);
      warm.solver = fxp->name + "_warm";

      WarmstartLink rec;
      rec.chain = chain_idx;
      rec.link = link;
      rec.usable = pp.ref_converged;
      rec.warm_reached = warm.reached;
      rec.cold_reached = cold.reached;
      rec.warm_iterations = warm.iterations_to_gap;
      rec.cold_iterations = cold.iterations_to_gap;
      out.links.push_back(rec);

      if (rec.usable && link >= 1) {
        warm_iters.push_back(static_cast<double>(
            warm.reached ? warm.iterations_to_gap : spec.budget));
        cold_iters.push_back(static_cast<double>(
            cold.reached ? cold.iterations_to_gap : spec.budget));
      }

      // Advance the warm lineage from the warm arm's terminal iterate.
      if (rec.usable && !warm.x_final.empty()) prev_x = warm.x_final;
      out.cells.push_back(std::move(cold));
      out.cells.push_back(std::move(warm));
    }
    out.warm_mean_per_chain.push_back(mean_or_zero(warm_iters));
    out.cold_mean_per_chain.push_back(mean_or_zero(cold_iters));
    ++chain_idx;
  }

  if (!spec.output_dir.empty()) {
    OrderedJson extras{{"study", "warmstart"},
                       {"perturb_magnitude", perturb_magnitude},
                       {"chain_length", chain_length},
                       {"warm_mean_per_chain", out.warm_mean_per_chain},
                       {"cold_mean_per_chain", out.cold_mean_per_chain}};
    OrderedJson links = OrderedJson::array();
    for (const WarmstartLink& l : out.links)
      links.push_back(OrderedJson{{"chain", l.chain},
                                  {"link", l.link},
                                  {"usable", l.usable},
                                  {"warm_reached", l.warm_reached},
                                  {"cold_reached", l.cold_reached},
                                  {"warm_iterations", l.warm_iterations},
                                  {"cold_iterations", l.cold_iterations}});
    extras["links"] = links;
    write_outputs(spec.output_dir, spec, out.cells, extras.dump());
  }
  return out;
}

BenchResult replay_cell(const std::string& metadata_json) {
  OrderedJson meta;
  try {
    meta = OrderedJson::parse(metadata_json);
  } catch (const OrderedJson::parse_error& e) {
    throw ParseError(std::string("replay: invalid metadata JSON: ") + e.what());
  }
  if (require(meta, "version").get<int>() != 1)
    throw ParseError("replay: unsupported metadata version");

  const OrderedJson& pj = require(meta, "problem");
  ProblemSpec ps = problem_spec_from_json(pj);
  QpProblem original;
  if (ps.generator) {
    StageModel model = generate_random(*ps.generator);
    if (pj.contains("perturb_chain"))
      for (const auto& step : pj.at("perturb_chain"))
        model = perturb(model, require(step, "magnitude").get<double>(),
                        require(step, "seed").get<std::uint64_t>());
    original = tile(model);
  } else {
    original = load_problem(ps.path);
  }

  BenchSpec spec;
  spec.problems.push_back(ps);
  spec.solvers.push_back(solver_from_json(require(meta, "solver")));
  spec.budget = require(meta, "budget").get<std::int64_t>();
  spec.gap_target = require(meta, "gap_target").get<double>();
  spec.seed = require(meta, "seed").get<std::uint64_t>();

  const PreparedProblem pp = prepare(std::move(original), spec.seed, spec.budget);
  std::vector<double> warm;
  const bool have_warm = meta.contains("warm_x0_scaled");
  if (have_warm) warm = meta.at("warm_x0_scaled").get<std::vector<double>>();
  return run_cell(pp, pj, require(meta, "problem_name").get<std::string>(),
                  spec.solvers[0], spec,
                  require(meta, "repetition").get<int>(),
                  have_warm ? &warm : nullptr);
}

// ---------------------------------------------------------------------------
// Output files.

void write_trace_csv(const std::filesystem::path& path, const BenchResult& r) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write trace CSV " + path.string());
  out << "iter,cost,gap,violation,messages,mac_ops,saturations\n";
  char buf[512];
  for (const TracePoint& tp : r.trace) {
    std::snprintf(buf, sizeof buf,
                  "%lld,%.17g,%.17g,%.17g,%lld,%lld,%lld\n",
                  static_cast<long long>(tp.iter), tp.cost, tp.gap,
                  tp.violation, static_cast<long long>(tp.messages),
                  static_cast<long long>(tp.mac_ops),
                  static_cast<long long>(tp.saturations));
    out << buf;
  }
}

std::vector<TracePoint> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot read trace CSV " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line != "iter,cost,gap,violation,messages,mac_ops,saturations")
    throw ParseError("trace CSV " + path.string() + ": bad header");
  std::vector<TracePoint> pts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TracePoint tp;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    long long iter = 0, messages = 0, macs = 0, sats = 0;
    if (!(ss >> iter >> tp.cost >> tp.gap >> tp.violation >> messages >>
          macs >> sats))
      throw ParseError("trace CSV " + path.string() + ": bad row: " + line);
    tp.iter = iter;
    tp.messages = messages;
    tp.mac_ops = macs;
    tp.saturations = sats;
    pts.push_back(tp);
  }
  return pts;
}

std::string summary_json(const BenchSpec& spec,
                         const std::vector<BenchResult>& results,
                         const std::string& extras_json) {
  OrderedJson j{{"version", 1},
                {"budget", spec.budget},
                {"gap_target", spec.gap_target},
                {"repetitions", spec.repetitions},
                {"seed", spec.seed}};
  j["reference"] = OrderedJson{
      {"note",
       "gap denominator is the float primal-dual solver on the scaled "
       "problem, constant schedule, run to 1e-9 relative cost change"},
      {"mode", "float-pipg"},
      {"conv_tol", kRefConvTol}};

  OrderedJson cells = OrderedJson::array();
  std::vector<double> reached_iters;
  int n_reached = 0;
  for (const BenchResult& r : results) {
    OrderedJson c{{"problem", r.problem},
                  {"solver", r.solver},
                  {"repetition", r.repetition},
                  {"L", r.L},
                  {"M", r.M},
                  {"usable", r.usable},
                  {"reached", r.reached},
                  {"iterations_to_gap", r.iterations_to_gap},
                  {"terminal_gap", r.terminal_gap},
                  {"best_abs_gap", r.best_abs_gap},
                  {"terminal_violation", r.terminal_violation},
                  {"fstar", r.fstar},
                  {"wall_time_s", r.wall_time_s},
                  {"trace_csv", cell_filename(r)}};
    c["totals"] = OrderedJson{{"messages", r.stats.messages_sent},
                              {"mac_ops", r.stats.mac_ops},
                              {"fanout_mac_ops", r.stats.fanout_mac_ops},
                              {"neuron_updates", r.stats.neuron_updates},
                              {"saturations", r.stats.saturations}};
    c["partition"] = OrderedJson{
        {"n_cores", r.partition.n_cores},
        {"per_iteration_cost", r.partition.per_iteration_cost},
        {"sync_overhead", r.partition.sync_overhead},
        {"total_cost", r.partition.total_cost},
        {"speedup", r.partition.speedup}};
    cells.push_back(std::move(c));
    if (r.reached) {
      ++n_reached;
      reached_iters.push_back(static_cast<double>(r.iterations_to_gap));
    }
  }
  j["cells"] = std::move(cells);
  j["aggregates"] =
      OrderedJson{{"n_cells", results.size()},
                  {"n_reached", n_reached},
                  {"mean_iterations_to_gap", mean_or_zero(reached_iters)}};

  const OrderedJson extras = OrderedJson::parse(extras_json);
  for (const auto& [key, value] : extras.items()) j[key] = value;
  return j.dump(2);
}

void write_outputs(const std::filesystem::path& dir, const BenchSpec& spec,
                   const std::vector<BenchResult>& results,
                   const std::string& extras_json) {
  std::filesystem::create_directories(dir);
  for (const BenchResult& r : results)
    write_trace_csv(dir / cell_filename(r), r);
  std::ofstream out(dir / "summary.json");
  if (!out)
    throw std::runtime_error("cannot write summary.json in " + dir.string());
  out << summary_json(spec, results, extras_json) << "\n";
  // Per-cell replay metadata sits beside the traces.
  OrderedJson meta = OrderedJson::array();
  for (const BenchResult& r : results)
    meta.push_back(r.metadata_json.empty()
                       ? OrderedJson()
                       : OrderedJson::parse(r.metadata_json));
  std::ofstream mout(dir / "metadata.json");
  mout << meta.dump(2) << "\n";
}

}  // namespace evqp
