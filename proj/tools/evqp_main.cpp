#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "evqp/bench.hpp"
#include "evqp/mpcgen.hpp"
#include "evqp/neurosolver.hpp"
#include "evqp/precond.hpp"
#include "evqp/problem.hpp"
#include "evqp/reference.hpp"

namespace {

using OrderedJson = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct SolveOptions {
  std::string problem_path;
  std::string mode = "float-pipg";
  std::string fmt = "Q17.6";
  int weight_bits = 8;
  std::int64_t iters = 1000;
  int alpha_period = 100;
  int beta_period = 100;
  bool precondition = false;
  std::string out;
};

int cmd_solve(const SolveOptions& opt) {
  const evqp::QpProblem original = evqp::load_problem(opt.problem_path);
  const evqp::ValidationReport report = evqp::validate(original);
  if (!report.ok()) {
    for (const std::string& v : report.violations)
      std::cerr << "invalid problem: " << v << "\n";
    return kExitValidation;
  }
  if (opt.iters < 1) throw std::invalid_argument("--iters must be >= 1");

  evqp::QpProblem work = original;
  evqp::Scaling scaling;
  if (opt.precondition) {
    evqp::RuizResult rr = evqp::ruiz_equilibrate(original);
    work = std::move(rr.problem);
    scaling = std::move(rr.scaling);
  } else {
    scaling.d.assign(static_cast<std::size_t>(original.L()), 1.0);
    scaling.e.assign(static_cast<std::size_t>(original.M()), 1.0);
  }

  evqp::HyperParams hp = evqp::estimate_hyperparams(work);
  hp.alpha_decay_period = opt.alpha_period;
  hp.beta_growth_period = opt.beta_period;
  hp.max_iters = opt.iters;

  evqp::Solution sol;
  if (opt.mode == "float-gd") {
    sol = evqp::solve_gd(work, hp).first;
  } else if (opt.mode == "float-gdcc") {
    sol = evqp::solve_gdcc(work, hp).first;
  } else if (opt.mode == "float-pipg") {
    sol = evqp::solve_pipg(work, hp).first;
  } else if (opt.mode == "fxp") {
    evqp::NetworkConfig cfg;
    cfg.state_fmt = evqp::FxpFormat::parse(opt.fmt);
    cfg.weight_bits = opt.weight_bits;
    cfg.alpha_period = opt.alpha_period;
    cfg.beta_period = opt.beta_period;
    cfg.max_iters = opt.iters;
    evqp::Network net = evqp::build_network(work, hp, cfg);
    net.set_eval_frame(original, scaling);
    sol = evqp::solve(net, opt.iters).solution;
  } else {
    throw std::invalid_argument("unknown --mode " + opt.mode);
  }

  // Map float solutions back to the original frame; fxp solutions are
  // already there via the eval frame.
  std::vector<double> x = sol.x;
  if (opt.mode != "fxp" && opt.precondition)
    x = evqp::unscale_solution(x, scaling);
  const double cost = evqp::evaluate_cost(original, x);
  const double violation = evqp::evaluate_violation(original, x).first;

  OrderedJson out{{"version", 1},
                  {"mode", opt.mode},
                  {"preconditioned", opt.precondition},
                  {"iterations", sol.iterations},
                  {"converged", sol.converged},
                  {"cost", cost},
                  {"violation", violation}};
  std::cout << out.dump(2) << "\n";
  if (!opt.out.empty()) {
    out["x"] = x;
    std::ofstream f(opt.out);
    if (!f) throw std::runtime_error("cannot write " + opt.out);
    f << out.dump(2) << "\n";
  }
  return kExitOk;
}

struct GenerateOptions {
  int horizon = 5;
  int states = 24;
  int controls = 24;
  std::uint64_t seed = 0;
  std::string out = ".";
};

int cmd_generate(const GenerateOptions& opt) {
  if (opt.horizon < 1 || opt.states < 1 || opt.controls < 1)
    throw std::invalid_argument("--horizon/--states/--controls must be >= 1");

  evqp::GeneratorSpec gs;
  gs.horizon = opt.horizon;
  gs.n_states = opt.states;
  gs.n_controls = opt.controls;
  gs.seed = opt.seed;

  const evqp::StageModel model = evqp::generate_random(gs);
  const evqp::QpProblem problem = evqp::tile(model);
  const evqp::ResourceCount rc =
      evqp::count_resources(gs.n_states, gs.n_controls, gs.horizon);
  const evqp::SpectralEstimates est = evqp::estimate_spectral(problem);

  fs::create_directories(opt.out);
  const std::string stem = "mpc_N" + std::to_string(gs.horizon) + "_s" +
                           std::to_string(gs.seed);
  const fs::path problem_path = fs::path(opt.out) / (stem + ".json");
  evqp::save_problem(problem, problem_path);

  OrderedJson manifest{
      {"version", 1},
      {"problem_file", stem + ".json"},
      {"seed", gs.seed},
      {"horizon", gs.horizon},
      {"n_states", gs.n_states},
      {"n_controls", gs.n_controls},
      {"L", problem.L()},
      {"M", problem.M()},
      {"n_neurons_decision", rc.n_neurons_decision},
      {"n_neurons_total", rc.n_neurons_total},
      {"n_synapses", rc.n_synapses},
      {"condition", OrderedJson{{"lambda_max", est.lambda_max},
                                {"sigma_max", est.sigma_max}}}};
  std::ofstream mf(fs::path(opt.out) / (stem + ".manifest.json"));
  if (!mf) throw std::runtime_error("cannot write manifest in " + opt.out);
  mf << manifest.dump(2) << "\n";
  std::cout << "wrote " << problem_path.string() << "\n";
  return kExitOk;
}

struct BenchOptions {
  std::string spec_path;
  std::string out;
};

int cmd_bench(const BenchOptions& opt) {
  evqp::BenchSpec spec = evqp::load_bench_spec(opt.spec_path);
  if (!opt.out.empty()) spec.output_dir = opt.out;
  if (spec.output_dir.empty()) spec.output_dir = "bench_out";

  // Study selection and study-specific knobs live in the spec file.
  std::ifstream in(opt.spec_path);
  OrderedJson j = OrderedJson::parse(std::string(
      std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
  const std::string study = j.value("study", std::string("gap"));

  if (study == "gap") {
    const auto results = evqp::run_gap_study(spec);
    std::cout << "gap study: " << results.size() << " cells -> "
              << spec.output_dir << "\n";
  } else if (study == "scaling") {
    const auto res = evqp::run_scaling_study(spec);
    std::cout << "scaling study: " << res.cells.size()
              << " cells, mac/iter slope " << res.slope_mac_per_iteration
              << " -> " << spec.output_dir << "\n";
  } else if (study == "warmstart") {
    const double magnitude = j.value("perturb_magnitude", 0.01);
    const int chain_length = j.value("chain_length", 10);
    const auto res =
        evqp::run_warmstart_study(spec, magnitude, chain_length);
    std::cout << "warm-start study: " << res.links.size() << " links -> "
              << spec.output_dir << "\n";
  } else {
    throw std::invalid_argument("unknown study " + study);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-driven fixed-point QP solver toolkit"};
  app.require_subcommand(1);

  SolveOptions so;
  CLI::App* solve = app.add_subcommand("solve", "Solve a problem JSON file");
  solve->add_option("problem", so.problem_path, "problem JSON path")
      ->required();
  solve->add_option("--mode", so.mode,
                    "float-gd | float-gdcc | float-pipg | fxp");
  solve->add_option("--fmt", so.fmt, "fixed-point state format, e.g. Q17.6");
  solve->add_option("--weight-bits", so.weight_bits, "weight bits (fxp)");
  solve->add_option("--iters", so.iters, "iteration budget");
  solve->add_option("--alpha-period", so.alpha_period,
                    "alpha halving period (0 disables)");
  solve->add_option("--beta-period", so.beta_period,
                    "beta doubling period (0 disables)");
  solve->add_flag("--precondition", so.precondition,
                  "Ruiz-equilibrate before solving");
  solve->add_option("--out", so.out, "write solution JSON here");

  GenerateOptions go;
  CLI::App* generate =
      app.add_subcommand("generate", "Generate an MPC problem file");
  generate->add_option("--horizon", go.horizon, "MPC horizon N");
  generate->add_option("--states", go.states, "state dimension");
  generate->add_option("--controls", go.controls, "control dimension");
  generate->add_option("--seed", go.seed, "generator seed");
  generate->add_option("--out", go.out, "output directory");

  BenchOptions bo;
  CLI::App* bench = app.add_subcommand("bench", "Run a benchmark spec");
  bench->add_option("spec", bo.spec_path, "bench spec JSON path")->required();
  bench->add_option("--out", bo.out, "output directory (overrides spec)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exits 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the error and usage
    return kExitValidation;
  }

  try {
    if (solve->parsed()) return cmd_solve(so);
    if (generate->parsed()) return cmd_generate(go);
    return cmd_bench(bo);
  } catch (const evqp::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const evqp::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
