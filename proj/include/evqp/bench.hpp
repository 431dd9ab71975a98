#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evqp/fxp.hpp"
#include "evqp/mpcgen.hpp"
#include "evqp/neurosolver.hpp"
#include "evqp/problem.hpp"
#include "evqp/reference.hpp"

namespace evqp {

/// One solver column of the benchmark matrix. Modes: "float-gd",
/// "float-gdcc", "float-pipg", "fxp". The fixed-point fields are ignored
/// by the float modes.
struct SolverSpec {
  std::string name = "fxp";
  std::string mode = "fxp";
  FxpFormat state_fmt{24, 6};
  int weight_bits = 8;
  int alpha_period = 100;
  int beta_period = 100;
  std::int64_t event_threshold = 0;
  int neurons_per_core = 8192;
};

/// One problem row: a problem JSON file, or a generator spec expanded at
/// run time (deterministic per seed).
struct ProblemSpec {
  std::string name;
  std::string path;
  std::optional<GeneratorSpec> generator;
};

struct BenchSpec {
  std::vector<ProblemSpec> problems;
  std::vector<SolverSpec> solvers;
  std::int64_t budget = 500;
  double gap_target = 0.08;
  int repetitions = 1;
  std::uint64_t seed = 1234;  // hyperparameter-estimation seed
  std::string output_dir;     // empty: results are returned, not written
};

/// Throws std::invalid_argument naming the offending field.
void validate_spec(const BenchSpec& spec);

BenchSpec bench_spec_from_json(const std::string& text);
std::string bench_spec_to_json(const BenchSpec& spec);
BenchSpec load_bench_spec(const std::filesystem::path& path);

/// One row of a per-iteration trace CSV. Costs and violations are in the
/// original problem frame; violation is normalized by the L2 norm of the
/// final iterate. Event columns are zero for float solvers.
struct TracePoint {
  std::int64_t iter = 0;
  double cost = 0.0;
  double gap = 0.0;  // signed relative gap vs. the reference optimum
  double violation = 0.0;
  std::int64_t messages = 0;
  std::int64_t mac_ops = 0;
  std::int64_t saturations = 0;
};

struct BenchResult {
  std::string problem;
  std::string solver;
  int repetition = 0;
  int L = 0;
  int M = 0;
  bool usable = true;  // false: the reference failed to converge
  bool reached = false;
  std::int64_t iterations_to_gap = -1;  // -1 when not reached
  double terminal_gap = 0.0;            // signed, at the final iterate
  double best_abs_gap = 0.0;  // min |gap| over the run; monotone in budget
  double terminal_violation = 0.0;      // normalized
  double fstar = 0.0;                   // reference optimum, original frame
  double wall_time_s = 0.0;
  EventStats stats;
  PartitionReport partition;  // populated for fxp cells
  std::vector<TracePoint> trace;
  std::vector<double> x_final;  // terminal iterate, original frame
  std::string metadata_json;    // replays this cell bit-identically
};

/// Reference-vs-solver convergence study: for every (problem, solver,
/// repetition) cell, computes the float reference optimum, runs the
/// solver, and records the per-iteration gap/violation trace plus the
/// first iteration meeting the gap target. Writes CSVs + summary.json
/// when spec.output_dir is set.
std::vector<BenchResult> run_gap_study(const BenchSpec& spec);

struct ScalingStudyResult {
  std::vector<BenchResult> cells;
  // Log-log least-squares slopes vs. problem size L over fxp cells:
  // per-iteration MAC rate, total MACs to the gap target (reached cells),
  // and the partition cost model per iteration.
  double slope_mac_per_iteration = 0.0;
  double slope_macs_to_target = 0.0;
  double slope_partition_cost = 0.0;
  int fit_points = 0;  // fewer than 2 leaves the slopes at 0
};
ScalingStudyResult run_scaling_study(const BenchSpec& spec);

struct WarmstartLink {
  int chain = 0;
  int link = 0;
  bool usable = true;
  bool warm_reached = false;
  bool cold_reached = false;
  std::int64_t warm_iterations = -1;
  std::int64_t cold_iterations = -1;
};

struct WarmstartStudyResult {
  std::vector<WarmstartLink> links;
  std::vector<BenchResult> cells;  // two cells (warm, cold) per link
  // Per-chain means of iterations_to_gap over links >= 1 (the
  // warm-started portion); links whose arm missed the target count as
  // the full budget.
  std::vector<double> warm_mean_per_chain;
  std::vector<double> cold_mean_per_chain;
};

/// Chains of perturbed problems solved warm (previous link's solution)
/// vs. cold (zeros). Every problem in the spec must be generator-backed;
/// each spawns one chain. chain_length must be >= 2.
WarmstartStudyResult run_warmstart_study(const BenchSpec& spec,
                                         double perturb_magnitude,
                                         int chain_length);

/// Re-runs one cell from its recorded metadata. The returned trace is
/// bit-identical to the original run's.
BenchResult replay_cell(const std::string& metadata_json);

void write_trace_csv(const std::filesystem::path& path, const BenchResult& r);
std::vector<TracePoint> read_trace_csv(const std::filesystem::path& path);

/// Writes one CSV per cell plus summary.json into dir. extras_json (an
/// object) is merged into the summary top level.
void write_outputs(const std::filesystem::path& dir, const BenchSpec& spec,
                   const std::vector<BenchResult>& results,
                   const std::string& extras_json = "{}");

/// The summary document written by write_outputs, exposed for tests.
std::string summary_json(const BenchSpec& spec,
                         const std::vector<BenchResult>& results,
                         const std::string& extras_json = "{}");

}  // namespace evqp
