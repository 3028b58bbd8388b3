#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wattbench/accounting.hpp"
#include "wattbench/simulator.hpp"
#include "wattbench/sweep_spec.hpp"

namespace wattbench {

/// Everything that identifies one benchmarked configuration.
struct BenchmarkConfig {
  std::string task = "chat";
  std::string model_id = "synth-7b";
  std::string device_profile = "highpower";
  int tp_degree = 1;
  long max_batch_size = 8;
  long denoising_steps = 25;  // image/video tasks
  long resolution = 512;      // image/video tasks
  PreemptionMode preemption = PreemptionMode::recompute;
  std::optional<double> power_limit_w;  // reserved, carried but not enforced

  /// Human-readable slug plus a stable hash of every field; identical values
  /// give the identical id in any process.
  std::string config_id() const;
};

/// True for tasks that stream tokens (chat, code); false for the whole-batch
/// image/video tasks.
bool is_token_task(const std::string& task);

/// Cartesian product of the grid values, filtered by the constraints.
/// Dimensions iterate in lexicographic name order, values in sorted order, so
/// the listing is deterministic.  Unlisted dimensions take defaults.
std::vector<BenchmarkConfig> expand_grid(const SweepSpec& spec);

/// Outcome of benchmarking one configuration (averaged over repetitions).
struct RunResult {
  BenchmarkConfig config;
  std::string status = "ok";  // "ok" | "failed"
  std::string error;          // failed runs: what went wrong

  std::string accounting_method;  // "steady-state" | "batch-division"
  double energy_per_request_j = 0.0;
  std::optional<double> energy_per_token_j;  // token tasks only
  double mean_ttft_s = 0.0;                  // token tasks only
  double mean_tpot_s = 0.0;                  // token tasks only
  double mean_e2e_s = 0.0;
  double throughput = 0.0;  // tokens/s for token tasks, requests/s otherwise
  double avg_power_w = 0.0;
  double total_energy_j = 0.0;
  long preemption_count = 0;
  std::optional<SteadyWindow> steady_window;  // present iff steady-state method
  std::vector<std::string> flags;             // e.g. "non-steady", "estimated-tokens"
  std::string trace_path;  // artifacts, when the caller wrote them out
  std::string log_path;
  int repetitions = 1;
};

class Backend;

/// Runs every configuration strictly in sequence against the backend, one
/// lease per run.  A failing configuration is recorded as status "failed" and
/// the sweep moves on.  `progress`, when given, receives one line per config.
std::vector<RunResult> run_sweep(const std::vector<BenchmarkConfig>& configs,
                                 const SweepSpec& spec, Backend& backend,
                                 std::ostream* progress = nullptr);

}  // namespace wattbench
