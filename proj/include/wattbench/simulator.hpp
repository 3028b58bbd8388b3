#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wattbench/meter.hpp"
#include "wattbench/telemetry.hpp"

namespace wattbench {

/// Parametric stand-ins for serving-engine step latencies.  All coefficients
/// are synthetic calibration knobs, not measurements of any real device.
struct LatencyModel {
  // prefill: base + per_token * prompt_tokens / tp
  double prefill_base_s = 0.0;
  double prefill_per_token_s = 0.0;
  // decode iteration: base + per_seq * batch / tp + comm * (tp - 1)
  double decode_base_s = 0.0;
  double decode_per_seq_s = 0.0;
  double comm_per_stage_s = 0.0;
  // one denoising step: base + per_item * batch * pixel_factor,
  // where pixel_factor = (resolution / base_resolution)^2
  double diffusion_step_base_s = 0.0;
  double diffusion_step_per_item_s = 0.0;
  double encode_s = 0.0;
  double image_decode_s = 0.0;
  double base_resolution = 512.0;

  double prefill_s(long prompt_tokens, int tp) const;
  double decode_s(long batch, int tp) const;
  double diffusion_step_s(long batch, long resolution) const;
};

/// Per-device power as a function of engine state.  Decode power rises with
/// batch size along a concave curve and is clamped at max_w.
struct PowerModel {
  double idle_w = 0.0;
  double max_w = 0.0;
  double decode_exponent = 0.5;    // curvature of the batch-power curve
  double batch_ref = 640.0;        // batch size at which decode power would hit max_w
  double active_fraction = 0.9;    // prefill / encode / denoise power as a share of max_w
  double image_decode_fraction = 0.6;

  double decode_w(long batch) const;
  double active_w() const { return max_w * active_fraction; }
  double image_decode_w() const { return max_w * image_decode_fraction; }
};

struct DeviceProfile {
  std::string name;
  LatencyModel latency;
  PowerModel power;
};

/// Built-in synthetic device classes: "highpower" (700 W class) and
/// "midpower" (400 W class).  Unknown names raise InvalidArgument.
const DeviceProfile& device_profile(const std::string& name);
std::vector<std::string> device_profile_names();

struct LlmRequestSpec {
  std::string id;
  long input_tokens = 0;
  long output_tokens = 0;
};

struct DiffusionRequestSpec {
  std::string id;
  long steps = 0;
  long resolution = 512;
};

struct SimWorkload {
  enum class Kind { llm, diffusion };
  Kind kind = Kind::llm;
  std::vector<LlmRequestSpec> llm;
  std::vector<DiffusionRequestSpec> diffusion;
};

enum class PreemptionMode { recompute, swap };

std::string to_string(PreemptionMode m);
PreemptionMode preemption_mode_from_string(const std::string& s);

struct SimConfig {
  long max_batch_size = 8;
  int tp_degree = 1;  // num_devices == tp_degree
  double kv_budget_tokens = 1 << 20;
  double kv_tokens_per_request_token = 1.0;
  PreemptionMode preemption = PreemptionMode::recompute;
  double swap_bandwidth_tokens_per_s = 80000.0;
  double sampling_interval_s = 0.005;
  std::uint64_t seed = 0;
};

struct LedgerEntry {
  double t_start = 0.0;
  double t_end = 0.0;
  double energy_j = 0.0;  // summed across devices
  std::string phase;
};

struct SimResult {
  std::vector<PowerTrace> traces;  // one per device
  std::vector<RequestRecord> records;
  std::vector<IterationLog> iterations;
  std::vector<LedgerEntry> ledger;
  std::vector<BatchGroup> batch_groups;  // diffusion runs only
  double end_t = 0.0;
  long preemption_count = 0;
};

/// Iteration-level batching: admit FIFO under the KV budget, one token per
/// running request per decode iteration, preempt the most recently admitted
/// request on KV overflow.  Fully deterministic.
SimResult simulate_llm(const SimConfig& config, const SimWorkload& workload,
                       const LatencyModel& lm, const PowerModel& pm);

/// Whole-batch serving: requests grouped into batches of max_batch_size in
/// submission order; each batch runs encode, its denoising steps, and image
/// decode back to back.
SimResult simulate_diffusion(const SimConfig& config, const SimWorkload& workload,
                             const LatencyModel& lm, const PowerModel& pm);

struct SynthSpec {
  long n_requests = 0;
  double input_mean = 0.0;
  double input_pareto_alpha = 2.5;
  double output_mean = 0.0;
};

/// Heavy-tailed prompt lengths (Pareto) and exponential output lengths, both
/// rounded up to at least one token.  Identical seeds give identical
/// workloads on every platform.
SimWorkload synth_workload(const SynthSpec& spec, std::uint64_t seed);

void write_workload(std::ostream& out, const SimWorkload& w);
SimWorkload parse_workload(std::istream& in);

void write_ledger(std::ostream& out, const std::vector<LedgerEntry>& ledger);
std::vector<LedgerEntry> parse_ledger(std::istream& in);

}  // namespace wattbench
