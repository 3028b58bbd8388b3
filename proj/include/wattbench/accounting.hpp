#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wattbench/meter.hpp"
#include "wattbench/telemetry.hpp"

namespace wattbench {

struct SteadyParams {
  /// Gaps shorter than this inside a saturated stretch are bridged.
  /// Unset means 1% of the run span.
  std::optional<double> gap_tolerance_s;
  /// Minimum fraction of the run span the window must cover.
  double min_fraction = 0.10;
};

struct SteadyWindow {
  double t0 = 0.0;
  double t1 = 0.0;
  /// Fraction of [t0, t1] during which the batch was saturated.
  double saturation_fraction = 0.0;
  long tokens_steady = 0;     // filled by llm_account
  double energy_steady_j = 0.0;  // filled by llm_account
};

/// Finds the longest stretch where the engine batch size sits at
/// max_batch_size, bridging sub-tolerance dips.  Raises SteadyStateNotFound
/// (carrying the peak observed batch) when the server never saturates or the
/// stretch is too short to trust.
SteadyWindow detect_steady_state(const BatchTimeline& timeline, long max_batch_size,
                                 const SteadyParams& params = {});

/// The central 50% of the run, for runs that never saturate but still need a
/// number (explicitly flagged by callers as non-steady).
SteadyWindow central_fallback_window(const BatchTimeline& timeline, long max_batch_size);

enum class AccountingMethod { steady_state, batch_division };

std::string to_string(AccountingMethod m);

struct EnergyAccount {
  AccountingMethod method = AccountingMethod::steady_state;
  double energy_per_request_j = 0.0;
  std::optional<double> energy_per_token_j;  // token-generation runs only
  std::map<std::string, double> per_request_energy_j;
  std::optional<SteadyWindow> steady;  // present iff method == steady_state
};

/// Steady-state token-energy accounting: window energy divided by the tokens
/// emitted inside it (decode iterations whose midpoint falls in the window),
/// scaled per request by its output token count.
EnergyAccount llm_account(const std::vector<PowerTrace>& traces,
                          const std::vector<RequestRecord>& records,
                          const std::vector<IterationLog>& iterations,
                          const SteadyWindow& window);

/// Whole-batch accounting: each batch's measured energy split evenly across
/// its members; the headline number is the request-weighted mean.
EnergyAccount diffusion_account(const std::vector<PowerTrace>& traces,
                                const std::vector<BatchGroup>& batch_groups);

/// How far a TDP * duration estimate overshoots the measured energy.
double tdp_overestimate_ratio(const std::vector<PowerTrace>& traces, double t0, double t1,
                              double tdp_w, int num_devices);

/// Token-count estimate for logs without iteration records (external
/// backends): each request's output tokens spread uniformly over its decode
/// span, clipped to the window.
double estimate_tokens_in_window(const std::vector<RequestRecord>& records, double t0, double t1);

}  // namespace wattbench
