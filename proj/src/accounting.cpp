#include "wattbench/accounting.hpp"

#include <algorithm>
#include <cmath>

#include "wattbench/errors.hpp"

namespace wattbench {

namespace {

struct Interval {
  double begin = 0.0;
  double end = 0.0;
  double duration() const { return end - begin; }
};

// maximal stretches where the timeline sits exactly at max_batch_size
std::vector<Interval> saturated_intervals(const BatchTimeline& tl, long max_batch_size) {
  std::vector<Interval> out;
  const auto& bp = tl.breakpoints();
  for (size_t i = 0; i < bp.size(); ++i) {
    if (bp[i].batch != max_batch_size) continue;
    const double begin = bp[i].t;
    const double end = (i + 1 < bp.size()) ? bp[i + 1].t : tl.span_end();
    if (!out.empty() && out.back().end == begin) {
      out.back().end = end;  // only possible when breakpoints are uncoalesced
    } else {
      out.push_back({begin, end});
    }
  }
  return out;
}

}  // namespace

std::string to_string(AccountingMethod m) {
  return m == AccountingMethod::steady_state ? "steady-state" : "batch-division";
}

SteadyWindow detect_steady_state(const BatchTimeline& timeline, long max_batch_size,
                                 const SteadyParams& params) {
  if (timeline.empty()) {
    throw SteadyStateNotFound("empty batch timeline", 0, 0.0);
  }
  if (max_batch_size < 1) throw InvalidArgument("max_batch_size must be >= 1");
  const double span = timeline.span_end() - timeline.span_begin();
  const double gap_tol = params.gap_tolerance_s.value_or(0.01 * span);

  long peak = 0;
  for (const auto& b : timeline.breakpoints()) peak = std::max(peak, b.batch);

  const auto sat = saturated_intervals(timeline, max_batch_size);
  if (sat.empty()) {
    throw SteadyStateNotFound(
        "batch size never reached " + std::to_string(max_batch_size) +
            " (peak observed: " + std::to_string(peak) + ")",
        peak, 0.0);
  }

  // bridge sub-tolerance dips, then keep the longest merged stretch
  std::vector<Interval> merged;
  double sat_inside = 0.0;  // saturated time inside merged.back()
  std::vector<double> sat_per_merged;
  for (const auto& iv : sat) {
    if (!merged.empty() && iv.begin - merged.back().end < gap_tol) {
      merged.back().end = iv.end;
      sat_per_merged.back() += iv.duration();
    } else {
      merged.push_back(iv);
      sat_per_merged.push_back(iv.duration());
    }
  }
  size_t best = 0;
  for (size_t i = 1; i < merged.size(); ++i) {
    if (merged[i].duration() > merged[best].duration()) best = i;
  }
  sat_inside = sat_per_merged[best];

  const Interval& win = merged[best];
  if (win.duration() < params.min_fraction * span) {
    throw SteadyStateNotFound(
        "longest saturated window (" + std::to_string(win.duration()) + " s) covers less than " +
            std::to_string(params.min_fraction) + " of the " + std::to_string(span) + " s run",
        peak, win.duration());
  }
  SteadyWindow out;
  out.t0 = win.begin;
  out.t1 = win.end;
  out.saturation_fraction = win.duration() > 0.0 ? sat_inside / win.duration() : 0.0;
  return out;
}

SteadyWindow central_fallback_window(const BatchTimeline& timeline, long max_batch_size) {
  if (timeline.empty()) throw EmptyInput("central_fallback_window: empty timeline");
  const double span = timeline.span_end() - timeline.span_begin();
  SteadyWindow w;
  w.t0 = timeline.span_begin() + 0.25 * span;
  w.t1 = timeline.span_begin() + 0.75 * span;
  const double sat = [&] {
    double acc = 0.0;
    const auto& bp = timeline.breakpoints();
    for (size_t i = 0; i < bp.size(); ++i) {
      if (bp[i].batch != max_batch_size) continue;
      const double seg_end = (i + 1 < bp.size()) ? bp[i + 1].t : timeline.span_end();
      acc += std::max(0.0, std::min(seg_end, w.t1) - std::max(bp[i].t, w.t0));
    }
    return acc;
  }();
  w.saturation_fraction = (w.t1 > w.t0) ? sat / (w.t1 - w.t0) : 0.0;
  return w;
}

EnergyAccount llm_account(const std::vector<PowerTrace>& traces,
                          const std::vector<RequestRecord>& records,
                          const std::vector<IterationLog>& iterations,
                          const SteadyWindow& window) {
  if (records.empty()) throw EmptyInput("llm_account: no completed records");
  if (iterations.empty()) throw EmptyInput("llm_account: no iteration records");
  if (!(window.t0 < window.t1)) {
    throw WindowOutOfRange("llm_account: degenerate steady window");
  }
  double log_begin = iterations.front().t_start, log_end = iterations.front().t_end;
  for (const auto& it : iterations) {
    log_begin = std::min(log_begin, it.t_start);
    log_end = std::max(log_end, it.t_end);
  }
  if (window.t0 < log_begin || window.t1 > log_end) {
    throw WindowOutOfRange("llm_account: window outside the logged iteration span");
  }

  const double energy_steady = merge_energy(traces, window.t0, window.t1);

  long tokens_steady = 0;
  for (const auto& it : iterations) {
    if (it.phase != Phase::decode) continue;
    const double mid = 0.5 * (it.t_start + it.t_end);
    if (mid >= window.t0 && mid <= window.t1) tokens_steady += it.tokens_emitted;
  }
  if (tokens_steady == 0) {
    throw ZeroSteadyTokens("no decode tokens emitted inside the steady window");
  }

  const double per_token = energy_steady / static_cast<double>(tokens_steady);
  double total_output = 0.0;
  for (const auto& r : records) total_output += static_cast<double>(r.output_tokens);
  const double mean_output = total_output / static_cast<double>(records.size());

  EnergyAccount acct;
  acct.method = AccountingMethod::steady_state;
  acct.energy_per_token_j = per_token;
  acct.energy_per_request_j = per_token * mean_output;
  for (const auto& r : records) {
    acct.per_request_energy_j[r.request_id] = per_token * static_cast<double>(r.output_tokens);
  }
  SteadyWindow filled = window;
  filled.tokens_steady = tokens_steady;
  filled.energy_steady_j = energy_steady;
  acct.steady = filled;
  return acct;
}

EnergyAccount diffusion_account(const std::vector<PowerTrace>& traces,
                                const std::vector<BatchGroup>& batch_groups) {
  if (batch_groups.empty()) throw EmptyInput("diffusion_account: no batch groups");
  EnergyAccount acct;
  acct.method = AccountingMethod::batch_division;
  double total_energy = 0.0;
  double total_requests = 0.0;
  for (const auto& g : batch_groups) {
    if (g.request_ids.empty()) throw EmptyBatch("batch " + g.batch_id + " has no requests");
    const double batch_energy = merge_energy(traces, g.t_start, g.t_end);
    const double share = batch_energy / static_cast<double>(g.request_ids.size());
    for (const auto& id : g.request_ids) acct.per_request_energy_j[id] = share;
    total_energy += batch_energy;
    total_requests += static_cast<double>(g.request_ids.size());
  }
  acct.energy_per_request_j = total_energy / total_requests;
  return acct;
}

double tdp_overestimate_ratio(const std::vector<PowerTrace>& traces, double t0, double t1,
                              double tdp_w, int num_devices) {
  if (tdp_w <= 0.0) throw InvalidArgument("tdp_w must be positive");
  if (num_devices < 1) throw InvalidArgument("num_devices must be >= 1");
  const double measured = merge_energy(traces, t0, t1);
  if (measured == 0.0) throw ZeroMeasuredEnergy("measured energy over window is zero");
  return tdp_w * static_cast<double>(num_devices) * (t1 - t0) / measured;
}

double estimate_tokens_in_window(const std::vector<RequestRecord>& records, double t0, double t1) {
  double tokens = 0.0;
  for (const auto& r : records) {
    const double begin = r.first_token_t.value_or(r.submit_t);
    const double end = r.complete_t;
    if (end <= begin) continue;
    const double overlap = std::max(0.0, std::min(end, t1) - std::max(begin, t0));
    tokens += static_cast<double>(r.output_tokens) * overlap / (end - begin);
  }
  return tokens;
}

}  // namespace wattbench
