#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wattbench {

enum class Phase { prefill, decode, denoise_step, encode, decode_image };

std::string to_string(Phase p);
Phase phase_from_string(const std::string& s);

/// One completed request, joined from its lifecycle events.
struct RequestRecord {
  std::string request_id;
  double submit_t = 0.0;
  std::optional<double> first_token_t;  // absent for image/video tasks
  double complete_t = 0.0;
  long input_tokens = 0;
  long output_tokens = 0;
  std::vector<std::pair<double, std::string>> preemption_events;  // (t, mode)
  std::optional<std::string> batch_id;  // whole-batch tasks only

  long preemptions() const { return static_cast<long>(preemption_events.size()); }
};

/// One engine iteration as the server logged it.
struct IterationLog {
  double t_start = 0.0;
  double t_end = 0.0;
  long batch_size = 0;
  long tokens_emitted = 0;
  Phase phase = Phase::decode;
  std::optional<std::string> batch_id;
};

struct ParsedServingLog {
  std::vector<RequestRecord> records;      // completed requests, submission order
  std::vector<IterationLog> iterations;    // as logged
  std::vector<std::string> incomplete;     // submitted but never completed
};

/// Joins request_submit / first_token / request_complete / preemption events
/// and collects iteration records.  Incomplete requests are reported, not
/// errors; inconsistent ones are.
ParsedServingLog parse_serving_log(std::istream& in);

void write_serving_log(std::ostream& out, const std::vector<RequestRecord>& records,
                       const std::vector<IterationLog>& iterations);

/// Right-continuous step function of the engine batch size over time.
/// Gaps between iterations count as batch 0.
class BatchTimeline {
 public:
  struct Breakpoint {
    double t = 0.0;
    long batch = 0;
  };

  BatchTimeline() = default;
  BatchTimeline(std::vector<Breakpoint> breakpoints, double span_begin, double span_end);

  bool empty() const { return breakpoints_.empty(); }
  const std::vector<Breakpoint>& breakpoints() const { return breakpoints_; }
  double span_begin() const { return span_begin_; }
  double span_end() const { return span_end_; }

  long value_at(double t) const;
  /// Integral of batch_size dt over [t0, t1] clipped to the span.
  double integral(double t0, double t1) const;

 private:
  std::vector<Breakpoint> breakpoints_;
  double span_begin_ = 0.0;
  double span_end_ = 0.0;
};

/// Builds the timeline from iteration logs.  Iterations may touch but not
/// overlap.  An empty input yields an empty (flagged) timeline.
BatchTimeline batch_timeline(const std::vector<IterationLog>& iterations);

struct LatencySummary {
  double mean_ttft_s = 0.0;
  double mean_tpot_s = 0.0;
  double mean_e2e_s = 0.0;
  std::vector<double> ttft_s;  // aligned with the records that carry first_token
  std::vector<double> tpot_s;
  std::vector<double> e2e_s;   // aligned with all records
};

/// Per-request latency metrics.  TPOT divides the decode span by
/// max(1, output_tokens - 1) so single-token requests are well defined.
/// When require_first_token is set (token-generation tasks), a record without
/// a first_token event is an error.
LatencySummary latency_metrics(const std::vector<RequestRecord>& records,
                               bool require_first_token);

struct BatchGroup {
  std::string batch_id;
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<std::string> request_ids;
};

/// Reconstructs whole-batch processing groups from logs whose iterations and
/// completions carry batch ids (image/video generation runs).
std::vector<BatchGroup> derive_batch_groups(const std::vector<RequestRecord>& records,
                                            const std::vector<IterationLog>& iterations);

}  // namespace wattbench
