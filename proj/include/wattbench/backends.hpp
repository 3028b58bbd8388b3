#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wattbench/sweep.hpp"

namespace wattbench {

/// Raw material one benchmark run produces, before accounting.
struct BackendRun {
  std::vector<PowerTrace> traces;
  std::vector<RequestRecord> records;
  std::vector<IterationLog> iterations;  // empty for external backends
  std::vector<BatchGroup> batch_groups;  // image/video runs only
  long preemption_count = 0;
  bool external_trace = false;  // trace captured outside the harness clock
};

/// A place runs execute.  At most one lease is outstanding at a time; run()
/// demands the current lease token, which is how the sweep's sequential-
/// isolation contract is enforced rather than merely promised.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;

  std::string lease();
  void release(const std::string& token);
  BackendRun run(const BenchmarkConfig& config, const SweepSpec& spec,
                 const std::string& token, std::uint64_t seed);

 protected:
  /// Raise BackendUnavailable if the backend cannot take a run right now.
  virtual void probe() {}
  /// One full benchmark run against a fresh engine.
  virtual BackendRun execute(const BenchmarkConfig& config, const SweepSpec& spec,
                             std::uint64_t seed) = 0;

 private:
  std::optional<std::string> lease_;
  long lease_counter_ = 0;
};

/// In-process deterministic engine model; same seed, same bytes.
class SimulatorBackend : public Backend {
 public:
  std::string name() const override { return "simulator"; }

 protected:
  BackendRun execute(const BenchmarkConfig& config, const SweepSpec& spec,
                     std::uint64_t seed) override;
};

/// Drives a text-generation HTTP endpoint: POSTs {prompt, max_tokens,
/// stream: true} per request, records submit/first-chunk/complete timestamps
/// client-side, and pairs the run with an externally captured power trace
/// file.  Token tasks only.
class HttpBackend : public Backend {
 public:
  HttpBackend(std::string endpoint, std::string power_trace_path, std::string bearer_token = "");

  std::string name() const override { return "http"; }

 protected:
  void probe() override;
  BackendRun execute(const BenchmarkConfig& config, const SweepSpec& spec,
                     std::uint64_t seed) override;

 private:
  std::string endpoint_;
  std::string power_trace_path_;
  std::string bearer_token_;
};

}  // namespace wattbench
