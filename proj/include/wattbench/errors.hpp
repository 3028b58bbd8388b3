#pragma once

#include <stdexcept>
#include <string>

namespace wattbench {

// Every failure the library raises derives from Error, so callers can catch
// one type at the boundary and still branch on the specific condition.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

// --- power trace ingestion and window queries ---
struct MalformedRecord : Error {
  using Error::Error;
};
struct MixedKind : Error {
  using Error::Error;
};
struct NonMonotonicTime : Error {
  using Error::Error;
};
struct WindowOutOfRange : Error {
  using Error::Error;
};
struct EmptyTrace : Error {
  using Error::Error;
};
struct ZeroDuration : Error {
  using Error::Error;
};
struct ClockOriginMismatch : Error {
  using Error::Error;
};

// --- serving log parsing ---
struct OrphanEvent : Error {
  using Error::Error;
};
struct DuplicateLifecycle : Error {
  using Error::Error;
};
struct OverlappingIterations : Error {
  using Error::Error;
};
struct EmptyInput : Error {
  using Error::Error;
};
struct MissingFirstToken : Error {
  using Error::Error;
};

// --- energy accounting ---
struct SteadyStateNotFound : Error {
  SteadyStateNotFound(const std::string& msg, long peak_batch, double longest_s)
      : Error(msg), max_observed_batch(peak_batch), longest_window_s(longest_s) {}
  long max_observed_batch = 0;
  double longest_window_s = 0.0;
};
struct ZeroSteadyTokens : Error {
  using Error::Error;
};
struct EmptyBatch : Error {
  using Error::Error;
};
struct ZeroMeasuredEnergy : Error {
  using Error::Error;
};

// --- simulator ---
struct InfeasibleConfig : Error {
  using Error::Error;
};
struct NonTerminating : Error {
  using Error::Error;
};
struct InvalidDistributionParams : Error {
  using Error::Error;
};

// --- sweeps and the results store ---
struct SpecParseError : Error {
  using Error::Error;
};
struct EmptyGrid : Error {
  using Error::Error;
};
struct UnknownDimension : Error {
  using Error::Error;
};
struct ConstraintParseError : Error {
  using Error::Error;
};
struct BackendUnavailable : Error {
  using Error::Error;
};
struct StoreCorrupt : Error {
  using Error::Error;
};
struct VersionMismatch : Error {
  using Error::Error;
};

// --- frontier and recommendation ---
struct NonFiniteCoordinate : Error {
  using Error::Error;
};
struct NoFeasiblePoint : Error {
  NoFeasiblePoint(const std::string& msg, double min_latency_s)
      : Error(msg), min_achievable_latency_s(min_latency_s) {}
  double min_achievable_latency_s = 0.0;
};

// --- derived metrics ---
struct ZeroPower : Error {
  using Error::Error;
};
struct RateCoverageGap : Error {
  using Error::Error;
};
struct KindMismatch : Error {
  using Error::Error;
};

// --- cli ---
struct UnsupportedFormat : Error {
  using Error::Error;
};

}  // namespace wattbench
