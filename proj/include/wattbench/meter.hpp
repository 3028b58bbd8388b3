#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace wattbench {

enum class TraceKind { instantaneous_power, cumulative_energy };

std::string to_string(TraceKind kind);

struct PowerSample {
  double t = 0.0;      // seconds on the run's monotonic clock
  double value = 0.0;  // watts (instantaneous) or joules (cumulative)
};

/// Immutable per-device power trace.  Construction validates ordering and
/// precomputes a running integral, so window queries are O(log n), telescope
/// exactly (energy(a,c) == energy(a,b) + energy(b,c) to the bit), and are
/// safe to evaluate from multiple threads.
class PowerTrace {
 public:
  PowerTrace(std::string device_id, TraceKind kind, std::vector<PowerSample> samples,
             std::optional<double> declared_max_power = std::nullopt);

  const std::string& device_id() const { return device_id_; }
  TraceKind kind() const { return kind_; }
  const std::vector<PowerSample>& samples() const { return samples_; }
  std::optional<double> declared_max_power() const { return declared_max_power_; }

  double first_t() const;
  double last_t() const;

  /// Joules accumulated between the first sample and t.  For instantaneous
  /// traces this is the trapezoidal integral of the linearly interpolated
  /// power; for cumulative traces, the interpolated counter minus its origin.
  double cumulative_at(double t) const;

 private:
  std::string device_id_;
  TraceKind kind_;
  std::vector<PowerSample> samples_;
  std::optional<double> declared_max_power_;
  std::vector<double> running_j_;
};

/// Energy in joules over [t0, t1].  The window must lie inside the sampled
/// span; there is no extrapolation.
double energy_in_window(const PowerTrace& trace, double t0, double t1);

double average_power(const PowerTrace& trace, double t0, double t1);

/// Sum of per-device window energies.  Errors from an individual trace are
/// re-raised with the offending device id in the message.
double merge_energy(const std::vector<PowerTrace>& traces, double t0, double t1);

struct ParsedPowerFile {
  std::vector<PowerTrace> traces;  // one per device, ordered by device id
  std::optional<std::string> clock_origin;
  std::optional<double> tdp_w;
};

/// Reads the JSON-lines trace format: an optional first line
///   {"meta": {"clock_origin": "...", "tdp_w": 700.0}}
/// followed by records
///   {"device": "gpu0", "t": 0.0, "power_w": 312.5}     or
///   {"device": "gpu0", "t": 0.0, "energy_j": 1000.0}
/// A device must stick to one of power_w / energy_j throughout.
ParsedPowerFile parse_power_trace(std::istream& in);

void write_power_trace(std::ostream& out, const std::vector<PowerTrace>& traces,
                       const std::optional<std::string>& clock_origin = std::nullopt,
                       const std::optional<double>& tdp_w = std::nullopt);

}  // namespace wattbench
