#include "wattbench/meter.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "wattbench/errors.hpp"

namespace wattbench {

namespace {

using nlohmann::json;

double interp(const PowerSample& a, const PowerSample& b, double t) {
  const double w = (t - a.t) / (b.t - a.t);
  return a.value + w * (b.value - a.value);
}

}  // namespace

std::string to_string(TraceKind kind) {
  return kind == TraceKind::instantaneous_power ? "instantaneous-power" : "cumulative-energy";
}

PowerTrace::PowerTrace(std::string device_id, TraceKind kind, std::vector<PowerSample> samples,
                       std::optional<double> declared_max_power)
    : device_id_(std::move(device_id)),
      kind_(kind),
      samples_(std::move(samples)),
      declared_max_power_(declared_max_power) {
  for (size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i].t) || !std::isfinite(samples_[i].value)) {
      throw MalformedRecord("device " + device_id_ + ": non-finite sample");
    }
    if (i > 0 && samples_[i].t <= samples_[i - 1].t) {
      throw NonMonotonicTime("device " + device_id_ + ": sample times must strictly increase (t=" +
                             std::to_string(samples_[i].t) + ")");
    }
    if (kind_ == TraceKind::instantaneous_power && samples_[i].value < 0.0) {
      throw MalformedRecord("device " + device_id_ + ": negative power sample");
    }
    if (kind_ == TraceKind::cumulative_energy && i > 0 &&
        samples_[i].value < samples_[i - 1].value) {
      throw MalformedRecord("device " + device_id_ + ": cumulative energy counter decreased");
    }
  }
  running_j_.resize(samples_.size(), 0.0);
  if (kind_ == TraceKind::instantaneous_power) {
    for (size_t i = 1; i < samples_.size(); ++i) {
      const double dt = samples_[i].t - samples_[i - 1].t;
      running_j_[i] = running_j_[i - 1] + 0.5 * (samples_[i].value + samples_[i - 1].value) * dt;
    }
  } else {
    for (size_t i = 0; i < samples_.size(); ++i) {
      running_j_[i] = samples_[i].value - samples_[0].value;
    }
  }
}

double PowerTrace::first_t() const {
  if (samples_.empty()) throw EmptyTrace("device " + device_id_ + ": no samples");
  return samples_.front().t;
}

double PowerTrace::last_t() const {
  if (samples_.empty()) throw EmptyTrace("device " + device_id_ + ": no samples");
  return samples_.back().t;
}

double PowerTrace::cumulative_at(double t) const {
  // callers guarantee first_t() <= t <= last_t() and >= 2 samples
  auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                             [](double v, const PowerSample& s) { return v < s.t; });
  size_t i = static_cast<size_t>(it - samples_.begin());
  if (i > 0) --i;
  if (i + 1 >= samples_.size()) i = samples_.size() - 2;
  if (t == samples_[i].t) return running_j_[i];
  const PowerSample& a = samples_[i];
  const PowerSample& b = samples_[i + 1];
  if (kind_ == TraceKind::instantaneous_power) {
    const double pt = interp(a, b, t);
    return running_j_[i] + 0.5 * (a.value + pt) * (t - a.t);
  }
  return interp(a, b, t) - samples_.front().value;
}

double energy_in_window(const PowerTrace& trace, double t0, double t1) {
  if (trace.samples().size() < 2) {
    throw EmptyTrace("device " + trace.device_id() + ": need at least 2 samples for a window query");
  }
  if (!(t0 < t1)) {
    throw WindowOutOfRange("window [" + std::to_string(t0) + ", " + std::to_string(t1) +
                           "] is not a forward interval");
  }
  if (t0 < trace.first_t() || t1 > trace.last_t()) {
    throw WindowOutOfRange("device " + trace.device_id() + ": window [" + std::to_string(t0) +
                           ", " + std::to_string(t1) + "] outside sampled span [" +
                           std::to_string(trace.first_t()) + ", " + std::to_string(trace.last_t()) +
                           "]");
  }
  const double e = trace.cumulative_at(t1) - trace.cumulative_at(t0);
  return e < 0.0 ? 0.0 : e;
}

double average_power(const PowerTrace& trace, double t0, double t1) {
  if (t0 == t1) throw ZeroDuration("average power over a zero-length window");
  return energy_in_window(trace, t0, t1) / (t1 - t0);
}

double merge_energy(const std::vector<PowerTrace>& traces, double t0, double t1) {
  if (traces.empty()) throw EmptyTrace("merge_energy: no traces given");
  double total = 0.0;
  for (const auto& tr : traces) total += energy_in_window(tr, t0, t1);
  return total;
}

ParsedPowerFile parse_power_trace(std::istream& in) {
  ParsedPowerFile out;
  struct Accum {
    std::optional<TraceKind> kind;
    std::vector<PowerSample> samples;
  };
  std::map<std::string, Accum> by_device;

  std::string line;
  size_t lineno = 0;
  bool saw_record = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw MalformedRecord("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("meta")) {
      if (saw_record) {
        throw MalformedRecord("line " + std::to_string(lineno) +
                              ": meta header must precede all records");
      }
      const json& m = j["meta"];
      if (m.contains("clock_origin")) out.clock_origin = m["clock_origin"].get<std::string>();
      if (m.contains("tdp_w")) out.tdp_w = m["tdp_w"].get<double>();
      continue;
    }
    saw_record = true;
    if (!j.contains("device") || !j["device"].is_string() || !j.contains("t") ||
        !j["t"].is_number()) {
      throw MalformedRecord("line " + std::to_string(lineno) + ": need string 'device' and numeric 't'");
    }
    const bool has_p = j.contains("power_w");
    const bool has_e = j.contains("energy_j");
    if (has_p == has_e) {
      throw MalformedRecord("line " + std::to_string(lineno) +
                            ": exactly one of power_w / energy_j required");
    }
    const TraceKind kind = has_p ? TraceKind::instantaneous_power : TraceKind::cumulative_energy;
    Accum& acc = by_device[j["device"].get<std::string>()];
    if (acc.kind && *acc.kind != kind) {
      throw MixedKind("device " + j["device"].get<std::string>() +
                      ": mixes power_w and energy_j records");
    }
    acc.kind = kind;
    acc.samples.push_back(
        {j["t"].get<double>(), (has_p ? j["power_w"] : j["energy_j"]).get<double>()});
  }

  for (auto& [device, acc] : by_device) {
    std::stable_sort(acc.samples.begin(), acc.samples.end(),
                     [](const PowerSample& a, const PowerSample& b) { return a.t < b.t; });
    for (size_t i = 1; i < acc.samples.size(); ++i) {
      if (acc.samples[i].t == acc.samples[i - 1].t) {
        throw NonMonotonicTime("device " + device + ": duplicate sample at t=" +
                               std::to_string(acc.samples[i].t));
      }
    }
    out.traces.emplace_back(device, *acc.kind, std::move(acc.samples), out.tdp_w);
  }
  return out;
}

void write_power_trace(std::ostream& out, const std::vector<PowerTrace>& traces,
                       const std::optional<std::string>& clock_origin,
                       const std::optional<double>& tdp_w) {
  if (clock_origin || tdp_w) {
    json meta = json::object();
    if (clock_origin) meta["clock_origin"] = *clock_origin;
    if (tdp_w) meta["tdp_w"] = *tdp_w;
    out << json{{"meta", meta}}.dump() << "\n";
  }
  // merge device streams into one time-ordered file
  struct Cursor {
    const PowerTrace* tr;
    size_t i = 0;
  };
  std::vector<Cursor> cursors;
  for (const auto& tr : traces) cursors.push_back({&tr, 0});
  while (true) {
    Cursor* best = nullptr;
    for (auto& c : cursors) {
      if (c.i >= c.tr->samples().size()) continue;
      if (!best || c.tr->samples()[c.i].t < best->tr->samples()[best->i].t ||
          (c.tr->samples()[c.i].t == best->tr->samples()[best->i].t &&
           c.tr->device_id() < best->tr->device_id())) {
        best = &c;
      }
    }
    if (!best) break;
    const PowerSample& s = best->tr->samples()[best->i];
    json j{{"device", best->tr->device_id()}, {"t", s.t}};
    if (best->tr->kind() == TraceKind::instantaneous_power) {
      j["power_w"] = s.value;
    } else {
      j["energy_j"] = s.value;
    }
    out << j.dump() << "\n";
    ++best->i;
  }
}

}  // namespace wattbench
