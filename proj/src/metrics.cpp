#include "wattbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "wattbench/errors.hpp"

namespace wattbench {

namespace {

using nlohmann::json;

constexpr double kJoulesPerKwh = 3.6e6;

double integrate_against_rates(const std::vector<PowerTrace>& traces, double t0, double t1,
                               const RateSeries& rates, std::optional<double> offset,
                               const char* expected_kind) {
  if (rates.kind() != expected_kind) {
    throw KindMismatch("rate series is '" + rates.kind() + "', expected '" + expected_kind + "'");
  }
  if (!(t1 > t0)) throw ZeroDuration("rate integration window must have positive length");
  const double shift = offset.value_or(t0 - rates.points().front().t);
  const RateSeries on_clock = rates.shifted(shift);
  if (t0 < on_clock.points().front().t - 1e-12) {
    throw RateCoverageGap("window starts before the rate series does");
  }

  // cut the window at every tariff step; energy within a piece sees one rate
  std::vector<double> cuts{t0};
  for (const auto& p : on_clock.points()) {
    if (p.t > t0 && p.t < t1) cuts.push_back(p.t);
  }
  cuts.push_back(t1);

  double acc = 0.0;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    acc += merge_energy(traces, cuts[i], cuts[i + 1]) / kJoulesPerKwh *
           on_clock.value_at(cuts[i]);
  }
  return acc;
}

}  // namespace

RateSeries::RateSeries(std::string kind, std::vector<RatePoint> points)
    : kind_(std::move(kind)), points_(std::move(points)) {
  if (kind_ != kPriceKind && kind_ != kCarbonKind) {
    throw InvalidArgument("unknown rate series kind '" + kind_ + "'");
  }
  if (points_.empty()) throw InvalidArgument("rate series needs at least one breakpoint");
  for (size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i].t) || !std::isfinite(points_[i].value)) {
      throw InvalidArgument("rate series has a non-finite breakpoint");
    }
    if (points_[i].value < 0.0) throw InvalidArgument("rates cannot be negative");
    if (i > 0 && points_[i].t <= points_[i - 1].t) {
      throw NonMonotonicTime("rate breakpoints must be strictly increasing");
    }
  }
}

double RateSeries::value_at(double t) const {
  if (t < points_.front().t) {
    throw RateCoverageGap("no rate defined at t=" + std::to_string(t));
  }
  auto it = std::upper_bound(points_.begin(), points_.end(), t,
                             [](double v, const RatePoint& p) { return v < p.t; });
  return std::prev(it)->value;
}

RateSeries RateSeries::shifted(double dt) const {
  std::vector<RatePoint> moved = points_;
  for (auto& p : moved) p.t += dt;
  return RateSeries(kind_, std::move(moved));
}

RateSeries parse_rate_series(std::istream& in) {
  std::string line;
  size_t lineno = 0;
  std::optional<std::string> kind;
  std::vector<RatePoint> points;
  bool csv = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    if (!kind.has_value() && line[line.find_first_not_of(" \t")] != '{') {
      // CSV header: the value column's name declares the kind
      std::istringstream head(line);
      std::string t_col, kind_col;
      if (!std::getline(head, t_col, ',') || !std::getline(head, kind_col) || t_col != "t") {
        throw MalformedRecord("line 1: expected a 't,<kind>' CSV header or JSON lines");
      }
      while (!kind_col.empty() && (kind_col.back() == '\r' || kind_col.back() == ' ')) {
        kind_col.pop_back();
      }
      kind = kind_col;
      csv = true;
      continue;
    }
    if (csv) {
      std::istringstream row(line);
      std::string t_str, v_str;
      if (!std::getline(row, t_str, ',') || !std::getline(row, v_str)) {
        throw MalformedRecord("line " + std::to_string(lineno) + ": expected 't,value'");
      }
      try {
        points.push_back({std::stod(t_str), std::stod(v_str)});
      } catch (const std::exception&) {
        throw MalformedRecord("line " + std::to_string(lineno) + ": non-numeric rate row");
      }
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw MalformedRecord("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("meta")) {
      if (kind.has_value() || !points.empty()) {
        throw MalformedRecord("line " + std::to_string(lineno) + ": meta must come first");
      }
      if (!j["meta"].contains("kind")) {
        throw MalformedRecord("line " + std::to_string(lineno) + ": meta is missing the kind");
      }
      kind = j["meta"]["kind"].get<std::string>();
      continue;
    }
    if (!kind.has_value()) {
      throw MalformedRecord("line " + std::to_string(lineno) + ": rate records before any kind");
    }
    if (!j.contains("t") || !j.contains("value")) {
      throw MalformedRecord("line " + std::to_string(lineno) + ": rate record needs t and value");
    }
    points.push_back({j["t"].get<double>(), j["value"].get<double>()});
  }
  if (!kind.has_value()) throw EmptyInput("rate series input is empty");
  try {
    return RateSeries(*kind, std::move(points));
  } catch (const InvalidArgument& e) {
    throw MalformedRecord(e.what());
  } catch (const NonMonotonicTime& e) {
    throw MalformedRecord(e.what());
  }
}

void write_rate_series(std::ostream& out, const RateSeries& series) {
  out << json{{"meta", {{"kind", series.kind()}}}}.dump() << "\n";
  for (const auto& p : series.points()) {
    out << json{{"t", p.t}, {"value", p.value}}.dump() << "\n";
  }
}

double throughput_per_watt(double tokens, const std::vector<PowerTrace>& traces, double t0,
                           double t1) {
  if (tokens < 0.0 || !std::isfinite(tokens)) {
    throw InvalidArgument("token count must be finite and non-negative");
  }
  const double energy_j = merge_energy(traces, t0, t1);
  if (energy_j <= 0.0) {
    throw ZeroPower("no energy measured in the window; throughput per watt is undefined");
  }
  // (tokens / duration) / (energy / duration): the durations cancel
  return tokens / energy_j;
}

double electricity_cost_usd(const std::vector<PowerTrace>& traces, double t0, double t1,
                            const RateSeries& rates, std::optional<double> offset) {
  return integrate_against_rates(traces, t0, t1, rates, offset, kPriceKind);
}

double carbon_emissions_g(const std::vector<PowerTrace>& traces, double t0, double t1,
                          const RateSeries& rates, std::optional<double> offset) {
  return integrate_against_rates(traces, t0, t1, rates, offset, kCarbonKind);
}

}  // namespace wattbench
