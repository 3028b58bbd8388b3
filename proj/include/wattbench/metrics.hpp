#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wattbench/meter.hpp"

namespace wattbench {

inline constexpr const char* kPriceKind = "price_usd_per_kwh";
inline constexpr const char* kCarbonKind = "carbon_g_per_kwh";

struct RatePoint {
  double t = 0.0;
  double value = 0.0;
};

/// Right-continuous step function of time, e.g. an electricity tariff or a
/// grid carbon intensity curve.  The last value extends indefinitely; asking
/// for a time before the first breakpoint is a coverage gap.
class RateSeries {
 public:
  RateSeries(std::string kind, std::vector<RatePoint> points);

  const std::string& kind() const { return kind_; }
  const std::vector<RatePoint>& points() const { return points_; }
  double value_at(double t) const;
  RateSeries shifted(double dt) const;

 private:
  std::string kind_;
  std::vector<RatePoint> points_;
};

/// Reads either JSON lines ({"meta": {"kind": ...}} then {"t": ..., "value": ...})
/// or CSV whose header names the kind in the value column ("t,price_usd_per_kwh").
RateSeries parse_rate_series(std::istream& in);

void write_rate_series(std::ostream& out, const RateSeries& series);

/// Tokens per joule == (tokens/s) per watt of average draw over the window.
double throughput_per_watt(double tokens, const std::vector<PowerTrace>& traces, double t0,
                           double t1);

/// Integrates measured energy against a tariff.  `offset` places the series
/// on the trace clock (series time + offset == trace time); by default the
/// series' first breakpoint is aligned to the window start.
double electricity_cost_usd(const std::vector<PowerTrace>& traces, double t0, double t1,
                            const RateSeries& rates,
                            std::optional<double> offset = std::nullopt);

/// Same integral against a carbon intensity curve, in grams.
double carbon_emissions_g(const std::vector<PowerTrace>& traces, double t0, double t1,
                          const RateSeries& rates, std::optional<double> offset = std::nullopt);

}  // namespace wattbench
