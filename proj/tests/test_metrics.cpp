#include "wattbench/metrics.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "wattbench/errors.hpp"

using namespace wattbench;

namespace {

std::vector<PowerTrace> constant_trace(double watts, double t0, double t1) {
  std::vector<PowerTrace> traces;
  traces.emplace_back("gpu0", TraceKind::instantaneous_power,
                      std::vector<PowerSample>{{t0, watts}, {t1, watts}});
  return traces;
}

std::vector<PowerTrace> sine_trace(double mean_w, double amp_w, double t0, double t1, double h) {
  std::vector<PowerSample> samples;
  for (double t = t0; t < t1 + h / 2; t += h) {
    samples.push_back({t, mean_w + amp_w * std::sin(t)});
  }
  std::vector<PowerTrace> traces;
  traces.emplace_back("gpu0", TraceKind::instantaneous_power, std::move(samples));
  return traces;
}

}  // namespace

TEST_CASE("a megawatt-hour-scale sanity anchor") {
  // 1000 W for an hour is exactly one kWh; at $0.10/kWh that is ten cents
  auto traces = constant_trace(1000.0, 0.0, 3600.0);
  RateSeries flat(kPriceKind, {{0.0, 0.10}});
  CHECK(electricity_cost_usd(traces, 0.0, 3600.0, flat) ==
        doctest::Approx(0.10).epsilon(1e-12));
}

TEST_CASE("tariff steps split the integral") {
  // 500 W across two hours: 0.5 kWh at $0.10 then 0.5 kWh at $0.20
  auto traces = constant_trace(500.0, 0.0, 7200.0);
  RateSeries stepped(kPriceKind, {{0.0, 0.10}, {3600.0, 0.20}});
  CHECK(electricity_cost_usd(traces, 0.0, 7200.0, stepped) ==
        doctest::Approx(0.15).epsilon(1e-12));

  // restricting the window to the expensive hour
  CHECK(electricity_cost_usd(traces, 3600.0, 7200.0, stepped, 0.0) ==
        doctest::Approx(0.10).epsilon(1e-12));
}

TEST_CASE("cost integral agrees with a brute-force Riemann sum") {
  const double t0 = 0.0, t1 = 120.0, h = 1e-3;
  auto traces = sine_trace(400.0, 150.0, t0, t1, h);
  RateSeries rates(kPriceKind, {{0.0, 0.08}, {30.0, 0.22}, {75.0, 0.13}, {100.0, 0.30}});

  double oracle = 0.0;
  const double dt = 1e-3;
  for (double t = t0; t < t1 - dt / 2; t += dt) {
    const double mid = t + dt / 2;
    oracle += (400.0 + 150.0 * std::sin(mid)) * dt / 3.6e6 * rates.value_at(mid);
  }
  const double got = electricity_cost_usd(traces, t0, t1, rates, 0.0);
  CHECK(got == doctest::Approx(oracle).epsilon(1e-3));
}

TEST_CASE("carbon accounting uses the same machinery") {
  auto traces = constant_trace(2000.0, 0.0, 3600.0);  // 2 kWh
  RateSeries grid(kCarbonKind, {{0.0, 400.0}});
  CHECK(carbon_emissions_g(traces, 0.0, 3600.0, grid) ==
        doctest::Approx(800.0).epsilon(1e-12));

  RateSeries price(kPriceKind, {{0.0, 0.10}});
  CHECK_THROWS_AS(carbon_emissions_g(traces, 0.0, 3600.0, price), KindMismatch);
  CHECK_THROWS_AS(electricity_cost_usd(traces, 0.0, 3600.0, grid), KindMismatch);
}

TEST_CASE("rate series align to the window unless an offset is given") {
  // the tariff is defined on a relative clock starting at zero; the trace
  // lives at t = 5000..5100
  auto traces = constant_trace(360.0, 5000.0, 5100.0);
  RateSeries rates(kPriceKind, {{0.0, 0.10}, {50.0, 0.40}});

  // default: breakpoint 0 lands on t0=5000, the step lands mid-window
  const double kwh_half = 360.0 * 50.0 / 3.6e6;  // 0.005 kWh per half
  CHECK(electricity_cost_usd(traces, 5000.0, 5100.0, rates) ==
        doctest::Approx(kwh_half * 0.10 + kwh_half * 0.40).epsilon(1e-12));

  // explicit offset pushes the whole window into the expensive regime
  CHECK(electricity_cost_usd(traces, 5000.0, 5100.0, rates, 4900.0) ==
        doctest::Approx(2 * kwh_half * 0.40).epsilon(1e-12));

  // an offset that leaves the window start uncovered is an error
  CHECK_THROWS_AS(electricity_cost_usd(traces, 5000.0, 5100.0, rates, 5050.0),
                  RateCoverageGap);
}

TEST_CASE("throughput per watt reduces to tokens per joule") {
  auto traces = constant_trace(250.0, 0.0, 8.0);  // 2000 J
  CHECK(throughput_per_watt(1000.0, traces, 0.0, 8.0) == doctest::Approx(0.5).epsilon(1e-12));

  // zero tokens is a legitimate (if sad) measurement
  CHECK(throughput_per_watt(0.0, traces, 0.0, 8.0) == 0.0);

  auto dead = constant_trace(0.0, 0.0, 8.0);
  CHECK_THROWS_AS(throughput_per_watt(1000.0, dead, 0.0, 8.0), ZeroPower);
  CHECK_THROWS_AS(throughput_per_watt(-1.0, traces, 0.0, 8.0), InvalidArgument);
}

TEST_CASE("rate series parse from JSON lines and CSV") {
  std::istringstream jsonl(
      "{\"meta\": {\"kind\": \"price_usd_per_kwh\"}}\n"
      "{\"t\": 0.0, \"value\": 0.08}\n"
      "{\"t\": 3600.0, \"value\": 0.22}\n");
  RateSeries from_json = parse_rate_series(jsonl);
  CHECK(from_json.kind() == kPriceKind);
  REQUIRE(from_json.points().size() == 2);
  CHECK(from_json.value_at(4000.0) == doctest::Approx(0.22));

  std::istringstream csv(
      "t,carbon_g_per_kwh\n"
      "0,450\n"
      "21600,320\n"
      "43200,510\n");
  RateSeries from_csv = parse_rate_series(csv);
  CHECK(from_csv.kind() == kCarbonKind);
  REQUIRE(from_csv.points().size() == 3);
  CHECK(from_csv.value_at(0.0) == doctest::Approx(450.0));
  CHECK(from_csv.value_at(30000.0) == doctest::Approx(320.0));

  // round trip through the canonical JSON form
  std::ostringstream out;
  write_rate_series(out, from_csv);
  std::istringstream back_in(out.str());
  RateSeries back = parse_rate_series(back_in);
  CHECK(back.kind() == from_csv.kind());
  CHECK(back.points().size() == from_csv.points().size());
}

TEST_CASE("malformed rate inputs are named precisely") {
  std::istringstream no_kind("{\"t\": 0.0, \"value\": 0.1}\n");
  CHECK_THROWS_AS(parse_rate_series(no_kind), MalformedRecord);

  std::istringstream bad_kind(
      "{\"meta\": {\"kind\": \"price_eur_per_mwh\"}}\n{\"t\": 0, \"value\": 1}\n");
  CHECK_THROWS_AS(parse_rate_series(bad_kind), MalformedRecord);

  std::istringstream backwards(
      "{\"meta\": {\"kind\": \"price_usd_per_kwh\"}}\n"
      "{\"t\": 10.0, \"value\": 0.1}\n{\"t\": 5.0, \"value\": 0.2}\n");
  CHECK_THROWS_AS(parse_rate_series(backwards), MalformedRecord);

  std::istringstream nothing("\n\n");
  CHECK_THROWS_AS(parse_rate_series(nothing), EmptyInput);

  std::istringstream bad_csv("t,price_usd_per_kwh\n0,cheap\n");
  CHECK_THROWS_AS(parse_rate_series(bad_csv), MalformedRecord);

  CHECK_THROWS_AS(RateSeries(kPriceKind, {}), InvalidArgument);
  CHECK_THROWS_AS(RateSeries(kPriceKind, {{0.0, -0.1}}), InvalidArgument);
}
