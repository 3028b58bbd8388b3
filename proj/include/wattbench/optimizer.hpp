#pragma once

#include <string>
#include <vector>

namespace wattbench {

/// One benchmarked configuration reduced to the two axes that matter for
/// choosing a deployment: how fast it serves and what a request costs.
struct OperatingPoint {
  std::string config_id;
  double latency_s = 0.0;
  double energy_per_request_j = 0.0;
};

/// Non-dominated subset under joint (latency, energy) minimization: a point
/// survives unless some other point is no worse on both axes and strictly
/// better on one.  Exact coordinate duplicates of a surviving point are all
/// kept.  Sorted by latency, ties by config_id.
std::vector<OperatingPoint> pareto_frontier(const std::vector<OperatingPoint>& points);

struct Recommendation {
  OperatingPoint chosen;    // cheapest configuration that meets the budget
  OperatingPoint baseline;  // what a latency-first deployment would pick
  double latency_budget_s = 0.0;
  double energy_savings_fraction = 0.0;  // 1 - chosen energy / baseline energy
};

/// Picks the least-energy point whose latency fits the budget and reports the
/// savings against the fastest point overall.  Raises NoFeasiblePoint (with
/// the best achievable latency) when the budget is tighter than every point.
Recommendation recommend(const std::vector<OperatingPoint>& points, double latency_budget_s);

}  // namespace wattbench
