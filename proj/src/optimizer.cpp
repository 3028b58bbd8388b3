#include "wattbench/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wattbench/errors.hpp"

namespace wattbench {

namespace {

void validate(const std::vector<OperatingPoint>& points) {
  for (const auto& p : points) {
    if (!std::isfinite(p.latency_s) || !std::isfinite(p.energy_per_request_j)) {
      throw NonFiniteCoordinate("configuration '" + p.config_id +
                                "' has a non-finite latency or energy");
    }
    if (p.latency_s < 0.0 || p.energy_per_request_j < 0.0) {
      throw InvalidArgument("configuration '" + p.config_id + "' has a negative coordinate");
    }
  }
}

bool ordered(const OperatingPoint& a, const OperatingPoint& b) {
  if (a.latency_s != b.latency_s) return a.latency_s < b.latency_s;
  if (a.energy_per_request_j != b.energy_per_request_j) {
    return a.energy_per_request_j < b.energy_per_request_j;
  }
  return a.config_id < b.config_id;
}

}  // namespace

std::vector<OperatingPoint> pareto_frontier(const std::vector<OperatingPoint>& points) {
  validate(points);
  std::vector<OperatingPoint> sorted = points;
  std::sort(sorted.begin(), sorted.end(), ordered);

  // single sweep: after sorting, a point is dominated iff something earlier
  // already reached a strictly lower energy (or ties it at lower latency)
  std::vector<OperatingPoint> frontier;
  double best_energy = std::numeric_limits<double>::infinity();
  for (const auto& p : sorted) {
    const bool duplicate = !frontier.empty() &&
                           frontier.back().latency_s == p.latency_s &&
                           frontier.back().energy_per_request_j == p.energy_per_request_j;
    if (p.energy_per_request_j < best_energy || duplicate) {
      best_energy = p.energy_per_request_j;
      frontier.push_back(p);
    }
  }
  return frontier;
}

Recommendation recommend(const std::vector<OperatingPoint>& points, double latency_budget_s) {
  validate(points);
  if (points.empty()) throw EmptyInput("no operating points to recommend from");
  if (!std::isfinite(latency_budget_s) || latency_budget_s < 0.0) {
    throw InvalidArgument("latency budget must be finite and non-negative");
  }

  const OperatingPoint* baseline = nullptr;
  for (const auto& p : points) {
    if (!baseline || p.latency_s < baseline->latency_s ||
        (p.latency_s == baseline->latency_s &&
         (p.energy_per_request_j < baseline->energy_per_request_j ||
          (p.energy_per_request_j == baseline->energy_per_request_j &&
           p.config_id < baseline->config_id)))) {
      baseline = &p;
    }
  }
  if (baseline->latency_s > latency_budget_s) {
    throw NoFeasiblePoint("no configuration meets the latency budget", baseline->latency_s);
  }

  const OperatingPoint* chosen = nullptr;
  for (const auto& p : points) {
    if (p.latency_s > latency_budget_s) continue;
    if (!chosen || p.energy_per_request_j < chosen->energy_per_request_j ||
        (p.energy_per_request_j == chosen->energy_per_request_j &&
         (p.latency_s < chosen->latency_s ||
          (p.latency_s == chosen->latency_s && p.config_id < chosen->config_id)))) {
      chosen = &p;
    }
  }

  Recommendation rec;
  rec.chosen = *chosen;
  rec.baseline = *baseline;
  rec.latency_budget_s = latency_budget_s;
  rec.energy_savings_fraction =
      baseline->energy_per_request_j > 0.0
          ? 1.0 - chosen->energy_per_request_j / baseline->energy_per_request_j
          : 0.0;
  return rec;
}

}  // namespace wattbench
