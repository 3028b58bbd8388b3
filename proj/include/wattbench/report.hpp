#pragma once

#include <string>
#include <vector>

#include "wattbench/sweep.hpp"

namespace wattbench {

/// Latency metrics a report or recommendation can rank by.
/// "tpot" and "ttft" are only meaningful for token tasks.
double metric_value(const RunResult& r, const std::string& metric);

/// Axis/metric caption, e.g. "mean TPOT (s)".
std::string metric_label(const std::string& metric);

/// "tpot" when the successful runs are token runs, "e2e" otherwise.
std::string default_metric(const std::vector<RunResult>& results);

/// One row per run, sorted by config id, with a frontier marker column.
/// Failed runs keep their row (blank metrics) but never join the frontier.
std::string render_csv(const std::vector<RunResult>& results, const std::string& metric);

std::string render_markdown(const std::vector<RunResult>& results, const std::string& metric);

/// Latency–energy scatter, one marker per successful run, with the Pareto
/// frontier joined by a polyline in latency order.  Byte-deterministic.
std::string render_svg(const std::vector<RunResult>& results, const std::string& metric);

/// Dispatch on format in {"csv", "md", "svg"}; UnsupportedFormat otherwise,
/// EmptyInput when there are no runs at all.
std::string render_report(const std::vector<RunResult>& results, const std::string& format,
                          const std::string& metric);

}  // namespace wattbench
