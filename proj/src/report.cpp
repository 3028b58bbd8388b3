#include "wattbench/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "wattbench/errors.hpp"
#include "wattbench/optimizer.hpp"

namespace wattbench {

namespace {

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::vector<RunResult> by_config_id(std::vector<RunResult> results) {
  std::sort(results.begin(), results.end(), [](const RunResult& a, const RunResult& b) {
    return a.config.config_id() < b.config.config_id();
  });
  return results;
}

std::vector<OperatingPoint> operating_points(const std::vector<RunResult>& results,
                                             const std::string& metric) {
  std::vector<OperatingPoint> points;
  for (const auto& r : results) {
    if (r.status != "ok") continue;
    points.push_back({r.config.config_id(), metric_value(r, metric), r.energy_per_request_j});
  }
  return points;
}

std::set<std::string> frontier_ids(const std::vector<RunResult>& results,
                                   const std::string& metric) {
  std::vector<OperatingPoint> points = operating_points(results, metric);
  std::set<std::string> ids;
  if (points.empty()) return ids;
  for (const auto& p : pareto_frontier(points)) ids.insert(p.config_id);
  return ids;
}

std::string join_flags(const std::vector<std::string>& flags) {
  std::string s;
  for (const auto& f : flags) {
    if (!s.empty()) s += ';';
    s += f;
  }
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

}  // namespace

double metric_value(const RunResult& r, const std::string& metric) {
  if (metric == "tpot") return r.mean_tpot_s;
  if (metric == "e2e") return r.mean_e2e_s;
  if (metric == "ttft") return r.mean_ttft_s;
  throw InvalidArgument("unknown metric '" + metric + "' (expected tpot, e2e, or ttft)");
}

std::string metric_label(const std::string& metric) {
  if (metric == "tpot") return "mean TPOT (s)";
  if (metric == "e2e") return "mean E2E latency (s)";
  if (metric == "ttft") return "mean TTFT (s)";
  throw InvalidArgument("unknown metric '" + metric + "' (expected tpot, e2e, or ttft)");
}

std::string default_metric(const std::vector<RunResult>& results) {
  for (const auto& r : results) {
    if (r.status != "ok") continue;
    return is_token_task(r.config.task) ? "tpot" : "e2e";
  }
  return "e2e";
}

std::string render_csv(const std::vector<RunResult>& results, const std::string& metric) {
  const std::vector<RunResult> rows = by_config_id(results);
  const std::set<std::string> frontier = frontier_ids(rows, metric);

  std::ostringstream out;
  out << "config_id,task,status,frontier,energy_per_request_j,energy_per_token_j,"
         "mean_ttft_s,mean_tpot_s,mean_e2e_s,throughput,avg_power_w,total_energy_j,"
         "preemptions,flags,error\n";
  for (const auto& r : rows) {
    const std::string id = r.config.config_id();
    out << id << ',' << r.config.task << ',' << r.status << ','
        << (frontier.count(id) ? "yes" : "") << ',';
    if (r.status == "ok") {
      out << g6(r.energy_per_request_j) << ','
          << (r.energy_per_token_j ? g6(*r.energy_per_token_j) : "") << ','
          << g6(r.mean_ttft_s) << ',' << g6(r.mean_tpot_s) << ',' << g6(r.mean_e2e_s) << ','
          << g6(r.throughput) << ',' << g6(r.avg_power_w) << ',' << g6(r.total_energy_j) << ','
          << r.preemption_count << ',';
    } else {
      out << ",,,,,,,,,";
    }
    out << csv_field(join_flags(r.flags)) << ',' << csv_field(r.error) << '\n';
  }
  return out.str();
}

std::string render_markdown(const std::vector<RunResult>& results, const std::string& metric) {
  const std::vector<RunResult> rows = by_config_id(results);
  const std::set<std::string> frontier = frontier_ids(rows, metric);
  const long ok = std::count_if(rows.begin(), rows.end(),
                                [](const RunResult& r) { return r.status == "ok"; });

  std::ostringstream out;
  out << "# run report\n\n"
      << rows.size() << " runs: " << ok << " ok, " << (rows.size() - ok)
      << " failed. Frontier over " << metric_label(metric) << " vs energy per request.\n\n";
  out << "| config | status | frontier | energy/request (J) | energy/token (J) | TTFT (s) "
         "| TPOT (s) | E2E (s) | throughput | power (W) | notes |\n";
  out << "|:---|:---|:---:|---:|---:|---:|---:|---:|---:|---:|:---|\n";
  for (const auto& r : rows) {
    const std::string id = r.config.config_id();
    out << "| `" << id << "` | " << r.status << " | " << (frontier.count(id) ? "*" : "")
        << " | ";
    if (r.status == "ok") {
      out << g6(r.energy_per_request_j) << " | "
          << (r.energy_per_token_j ? g6(*r.energy_per_token_j) : "") << " | "
          << g6(r.mean_ttft_s) << " | " << g6(r.mean_tpot_s) << " | " << g6(r.mean_e2e_s)
          << " | " << g6(r.throughput) << " | " << g6(r.avg_power_w) << " | "
          << join_flags(r.flags);
    } else {
      out << " |  |  |  |  |  |  | " << r.error;
    }
    out << " |\n";
  }
  return out.str();
}

std::string render_svg(const std::vector<RunResult>& results, const std::string& metric) {
  const std::vector<RunResult> rows = by_config_id(results);
  const std::set<std::string> frontier = frontier_ids(rows, metric);
  std::vector<OperatingPoint> points = operating_points(rows, metric);

  // drawing area inside the axis margins
  const double x0 = 70.0, x1 = 620.0, y0 = 20.0, y1 = 430.0;

  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  if (!points.empty()) {
    xmin = xmax = points[0].latency_s;
    ymin = ymax = points[0].energy_per_request_j;
    for (const auto& p : points) {
      xmin = std::min(xmin, p.latency_s);
      xmax = std::max(xmax, p.latency_s);
      ymin = std::min(ymin, p.energy_per_request_j);
      ymax = std::max(ymax, p.energy_per_request_j);
    }
  }
  auto pad = [](double& lo, double& hi) {
    const double spread = hi - lo;
    const double margin = spread > 0.0 ? 0.05 * spread : (hi != 0.0 ? 0.05 * std::abs(hi) : 0.5);
    lo -= margin;
    hi += margin;
  };
  pad(xmin, xmax);
  pad(ymin, ymax);
  auto sx = [&](double v) { return x0 + (v - xmin) / (xmax - xmin) * (x1 - x0); };
  auto sy = [&](double v) { return y1 - (v - ymin) / (ymax - ymin) * (y1 - y0); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n";
  out << "  <rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"#ffffff\"/>\n";
  out << "  <rect x=\"" << f2(x0) << "\" y=\"" << f2(y0) << "\" width=\"" << f2(x1 - x0)
      << "\" height=\"" << f2(y1 - y0) << "\" fill=\"#fafafa\" stroke=\"#c8c8c8\"/>\n";

  // axis captions and end labels
  out << "  <text x=\"345\" y=\"468\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">" << metric_label(metric) << "</text>\n";
  out << "  <text x=\"16\" y=\"225\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 16 225)\">energy per request (J)</text>\n";
  out << "  <text x=\"" << f2(x0) << "\" y=\"446\" text-anchor=\"start\" "
         "font-family=\"sans-serif\" font-size=\"11\">" << g6(xmin) << "</text>\n";
  out << "  <text x=\"" << f2(x1) << "\" y=\"446\" text-anchor=\"end\" "
         "font-family=\"sans-serif\" font-size=\"11\">" << g6(xmax) << "</text>\n";
  out << "  <text x=\"" << f2(x0 - 6.0) << "\" y=\"" << f2(y1) << "\" text-anchor=\"end\" "
         "font-family=\"sans-serif\" font-size=\"11\">" << g6(ymin) << "</text>\n";
  out << "  <text x=\"" << f2(x0 - 6.0) << "\" y=\"" << f2(y0 + 8.0) << "\" text-anchor=\"end\" "
         "font-family=\"sans-serif\" font-size=\"11\">" << g6(ymax) << "</text>\n";

  // frontier polyline beneath the markers, in latency order
  if (!points.empty()) {
    const std::vector<OperatingPoint> line = pareto_frontier(points);
    if (line.size() > 1) {
      out << "  <polyline fill=\"none\" stroke=\"#c05040\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < line.size(); ++i) {
        if (i) out << ' ';
        out << f2(sx(line[i].latency_s)) << ',' << f2(sy(line[i].energy_per_request_j));
      }
      out << "\"/>\n";
    }
    for (const auto& p : points) {
      const bool on_frontier = frontier.count(p.config_id) > 0;
      out << "  <circle cx=\"" << f2(sx(p.latency_s)) << "\" cy=\""
          << f2(sy(p.energy_per_request_j)) << "\" r=\"" << (on_frontier ? "4.5" : "3.5")
          << "\" fill=\"" << (on_frontier ? "#c05040" : "#4878a8") << "\">"
          << "<title>" << p.config_id << ": " << g6(p.latency_s) << " s, "
          << g6(p.energy_per_request_j) << " J</title></circle>\n";
    }
  } else {
    out << "  <text x=\"345\" y=\"225\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"13\" fill=\"#888888\">no successful runs</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string render_report(const std::vector<RunResult>& results, const std::string& format,
                          const std::string& metric) {
  if (results.empty()) throw EmptyInput("no runs to report");
  if (format == "csv") return render_csv(results, metric);
  if (format == "md") return render_markdown(results, metric);
  if (format == "svg") return render_svg(results, metric);
  throw UnsupportedFormat("unknown report format '" + format + "' (expected csv, md, or svg)");
}

}  // namespace wattbench
