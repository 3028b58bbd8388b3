#include "wattbench/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "json.hpp"
#include "wattbench/errors.hpp"

namespace wattbench {

namespace {

using nlohmann::json;

struct PartialRequest {
  bool submitted = false;
  bool completed = false;
  RequestRecord rec;
  size_t order = 0;
};

double require_number(const json& j, const char* key, size_t lineno) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw MalformedRecord("line " + std::to_string(lineno) + ": missing numeric '" + key + "'");
  }
  return j[key].get<double>();
}

std::string require_string(const json& j, const char* key, size_t lineno) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw MalformedRecord("line " + std::to_string(lineno) + ": missing string '" + key + "'");
  }
  return j[key].get<std::string>();
}

}  // namespace

std::string to_string(Phase p) {
  switch (p) {
    case Phase::prefill: return "prefill";
    case Phase::decode: return "decode";
    case Phase::denoise_step: return "denoise-step";
    case Phase::encode: return "encode";
    case Phase::decode_image: return "decode-image";
  }
  return "decode";
}

Phase phase_from_string(const std::string& s) {
  if (s == "prefill") return Phase::prefill;
  if (s == "decode") return Phase::decode;
  if (s == "denoise-step") return Phase::denoise_step;
  if (s == "encode") return Phase::encode;
  if (s == "decode-image") return Phase::decode_image;
  throw MalformedRecord("unknown iteration phase '" + s + "'");
}

ParsedServingLog parse_serving_log(std::istream& in) {
  std::map<std::string, PartialRequest> requests;
  std::vector<IterationLog> iterations;
  size_t order = 0;

  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw MalformedRecord("line " + std::to_string(lineno) + ": " + e.what());
    }
    const std::string type = require_string(j, "type", lineno);

    if (type == "iteration") {
      IterationLog it;
      it.t_start = require_number(j, "t_start", lineno);
      it.t_end = require_number(j, "t_end", lineno);
      it.batch_size = static_cast<long>(require_number(j, "batch_size", lineno));
      it.tokens_emitted = static_cast<long>(require_number(j, "tokens_emitted", lineno));
      it.phase = phase_from_string(require_string(j, "phase", lineno));
      if (j.contains("batch_id")) it.batch_id = j["batch_id"].get<std::string>();
      if (it.t_end < it.t_start || it.batch_size < 1 || it.tokens_emitted < 0) {
        throw MalformedRecord("line " + std::to_string(lineno) + ": inconsistent iteration record");
      }
      iterations.push_back(std::move(it));
      continue;
    }

    const std::string id = require_string(j, "id", lineno);
    const double t = require_number(j, "t", lineno);

    if (type == "request_submit") {
      auto [it, inserted] = requests.try_emplace(id);
      if (!inserted && it->second.submitted) {
        throw DuplicateLifecycle("request " + id + ": duplicate request_submit");
      }
      it->second.submitted = true;
      it->second.order = order++;
      it->second.rec.request_id = id;
      it->second.rec.submit_t = t;
      it->second.rec.input_tokens = static_cast<long>(require_number(j, "input_tokens", lineno));
    } else if (type == "first_token") {
      auto it = requests.find(id);
      if (it == requests.end() || !it->second.submitted) {
        throw OrphanEvent("request " + id + ": first_token without request_submit");
      }
      if (it->second.rec.first_token_t) {
        throw DuplicateLifecycle("request " + id + ": duplicate first_token");
      }
      it->second.rec.first_token_t = t;
    } else if (type == "request_complete") {
      auto it = requests.find(id);
      if (it == requests.end() || !it->second.submitted) {
        throw OrphanEvent("request " + id + ": request_complete without request_submit");
      }
      if (it->second.completed) {
        throw DuplicateLifecycle("request " + id + ": duplicate request_complete");
      }
      it->second.completed = true;
      it->second.rec.complete_t = t;
      if (j.contains("output_tokens")) {
        it->second.rec.output_tokens = static_cast<long>(require_number(j, "output_tokens", lineno));
      }
      if (j.contains("batch_id")) it->second.rec.batch_id = j["batch_id"].get<std::string>();
    } else if (type == "preemption") {
      auto it = requests.find(id);
      if (it == requests.end() || !it->second.submitted) {
        throw OrphanEvent("request " + id + ": preemption without request_submit");
      }
      it->second.rec.preemption_events.emplace_back(t, require_string(j, "mode", lineno));
    } else {
      throw MalformedRecord("line " + std::to_string(lineno) + ": unknown event type '" + type + "'");
    }
  }

  ParsedServingLog out;
  std::vector<const PartialRequest*> ordered;
  ordered.reserve(requests.size());
  for (const auto& [id, pr] : requests) ordered.push_back(&pr);
  std::sort(ordered.begin(), ordered.end(),
            [](const PartialRequest* a, const PartialRequest* b) { return a->order < b->order; });
  for (const PartialRequest* pr : ordered) {
    if (!pr->completed) {
      out.incomplete.push_back(pr->rec.request_id);
      continue;
    }
    const RequestRecord& r = pr->rec;
    const double ft = r.first_token_t.value_or(r.submit_t);
    if (r.complete_t < r.submit_t || ft < r.submit_t || r.complete_t < ft) {
      throw MalformedRecord("request " + r.request_id + ": lifecycle times out of order");
    }
    out.records.push_back(r);
  }
  out.iterations = std::move(iterations);
  return out;
}

void write_serving_log(std::ostream& out, const std::vector<RequestRecord>& records,
                       const std::vector<IterationLog>& iterations) {
  // one canonical merged ordering: by time, then event rank, then id
  struct Line {
    double t;
    int rank;
    std::string id;
    json j;
  };
  std::vector<Line> lines;
  for (const auto& r : records) {
    json submit{{"type", "request_submit"}, {"id", r.request_id}, {"t", r.submit_t},
                {"input_tokens", r.input_tokens}};
    lines.push_back({r.submit_t, 0, r.request_id, std::move(submit)});
    if (r.first_token_t) {
      lines.push_back({*r.first_token_t, 1, r.request_id,
                       json{{"type", "first_token"}, {"id", r.request_id}, {"t", *r.first_token_t}}});
    }
    for (const auto& [t, mode] : r.preemption_events) {
      lines.push_back({t, 2, r.request_id,
                       json{{"type", "preemption"}, {"id", r.request_id}, {"t", t}, {"mode", mode}}});
    }
    json complete{{"type", "request_complete"}, {"id", r.request_id}, {"t", r.complete_t},
                  {"output_tokens", r.output_tokens}};
    if (r.batch_id) complete["batch_id"] = *r.batch_id;
    lines.push_back({r.complete_t, 3, r.request_id, std::move(complete)});
  }
  for (const auto& it : iterations) {
    json j{{"type", "iteration"},       {"t_start", it.t_start},
           {"t_end", it.t_end},         {"batch_size", it.batch_size},
           {"tokens_emitted", it.tokens_emitted}, {"phase", to_string(it.phase)}};
    if (it.batch_id) j["batch_id"] = *it.batch_id;
    lines.push_back({it.t_start, 4, "", std::move(j)});
  }
  std::stable_sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.id < b.id;
  });
  for (const auto& l : lines) out << l.j.dump() << "\n";
}

BatchTimeline::BatchTimeline(std::vector<Breakpoint> breakpoints, double span_begin,
                             double span_end)
    : breakpoints_(std::move(breakpoints)), span_begin_(span_begin), span_end_(span_end) {
  for (size_t i = 1; i < breakpoints_.size(); ++i) {
    if (breakpoints_[i].t <= breakpoints_[i - 1].t) {
      throw MalformedRecord("timeline breakpoints must strictly increase");
    }
  }
  if (!breakpoints_.empty() &&
      (span_begin_ != breakpoints_.front().t || span_end_ < breakpoints_.back().t)) {
    throw MalformedRecord("timeline span must start at the first breakpoint and cover the last");
  }
}

long BatchTimeline::value_at(double t) const {
  if (breakpoints_.empty() || t < span_begin_ || t >= span_end_) return 0;
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t,
                             [](double v, const Breakpoint& b) { return v < b.t; });
  if (it == breakpoints_.begin()) return 0;
  return std::prev(it)->batch;
}

double BatchTimeline::integral(double t0, double t1) const {
  if (breakpoints_.empty()) return 0.0;
  t0 = std::max(t0, span_begin_);
  t1 = std::min(t1, span_end_);
  if (t0 >= t1) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < breakpoints_.size(); ++i) {
    const double seg_begin = breakpoints_[i].t;
    const double seg_end = (i + 1 < breakpoints_.size()) ? breakpoints_[i + 1].t : span_end_;
    const double lo = std::max(t0, seg_begin);
    const double hi = std::min(t1, seg_end);
    if (lo < hi) total += static_cast<double>(breakpoints_[i].batch) * (hi - lo);
  }
  return total;
}

BatchTimeline batch_timeline(const std::vector<IterationLog>& iterations) {
  if (iterations.empty()) return BatchTimeline();
  std::vector<IterationLog> sorted = iterations;
  std::sort(sorted.begin(), sorted.end(),
            [](const IterationLog& a, const IterationLog& b) { return a.t_start < b.t_start; });
  for (size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].t_start < sorted[i - 1].t_end) {
      throw OverlappingIterations("iterations overlap at t=" + std::to_string(sorted[i].t_start));
    }
  }
  std::vector<BatchTimeline::Breakpoint> bp;
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (bp.empty() || bp.back().batch != sorted[i].batch_size) {
      bp.push_back({sorted[i].t_start, sorted[i].batch_size});
    }
    const bool gap_follows =
        (i + 1 < sorted.size()) ? (sorted[i + 1].t_start > sorted[i].t_end) : false;
    if (gap_follows) bp.push_back({sorted[i].t_end, 0});
  }
  return BatchTimeline(std::move(bp), sorted.front().t_start, sorted.back().t_end);
}

LatencySummary latency_metrics(const std::vector<RequestRecord>& records,
                               bool require_first_token) {
  if (records.empty()) throw EmptyInput("latency_metrics: no completed records");
  LatencySummary s;
  for (const auto& r : records) {
    s.e2e_s.push_back(r.complete_t - r.submit_t);
    if (!r.first_token_t) {
      if (require_first_token) {
        throw MissingFirstToken("request " + r.request_id + " has no first_token event");
      }
      continue;
    }
    s.ttft_s.push_back(*r.first_token_t - r.submit_t);
    const double divisor = static_cast<double>(std::max<long>(1, r.output_tokens - 1));
    s.tpot_s.push_back((r.complete_t - *r.first_token_t) / divisor);
  }
  auto mean = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
  };
  s.mean_ttft_s = mean(s.ttft_s);
  s.mean_tpot_s = mean(s.tpot_s);
  s.mean_e2e_s = mean(s.e2e_s);
  return s;
}

std::vector<BatchGroup> derive_batch_groups(const std::vector<RequestRecord>& records,
                                            const std::vector<IterationLog>& iterations) {
  std::map<std::string, BatchGroup> groups;
  for (const auto& it : iterations) {
    if (!it.batch_id) continue;
    auto [g, inserted] = groups.try_emplace(*it.batch_id);
    if (inserted) {
      g->second.batch_id = *it.batch_id;
      g->second.t_start = it.t_start;
      g->second.t_end = it.t_end;
    } else {
      g->second.t_start = std::min(g->second.t_start, it.t_start);
      g->second.t_end = std::max(g->second.t_end, it.t_end);
    }
  }
  for (const auto& r : records) {
    if (!r.batch_id) continue;
    auto g = groups.find(*r.batch_id);
    if (g == groups.end()) {
      throw OrphanEvent("request " + r.request_id + " references unknown batch " + *r.batch_id);
    }
    g->second.request_ids.push_back(r.request_id);
  }
  std::vector<BatchGroup> out;
  out.reserve(groups.size());
  for (auto& [id, g] : groups) {
    if (g.request_ids.empty()) {
      throw EmptyBatch("batch " + id + " has iterations but no completed requests");
    }
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end(),
            [](const BatchGroup& a, const BatchGroup& b) { return a.t_start < b.t_start; });
  return out;
}

}  // namespace wattbench
