#include "wattbench/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <map>
#include <ostream>
#include <random>

#include "json.hpp"
#include "wattbench/errors.hpp"

namespace wattbench {

namespace {

using nlohmann::json;

constexpr double kBoundaryEps = 1e-9;  // step edges get a sample pair this far apart

// contiguous constant-power stretch of the engine, per device
struct Seg {
  double t0 = 0.0;
  double t1 = 0.0;
  double p_dev = 0.0;
};

struct Engine {
  double t = 0.0;
  int devices = 1;
  long events = 0;
  long event_cap = 0;
  std::vector<Seg> segs;
  std::vector<LedgerEntry> ledger;

  void push(double dur, double p_dev, const std::string& phase) {
    if (++events > event_cap) {
      throw NonTerminating("simulation exceeded " + std::to_string(event_cap) + " events");
    }
    if (dur <= 0.0) return;  // zero-cost events leave no trace
    segs.push_back({t, t + dur, p_dev});
    ledger.push_back({t, t + dur, p_dev * dur * static_cast<double>(devices), phase});
    t += dur;
  }
};

// Piecewise-constant power sampled on a fixed grid plus a pair of samples at
// every power step (old value 1 ns before the edge, new value at it), so the
// meter's linear interpolation reproduces each plateau near-exactly.
std::vector<PowerSample> sample_segments(const std::vector<Seg>& segs, double interval) {
  std::vector<PowerSample> out;
  auto push = [&out](double t, double v) {
    if (out.empty() || t > out.back().t + 1e-12) out.push_back({t, v});
  };
  if (segs.empty()) return out;
  push(segs.front().t0, segs.front().p_dev);
  double next_tick = std::floor(segs.front().t0 / interval + 1.0) * interval;
  for (size_t i = 0; i < segs.size(); ++i) {
    const Seg& s = segs[i];
    while (next_tick < s.t1 - 2.0 * kBoundaryEps) {
      if (next_tick > s.t0) push(next_tick, s.p_dev);
      next_tick += interval;
    }
    if (i + 1 < segs.size()) {
      if (segs[i + 1].p_dev != s.p_dev) {
        push(s.t1 - kBoundaryEps, s.p_dev);
        push(s.t1, segs[i + 1].p_dev);
      }
    } else {
      push(s.t1, s.p_dev);
    }
  }
  return out;
}

std::vector<PowerTrace> emit_traces(const std::vector<Seg>& segs, int devices, double interval,
                                    double tdp_w) {
  std::vector<PowerSample> samples = sample_segments(segs, interval);
  std::vector<PowerTrace> traces;
  traces.reserve(static_cast<size_t>(devices));
  for (int d = 0; d < devices; ++d) {
    traces.emplace_back("sim-gpu" + std::to_string(d), TraceKind::instantaneous_power, samples,
                        tdp_w);
  }
  return traces;
}

std::string padded_id(const char* prefix, long i, long n) {
  int width = 1;
  for (long v = n - 1; v >= 10; v /= 10) ++width;
  std::string digits = std::to_string(i);
  return prefix + std::string(static_cast<size_t>(width) - std::min<size_t>(width, digits.size()),
                              '0') +
         digits;
}

// 53 random bits -> [0, 1); identical on every platform, unlike the standard
// library distributions
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace

double LatencyModel::prefill_s(long prompt_tokens, int tp) const {
  return prefill_base_s + prefill_per_token_s * static_cast<double>(prompt_tokens) /
                              static_cast<double>(tp);
}

double LatencyModel::decode_s(long batch, int tp) const {
  return decode_base_s + decode_per_seq_s * static_cast<double>(batch) / static_cast<double>(tp) +
         comm_per_stage_s * static_cast<double>(tp - 1);
}

double LatencyModel::diffusion_step_s(long batch, long resolution) const {
  const double pixel_factor = std::pow(static_cast<double>(resolution) / base_resolution, 2.0);
  return diffusion_step_base_s +
         diffusion_step_per_item_s * static_cast<double>(batch) * pixel_factor;
}

double PowerModel::decode_w(long batch) const {
  const double raw =
      idle_w + (max_w - idle_w) * std::pow(static_cast<double>(batch) / batch_ref, decode_exponent);
  return std::min(max_w, raw);
}

const DeviceProfile& device_profile(const std::string& name) {
  // Synthetic calibration values for two made-up device classes; they are not
  // measurements of any physical accelerator.
  static const DeviceProfile highpower{
      "highpower",
      LatencyModel{1.0e-3, 1.0e-4, 1.8e-3, 1.0e-4, 2.0e-4, 0.02, 1.2e-3, 0.05, 0.2, 512.0},
      PowerModel{140.0, 700.0, 0.5, 640.0, 0.9, 0.6},
  };
  static const DeviceProfile midpower{
      "midpower",
      LatencyModel{1.6e-3, 1.6e-4, 2.88e-3, 1.6e-4, 3.2e-4, 0.032, 1.92e-3, 0.08, 0.32, 512.0},
      PowerModel{80.0, 400.0, 0.5, 640.0, 0.9, 0.6},
  };
  if (name == "highpower") return highpower;
  if (name == "midpower") return midpower;
  throw InvalidArgument("unknown device profile '" + name + "'");
}

std::vector<std::string> device_profile_names() { return {"highpower", "midpower"}; }

std::string to_string(PreemptionMode m) {
  return m == PreemptionMode::recompute ? "recompute" : "swap";
}

PreemptionMode preemption_mode_from_string(const std::string& s) {
  if (s == "recompute") return PreemptionMode::recompute;
  if (s == "swap") return PreemptionMode::swap;
  throw InvalidArgument("unknown preemption mode '" + s + "'");
}

SimResult simulate_llm(const SimConfig& config, const SimWorkload& workload,
                       const LatencyModel& lm, const PowerModel& pm) {
  if (workload.kind != SimWorkload::Kind::llm) {
    throw InvalidArgument("simulate_llm needs a token-generation workload");
  }
  if (config.max_batch_size < 1) throw InvalidArgument("max_batch_size must be >= 1");
  if (config.tp_degree < 1) throw InvalidArgument("tp_degree must be >= 1");
  if (config.sampling_interval_s <= 0.0) throw InvalidArgument("sampling interval must be > 0");

  const auto& reqs = workload.llm;
  const double kpt = config.kv_tokens_per_request_token;
  double total_output = 0.0;
  for (const auto& r : reqs) {
    if (r.input_tokens < 1 || r.output_tokens < 1) {
      throw InvalidArgument("request " + r.id + ": token counts must be >= 1");
    }
    if (kpt * static_cast<double>(r.input_tokens + r.output_tokens) > config.kv_budget_tokens) {
      throw InfeasibleConfig("request " + r.id + " alone exceeds the KV budget");
    }
    total_output += static_cast<double>(r.output_tokens);
  }

  SimResult res;
  res.records.reserve(reqs.size());
  for (const auto& r : reqs) {
    RequestRecord rec;
    rec.request_id = r.id;
    rec.submit_t = 0.0;  // the whole workload is submitted up front
    rec.input_tokens = r.input_tokens;
    rec.output_tokens = r.output_tokens;
    res.records.push_back(std::move(rec));
  }
  if (reqs.empty()) return res;

  Engine eng;
  eng.devices = config.tp_degree;
  eng.event_cap = 1'000'000 + 200 * (static_cast<long>(total_output) + static_cast<long>(reqs.size()));

  struct Running {
    size_t idx;  // index into reqs / res.records
    long gen = 0;
  };
  std::vector<Running> running;  // admission order, most recent last
  std::deque<size_t> pending;
  std::deque<Running> swapped;
  for (size_t i = 0; i < reqs.size(); ++i) pending.push_back(i);
  // generated counts survive preemption in both modes
  std::vector<long> preserved_gen(reqs.size(), 0);

  auto kv_needed = [&](double extra_request_tokens) {
    double acc = extra_request_tokens;
    for (const auto& r : running) {
      acc += static_cast<double>(reqs[r.idx].input_tokens + r.gen + 1);
    }
    return kpt * acc;
  };

  size_t done = 0;
  while (done < reqs.size()) {
    // admission: swapped requests first (their KV is waiting), then new ones
    while (static_cast<long>(running.size()) < config.max_batch_size) {
      if (!swapped.empty()) {
        const Running cand = swapped.front();
        const double need =
            static_cast<double>(reqs[cand.idx].input_tokens + cand.gen + 1);
        if (kv_needed(need) > config.kv_budget_tokens) break;
        swapped.pop_front();
        const double footprint =
            kpt * static_cast<double>(reqs[cand.idx].input_tokens + cand.gen);
        eng.push(footprint / config.swap_bandwidth_tokens_per_s, pm.idle_w, "swap-in");
        running.push_back(cand);
      } else if (!pending.empty()) {
        const size_t idx = pending.front();
        const long gen = preserved_gen[idx];
        const double need = static_cast<double>(reqs[idx].input_tokens + gen + 1);
        if (kv_needed(need) > config.kv_budget_tokens) break;
        pending.pop_front();
        // a re-admitted recompute victim re-prefills its whole context
        const long prompt = reqs[idx].input_tokens + gen;
        const double dur = lm.prefill_s(prompt, config.tp_degree);
        const double t0 = eng.t;
        eng.push(dur, pm.active_w(), "prefill");
        if (eng.t > t0) {
          res.iterations.push_back({t0, eng.t, 1, 0, Phase::prefill, {}});
        }
        running.push_back({idx, gen});
      } else {
        break;
      }
    }
    if (running.empty()) {
      throw NonTerminating("engine stalled with requests outstanding");
    }

    // the coming iteration appends one KV token per sequence; shed load until
    // it fits, newest admission first
    while (kv_needed(0.0) > config.kv_budget_tokens && running.size() > 1) {
      Running victim = running.back();
      running.pop_back();
      ++res.preemption_count;
      res.records[victim.idx].preemption_events.emplace_back(
          eng.t, to_string(config.preemption));
      if (config.preemption == PreemptionMode::swap) {
        const double footprint =
            kpt * static_cast<double>(reqs[victim.idx].input_tokens + victim.gen);
        eng.push(footprint / config.swap_bandwidth_tokens_per_s, pm.idle_w, "swap-out");
        swapped.push_back(victim);
      } else {
        preserved_gen[victim.idx] = victim.gen;
        pending.push_front(victim.idx);
      }
    }

    // one decode iteration: every running request emits one token
    const long batch = static_cast<long>(running.size());
    const double t0 = eng.t;
    eng.push(lm.decode_s(batch, config.tp_degree), pm.decode_w(batch), "decode");
    res.iterations.push_back({t0, eng.t, batch, batch, Phase::decode, {}});
    for (auto& r : running) {
      ++r.gen;
      if (r.gen == 1) res.records[r.idx].first_token_t = eng.t;
    }
    std::erase_if(running, [&](const Running& r) {
      if (r.gen < reqs[r.idx].output_tokens) return false;
      res.records[r.idx].complete_t = eng.t;
      ++done;
      return true;
    });
  }

  res.end_t = eng.t;
  res.ledger = std::move(eng.ledger);
  res.traces = emit_traces(eng.segs, config.tp_degree, config.sampling_interval_s, pm.max_w);
  return res;
}

SimResult simulate_diffusion(const SimConfig& config, const SimWorkload& workload,
                             const LatencyModel& lm, const PowerModel& pm) {
  if (workload.kind != SimWorkload::Kind::diffusion) {
    throw InvalidArgument("simulate_diffusion needs an image-generation workload");
  }
  if (config.max_batch_size < 1) throw InvalidArgument("max_batch_size must be >= 1");
  if (config.tp_degree < 1) throw InvalidArgument("tp_degree must be >= 1");
  if (config.sampling_interval_s <= 0.0) throw InvalidArgument("sampling interval must be > 0");
  const auto& reqs = workload.diffusion;
  for (const auto& r : reqs) {
    if (r.steps < 1 || r.resolution < 1) {
      throw InvalidArgument("request " + r.id + ": steps and resolution must be >= 1");
    }
  }

  SimResult res;
  for (const auto& r : reqs) {
    RequestRecord rec;
    rec.request_id = r.id;
    rec.submit_t = 0.0;
    res.records.push_back(std::move(rec));
  }
  if (reqs.empty()) return res;

  Engine eng;
  eng.devices = config.tp_degree;
  eng.event_cap = 1'000'000;

  const size_t bs = static_cast<size_t>(config.max_batch_size);
  long batch_no = 0;
  for (size_t start = 0; start < reqs.size(); start += bs, ++batch_no) {
    const size_t end = std::min(start + bs, reqs.size());
    const long batch = static_cast<long>(end - start);
    const std::string batch_id = "b" + std::to_string(batch_no);
    long steps = 0;
    long resolution = 0;
    for (size_t i = start; i < end; ++i) {
      steps = std::max(steps, reqs[i].steps);
      resolution = std::max(resolution, reqs[i].resolution);
    }

    BatchGroup group;
    group.batch_id = batch_id;
    group.t_start = eng.t;

    double t0 = eng.t;
    eng.push(lm.encode_s, pm.active_w(), "encode");
    if (eng.t > t0) res.iterations.push_back({t0, eng.t, batch, 0, Phase::encode, batch_id});
    for (long s = 0; s < steps; ++s) {
      t0 = eng.t;
      eng.push(lm.diffusion_step_s(batch, resolution), pm.active_w(), "denoise-step");
      if (eng.t > t0) {
        res.iterations.push_back({t0, eng.t, batch, 0, Phase::denoise_step, batch_id});
      }
    }
    t0 = eng.t;
    eng.push(lm.image_decode_s, pm.image_decode_w(), "decode-image");
    if (eng.t > t0) res.iterations.push_back({t0, eng.t, batch, 0, Phase::decode_image, batch_id});

    group.t_end = eng.t;
    for (size_t i = start; i < end; ++i) {
      res.records[i].complete_t = eng.t;
      res.records[i].batch_id = batch_id;
      group.request_ids.push_back(reqs[i].id);
    }
    res.batch_groups.push_back(std::move(group));
  }

  res.end_t = eng.t;
  res.ledger = std::move(eng.ledger);
  res.traces = emit_traces(eng.segs, config.tp_degree, config.sampling_interval_s, pm.max_w);
  return res;
}

SimWorkload synth_workload(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.n_requests < 1) throw InvalidDistributionParams("n_requests must be >= 1");
  if (spec.input_pareto_alpha <= 1.0) {
    throw InvalidDistributionParams("pareto alpha must exceed 1 for a finite mean");
  }
  if (spec.input_mean < 1.0 || spec.output_mean < 1.0) {
    throw InvalidDistributionParams("token length means must be >= 1");
  }
  // scale chosen so the (untruncated) Pareto has exactly the requested mean
  const double x_m = spec.input_mean * (spec.input_pareto_alpha - 1.0) / spec.input_pareto_alpha;
  std::mt19937_64 rng(seed);
  SimWorkload w;
  w.kind = SimWorkload::Kind::llm;
  w.llm.reserve(static_cast<size_t>(spec.n_requests));
  for (long i = 0; i < spec.n_requests; ++i) {
    const double u_in = uniform01(rng);
    const double u_out = uniform01(rng);
    const double raw_in = x_m * std::pow(1.0 - u_in, -1.0 / spec.input_pareto_alpha);
    const double raw_out = -spec.output_mean * std::log(1.0 - u_out);
    LlmRequestSpec r;
    r.id = padded_id("r", i, spec.n_requests);
    r.input_tokens = std::max<long>(1, static_cast<long>(std::ceil(raw_in)));
    r.output_tokens = std::max<long>(1, static_cast<long>(std::ceil(raw_out)));
    w.llm.push_back(std::move(r));
  }
  return w;
}

void write_workload(std::ostream& out, const SimWorkload& w) {
  if (w.kind == SimWorkload::Kind::llm) {
    for (const auto& r : w.llm) {
      out << json{{"id", r.id}, {"input_tokens", r.input_tokens}, {"output_tokens", r.output_tokens}}
                 .dump()
          << "\n";
    }
  } else {
    for (const auto& r : w.diffusion) {
      out << json{{"id", r.id}, {"steps", r.steps}, {"resolution", r.resolution}}.dump() << "\n";
    }
  }
}

SimWorkload parse_workload(std::istream& in) {
  SimWorkload w;
  bool kind_known = false;
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
    const bool is_llm = j.contains("input_tokens");
    if (!kind_known) {
      w.kind = is_llm ? SimWorkload::Kind::llm : SimWorkload::Kind::diffusion;
      kind_known = true;
    } else if (is_llm != (w.kind == SimWorkload::Kind::llm)) {
      throw MalformedRecord("line " + std::to_string(lineno) + ": mixed workload kinds");
    }
    if (!j.contains("id")) throw MalformedRecord("line " + std::to_string(lineno) + ": missing id");
    if (is_llm) {
      w.llm.push_back({j["id"].get<std::string>(), j["input_tokens"].get<long>(),
                       j["output_tokens"].get<long>()});
    } else {
      w.diffusion.push_back({j["id"].get<std::string>(), j["steps"].get<long>(),
                             j.value("resolution", 512L)});
    }
  }
  return w;
}

void write_ledger(std::ostream& out, const std::vector<LedgerEntry>& ledger) {
  for (const auto& e : ledger) {
    out << json{{"t_start", e.t_start}, {"t_end", e.t_end}, {"energy_j", e.energy_j},
                {"phase", e.phase}}
               .dump()
        << "\n";
  }
}

std::vector<LedgerEntry> parse_ledger(std::istream& in) {
  std::vector<LedgerEntry> out;
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
    out.push_back({j["t_start"].get<double>(), j["t_end"].get<double>(),
                   j["energy_j"].get<double>(), j["phase"].get<std::string>()});
  }
  return out;
}

}  // namespace wattbench
