#include "wattbench/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

#include "wattbench/backends.hpp"
#include "wattbench/errors.hpp"
#include "wattbench/telemetry.hpp"

namespace wattbench {

namespace {

const std::set<std::string>& known_dimensions() {
  static const std::set<std::string> dims{
      "model_id",        "device_profile", "tp_degree",  "max_batch_size",
      "denoising_steps", "resolution",     "preemption_mode", "power_limit_w",
  };
  return dims;
}

bool numeric_dimension(const std::string& dim) {
  return dim == "tp_degree" || dim == "max_batch_size" || dim == "denoising_steps" ||
         dim == "resolution" || dim == "power_limit_w";
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '-') {
      out += '-';
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

double parse_numeric(const std::string& dim, const std::string& raw) {
  try {
    size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw SpecParseError("dimension " + dim + ": value '" + raw + "' is not numeric");
  }
}

void apply_value(BenchmarkConfig& config, const std::string& dim, const std::string& raw) {
  if (dim == "model_id") {
    config.model_id = raw;
  } else if (dim == "device_profile") {
    config.device_profile = raw;
  } else if (dim == "preemption_mode") {
    try {
      config.preemption = preemption_mode_from_string(raw);
    } catch (const InvalidArgument& e) {
      throw SpecParseError(std::string("dimension preemption_mode: ") + e.what());
    }
  } else {
    const double v = parse_numeric(dim, raw);
    if (dim == "power_limit_w") {
      if (v <= 0.0) throw SpecParseError("power_limit_w must be positive");
      config.power_limit_w = v;
      return;
    }
    const long n = static_cast<long>(v);
    if (static_cast<double>(n) != v || n < 1) {
      throw SpecParseError("dimension " + dim + " needs a positive integer, got '" + raw + "'");
    }
    if (dim == "tp_degree") {
      config.tp_degree = static_cast<int>(n);
    } else if (dim == "max_batch_size") {
      config.max_batch_size = n;
    } else if (dim == "denoising_steps") {
      config.denoising_steps = n;
    } else if (dim == "resolution") {
      config.resolution = n;
    }
  }
}

std::string dimension_value(const BenchmarkConfig& config, const std::string& dim) {
  char buf[64];
  if (dim == "model_id") return config.model_id;
  if (dim == "device_profile") return config.device_profile;
  if (dim == "preemption_mode") return to_string(config.preemption);
  if (dim == "tp_degree") return std::to_string(config.tp_degree);
  if (dim == "max_batch_size") return std::to_string(config.max_batch_size);
  if (dim == "denoising_steps") return std::to_string(config.denoising_steps);
  if (dim == "resolution") return std::to_string(config.resolution);
  // power_limit_w: unset compares unequal to every number
  if (!config.power_limit_w.has_value()) return "";
  std::snprintf(buf, sizeof buf, "%.17g", *config.power_limit_w);
  return buf;
}

bool satisfies(const BenchmarkConfig& config, const Constraint& c) {
  const std::string lhs = dimension_value(config, c.dimension);
  if (numeric_dimension(c.dimension)) {
    if (lhs.empty()) return false;  // unset optional value
    const double a = parse_numeric(c.dimension, lhs);
    double b = 0.0;
    try {
      size_t used = 0;
      b = std::stod(c.rhs, &used);
      if (used != c.rhs.size()) throw std::invalid_argument(c.rhs);
    } catch (const std::exception&) {
      throw ConstraintParseError("constraint on " + c.dimension + ": '" + c.rhs +
                                 "' is not numeric");
    }
    if (c.op == "<=") return a <= b;
    if (c.op == ">=") return a >= b;
    if (c.op == "==") return a == b;
    if (c.op == "!=") return a != b;
    if (c.op == "<") return a < b;
    return a > b;
  }
  if (c.op == "==") return lhs == c.rhs;
  if (c.op == "!=") return lhs != c.rhs;
  throw ConstraintParseError("constraint on " + c.dimension + ": only == and != apply to '" +
                             c.dimension + "'");
}

struct LeaseGuard {
  Backend& backend;
  std::string token;
  ~LeaseGuard() {
    try {
      backend.release(token);
    } catch (...) {
      // releasing a lease the backend already dropped is not worth dying over
    }
  }
};

RunResult analyze_run(const BenchmarkConfig& config, const SweepSpec& spec,
                      const BackendRun& run) {
  RunResult res;
  res.config = config;
  res.preemption_count = run.preemption_count;

  if (run.records.empty()) throw EmptyInput("backend returned no completed requests");
  double t_lo = run.records.front().submit_t;
  double t_hi = run.records.front().complete_t;
  double output_tokens = 0.0;
  for (const auto& r : run.records) {
    t_lo = std::min(t_lo, r.submit_t);
    t_hi = std::max(t_hi, r.complete_t);
    output_tokens += static_cast<double>(r.output_tokens);
  }
  if (!(t_hi > t_lo)) throw ZeroDuration("run span is empty");

  const double trace_t0 = run.traces.at(0).first_t();
  const double trace_t1 = run.traces.at(0).last_t();
  res.total_energy_j = merge_energy(run.traces, trace_t0, trace_t1);
  res.avg_power_w = res.total_energy_j / (trace_t1 - trace_t0);

  const LatencySummary lat = latency_metrics(run.records, is_token_task(config.task));
  res.mean_e2e_s = lat.mean_e2e_s;

  if (is_token_task(config.task)) {
    res.mean_ttft_s = lat.mean_ttft_s;
    res.mean_tpot_s = lat.mean_tpot_s;
    res.throughput = output_tokens / (t_hi - t_lo);

    SteadyParams params;
    params.gap_tolerance_s = spec.accounting.gap_tolerance_s;
    params.min_fraction = spec.accounting.min_fraction;

    if (!run.iterations.empty()) {
      const BatchTimeline timeline = batch_timeline(run.iterations);
      SteadyWindow window;
      try {
        window = detect_steady_state(timeline, config.max_batch_size, params);
      } catch (const SteadyStateNotFound&) {
        window = central_fallback_window(timeline, config.max_batch_size);
        res.flags.push_back("non-steady");
      }
      const EnergyAccount account = llm_account(run.traces, run.records, run.iterations, window);
      res.accounting_method = to_string(account.method);
      res.energy_per_request_j = account.energy_per_request_j;
      res.energy_per_token_j = account.energy_per_token_j;
      res.steady_window = account.steady;
    } else {
      // external run: no iteration log, so take the central half of the run
      // and spread each request's tokens uniformly over its decode span
      double a = t_lo + 0.25 * (t_hi - t_lo);
      double b = t_lo + 0.75 * (t_hi - t_lo);
      a = std::max(a, trace_t0);
      b = std::min(b, trace_t1);
      if (!(b > a)) {
        throw WindowOutOfRange("power trace does not overlap the middle of the run");
      }
      const double tokens = estimate_tokens_in_window(run.records, a, b);
      if (tokens <= 0.0) throw ZeroSteadyTokens("no decode activity in the accounting window");
      const double energy = merge_energy(run.traces, a, b);
      const double per_token = energy / tokens;
      res.accounting_method = to_string(AccountingMethod::steady_state);
      res.energy_per_token_j = per_token;
      res.energy_per_request_j =
          per_token * (output_tokens / static_cast<double>(run.records.size()));
      SteadyWindow window;
      window.t0 = a;
      window.t1 = b;
      window.saturation_fraction = 0.0;
      window.tokens_steady = static_cast<long>(std::llround(tokens));
      window.energy_steady_j = energy;
      res.steady_window = window;
      res.flags.push_back("non-steady");
      res.flags.push_back("estimated-tokens");
    }
  } else {
    std::vector<BatchGroup> groups = run.batch_groups;
    if (groups.empty()) groups = derive_batch_groups(run.records, run.iterations);
    const EnergyAccount account = diffusion_account(run.traces, groups);
    res.accounting_method = to_string(account.method);
    res.energy_per_request_j = account.energy_per_request_j;
    res.throughput = static_cast<double>(run.records.size()) / (t_hi - t_lo);
  }
  return res;
}

RunResult aggregate(const std::vector<RunResult>& reps) {
  RunResult agg = reps.front();  // method, window, flags from the first pass
  const double n = static_cast<double>(reps.size());
  auto mean = [&](auto pick) {
    double acc = 0.0;
    for (const auto& r : reps) acc += pick(r);
    return acc / n;
  };
  agg.energy_per_request_j = mean([](const RunResult& r) { return r.energy_per_request_j; });
  if (agg.energy_per_token_j.has_value()) {
    agg.energy_per_token_j = mean([](const RunResult& r) { return r.energy_per_token_j.value(); });
  }
  agg.mean_ttft_s = mean([](const RunResult& r) { return r.mean_ttft_s; });
  agg.mean_tpot_s = mean([](const RunResult& r) { return r.mean_tpot_s; });
  agg.mean_e2e_s = mean([](const RunResult& r) { return r.mean_e2e_s; });
  agg.throughput = mean([](const RunResult& r) { return r.throughput; });
  agg.avg_power_w = mean([](const RunResult& r) { return r.avg_power_w; });
  agg.total_energy_j = mean([](const RunResult& r) { return r.total_energy_j; });
  agg.repetitions = static_cast<int>(reps.size());
  return agg;
}

}  // namespace

bool is_token_task(const std::string& task) { return task == "chat" || task == "code"; }

std::string BenchmarkConfig::config_id() const {
  char buf[64];
  std::string canonical = task + "|" + model_id + "|" + device_profile + "|" +
                          std::to_string(tp_degree) + "|" + std::to_string(max_batch_size) + "|" +
                          std::to_string(denoising_steps) + "|" + std::to_string(resolution) +
                          "|" + to_string(preemption);
  if (power_limit_w.has_value()) {
    std::snprintf(buf, sizeof buf, "|%.17g", *power_limit_w);
    canonical += buf;
  }
  const std::uint64_t h = fnv1a(canonical);
  std::snprintf(buf, sizeof buf, "%08x",
                static_cast<unsigned>((h >> 32) ^ (h & 0xffffffffULL)));

  std::string slug = sanitize(task) + "-" + sanitize(model_id) + "-" + sanitize(device_profile) +
                     "-tp" + std::to_string(tp_degree) + "-b" + std::to_string(max_batch_size);
  if (!is_token_task(task)) {
    slug += "-s" + std::to_string(denoising_steps) + "-r" + std::to_string(resolution);
  }
  slug += "-" + to_string(preemption);
  return slug + "-" + buf;
}

std::vector<BenchmarkConfig> expand_grid(const SweepSpec& spec) {
  for (const auto& [dim, values] : spec.grid) {
    if (!known_dimensions().count(dim)) {
      throw UnknownDimension("unknown grid dimension '" + dim + "'");
    }
    if (values.empty()) throw EmptyGrid("dimension '" + dim + "' has no values");
  }
  for (const auto& c : spec.constraints) {
    if (!known_dimensions().count(c.dimension)) {
      throw UnknownDimension("constraint references unknown dimension '" + c.dimension + "'");
    }
  }

  // map order is lexicographic already; sort each dimension's values
  std::vector<std::pair<std::string, std::vector<std::string>>> dims;
  for (const auto& [dim, values] : spec.grid) {
    std::vector<std::string> sorted = values;
    if (numeric_dimension(dim)) {
      std::sort(sorted.begin(), sorted.end(), [&](const std::string& a, const std::string& b) {
        return parse_numeric(dim, a) < parse_numeric(dim, b);
      });
    } else {
      std::sort(sorted.begin(), sorted.end());
    }
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    dims.emplace_back(dim, std::move(sorted));
  }

  BenchmarkConfig base;
  base.task = spec.task;
  if (!is_token_task(spec.task)) base.model_id = "synth-diffusion";

  std::vector<BenchmarkConfig> configs;
  std::vector<size_t> odo(dims.size(), 0);
  while (true) {
    BenchmarkConfig config = base;
    for (size_t i = 0; i < dims.size(); ++i) {
      apply_value(config, dims[i].first, dims[i].second[odo[i]]);
    }
    bool keep = true;
    for (const auto& c : spec.constraints) {
      if (!satisfies(config, c)) {
        keep = false;
        break;
      }
    }
    if (keep) configs.push_back(std::move(config));

    if (dims.empty()) break;
    bool wrapped = true;
    for (size_t i = dims.size(); i-- > 0;) {
      if (++odo[i] < dims[i].second.size()) {
        wrapped = false;
        break;
      }
      odo[i] = 0;
    }
    if (wrapped) break;
  }

  if (configs.empty()) throw EmptyGrid("constraints eliminated every configuration");
  return configs;
}

std::vector<RunResult> run_sweep(const std::vector<BenchmarkConfig>& configs,
                                 const SweepSpec& spec, Backend& backend,
                                 std::ostream* progress) {
  std::vector<RunResult> results;
  results.reserve(configs.size());
  size_t k = 0;
  for (const auto& config : configs) {
    ++k;
    RunResult result;
    result.config = config;
    try {
      std::vector<RunResult> reps;
      for (int rep = 0; rep < spec.accounting.repetitions; ++rep) {
        LeaseGuard guard{backend, backend.lease()};
        BackendRun run = backend.run(config, spec, guard.token,
                                     spec.seed + static_cast<std::uint64_t>(rep));
        reps.push_back(analyze_run(config, spec, run));
      }
      result = aggregate(reps);
    } catch (const BackendUnavailable&) {
      throw;  // nothing further will work; the caller decides what to do
    } catch (const Error& e) {
      result.status = "failed";
      result.error = e.what();
    }
    if (progress) {
      *progress << "[" << k << "/" << configs.size() << "] " << config.config_id() << " "
                << result.status;
      if (result.status == "ok") {
        char buf[48];
        std::snprintf(buf, sizeof buf, " energy/request %.6g J", result.energy_per_request_j);
        *progress << buf;
      } else {
        *progress << " (" << result.error << ")";
      }
      *progress << "\n";
    }
    results.push_back(std::move(result));
  }
  return results;
}

}  // namespace wattbench
