#include "wattbench/backends.hpp"

#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "wattbench/errors.hpp"

namespace wattbench {

namespace {

using nlohmann::json;

SimWorkload workload_for(const BenchmarkConfig& config, const SweepSpec& spec,
                         std::uint64_t seed) {
  if (is_token_task(config.task)) {
    SynthSpec synth;
    synth.n_requests = spec.workload.n_requests;
    synth.input_mean = spec.workload.input_mean;
    synth.input_pareto_alpha = spec.workload.input_pareto_alpha;
    synth.output_mean = spec.workload.output_mean;
    return synth_workload(synth, seed);
  }
  SimWorkload w;
  w.kind = SimWorkload::Kind::diffusion;
  for (long i = 0; i < spec.workload.n_requests; ++i) {
    w.diffusion.push_back({"img" + std::to_string(i), config.denoising_steps, config.resolution});
  }
  return w;
}

}  // namespace

std::string Backend::lease() {
  if (lease_.has_value()) {
    throw BackendUnavailable("backend '" + name() + "' is already leased (token " + *lease_ +
                             ")");
  }
  probe();
  lease_ = name() + "-lease-" + std::to_string(++lease_counter_);
  return *lease_;
}

void Backend::release(const std::string& token) {
  if (!lease_.has_value() || *lease_ != token) {
    throw InvalidArgument("release with a token that does not hold the lease");
  }
  lease_.reset();
}

BackendRun Backend::run(const BenchmarkConfig& config, const SweepSpec& spec,
                        const std::string& token, std::uint64_t seed) {
  if (!lease_.has_value() || *lease_ != token) {
    throw BackendUnavailable("run attempted without holding the backend lease");
  }
  return execute(config, spec, seed);
}

BackendRun SimulatorBackend::execute(const BenchmarkConfig& config, const SweepSpec& spec,
                                     std::uint64_t seed) {
  const DeviceProfile& profile = device_profile(config.device_profile);
  SimConfig sim;
  sim.max_batch_size = config.max_batch_size;
  sim.tp_degree = config.tp_degree;
  sim.preemption = config.preemption;
  sim.kv_budget_tokens = spec.workload.kv_budget_tokens;
  sim.kv_tokens_per_request_token = spec.workload.kv_tokens_per_request_token;
  sim.sampling_interval_s = spec.accounting.sampling_interval_s;

  const SimWorkload workload = workload_for(config, spec, seed);
  SimResult sim_result = is_token_task(config.task)
                             ? simulate_llm(sim, workload, profile.latency, profile.power)
                             : simulate_diffusion(sim, workload, profile.latency, profile.power);

  BackendRun run;
  run.traces = std::move(sim_result.traces);
  run.records = std::move(sim_result.records);
  run.iterations = std::move(sim_result.iterations);
  run.batch_groups = std::move(sim_result.batch_groups);
  run.preemption_count = sim_result.preemption_count;
  return run;
}

HttpBackend::HttpBackend(std::string endpoint, std::string power_trace_path,
                         std::string bearer_token)
    : endpoint_(std::move(endpoint)),
      power_trace_path_(std::move(power_trace_path)),
      bearer_token_(std::move(bearer_token)) {}

void HttpBackend::probe() {
  httplib::Client cli(endpoint_);
  cli.set_connection_timeout(5, 0);
  // any HTTP response at all counts as alive; only a dead socket fails
  if (!cli.Get("/")) {
    throw BackendUnavailable("endpoint " + endpoint_ + " is unreachable");
  }
}

BackendRun HttpBackend::execute(const BenchmarkConfig& config, const SweepSpec& spec,
                                std::uint64_t seed) {
  if (!is_token_task(config.task)) {
    throw InvalidArgument("the http backend drives text-generation endpoints only");
  }

  // read the operator-captured trace first; without it the run is worthless
  std::ifstream trace_file(power_trace_path_);
  if (!trace_file) {
    throw MalformedRecord("power trace file '" + power_trace_path_ + "' is unreadable");
  }
  ParsedPowerFile parsed = parse_power_trace(trace_file);
  if (parsed.traces.empty()) {
    throw MalformedRecord("power trace file '" + power_trace_path_ + "' holds no samples");
  }

  const SimWorkload workload = workload_for(config, spec, seed);
  const size_t n = workload.llm.size();
  std::vector<RequestRecord> records(n);
  std::vector<std::string> failures(n);

  const auto epoch = std::chrono::steady_clock::now();
  auto now_s = [&epoch]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch).count();
  };

  auto worker = [&](size_t i) {
    const LlmRequestSpec& req = workload.llm[i];
    RequestRecord& rec = records[i];
    rec.request_id = req.id;
    rec.input_tokens = req.input_tokens;
    try {
      httplib::Client cli(endpoint_);
      cli.set_connection_timeout(5, 0);
      cli.set_read_timeout(300, 0);

      httplib::Request http;
      http.method = "POST";
      http.path = "/v1/completions";
      http.set_header("Content-Type", "application/json");
      if (!bearer_token_.empty()) {
        http.set_header("Authorization", "Bearer " + bearer_token_);
      }
      http.body = json{{"prompt", req.id},
                       {"max_tokens", req.output_tokens},
                       {"stream", true}}
                      .dump();

      long tokens = 0;
      std::string pending;
      rec.submit_t = now_s();
      http.content_receiver = [&](const char* data, size_t len, std::uint64_t, std::uint64_t) {
        pending.append(data, len);
        size_t nl;
        while ((nl = pending.find('\n')) != std::string::npos) {
          const std::string line = pending.substr(0, nl);
          pending.erase(0, nl + 1);
          if (line.rfind("data: ", 0) != 0 || line == "data: [DONE]") continue;
          if (++tokens == 1) rec.first_token_t = now_s();
        }
        return true;
      };

      httplib::Result result = cli.send(http);
      rec.complete_t = now_s();
      if (!result) {
        failures[i] = "transport error " + httplib::to_string(result.error());
        return;
      }
      if (result->status != 200) {
        failures[i] = "HTTP " + std::to_string(result->status);
        return;
      }
      if (tokens == 0) {
        failures[i] = "no tokens streamed";
        return;
      }
      rec.output_tokens = tokens;
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(n);
  for (size_t i = 0; i < n; ++i) threads.emplace_back(worker, i);
  for (auto& t : threads) t.join();

  for (size_t i = 0; i < n; ++i) {
    if (!failures[i].empty()) {
      throw Error("request '" + workload.llm[i].id + "' failed: " + failures[i]);
    }
  }

  BackendRun run;
  run.traces = std::move(parsed.traces);
  run.records = std::move(records);
  run.external_trace = true;
  return run;
}

}  // namespace wattbench
