#include "wattbench/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <ostream>
#include <string>

#include "CLI11.hpp"
#include "wattbench/accounting.hpp"
#include "wattbench/backends.hpp"
#include "wattbench/errors.hpp"
#include "wattbench/meter.hpp"
#include "wattbench/optimizer.hpp"
#include "wattbench/report.hpp"
#include "wattbench/simulator.hpp"
#include "wattbench/store.hpp"
#include "wattbench/sweep.hpp"
#include "wattbench/sweep_spec.hpp"
#include "wattbench/telemetry.hpp"

namespace wattbench {

namespace {

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const NoFeasiblePoint*>(&e)) return 3;
  if (dynamic_cast<const EmptyInput*>(&e) || dynamic_cast<const EmptyTrace*>(&e) ||
      dynamic_cast<const EmptyBatch*>(&e))
    return 4;
  if (dynamic_cast<const SpecParseError*>(&e) || dynamic_cast<const MalformedRecord*>(&e) ||
      dynamic_cast<const ConstraintParseError*>(&e) ||
      dynamic_cast<const UnknownDimension*>(&e) || dynamic_cast<const EmptyGrid*>(&e) ||
      dynamic_cast<const UnsupportedFormat*>(&e) || dynamic_cast<const InvalidArgument*>(&e) ||
      dynamic_cast<const InvalidDistributionParams*>(&e))
    return 2;
  return 1;
}

ResultStore open_store(const std::string& path) {
  if (path.empty())
    throw InvalidArgument("no result store given; pass --store or set WATTBENCH_STORE");
  return ResultStore(path);
}

std::unique_ptr<Backend> make_backend(const SweepSpec& spec) {
  if (spec.backend == "simulator") return std::make_unique<SimulatorBackend>();
  return std::make_unique<HttpBackend>(spec.endpoint, spec.power_trace_path, spec.bearer_token);
}

std::string resolve_metric(const std::string& requested, const std::vector<RunResult>& results) {
  return requested == "auto" ? default_metric(results) : requested;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write to '" + path + "'");
  return out;
}

// ---------------------------------------------------------------------------
// run

struct RunOptions {
  std::string spec_path;
  std::string store_path;
  bool dry_run = false;
  bool strict = false;
  std::optional<std::uint64_t> seed;
};

int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  std::ifstream in(opt.spec_path);
  if (!in) throw SpecParseError("cannot open spec file '" + opt.spec_path + "'");
  SweepSpec spec = parse_sweep_spec(in);
  if (opt.seed) spec.seed = *opt.seed;

  std::vector<BenchmarkConfig> configs = expand_grid(spec);
  if (opt.dry_run) {
    for (const auto& c : configs) out << c.config_id() << "\n";
    out << configs.size() << " configurations\n";
    return 0;
  }

  ResultStore store = open_store(opt.store_path);
  std::unique_ptr<Backend> backend = make_backend(spec);
  std::vector<RunResult> results = run_sweep(configs, spec, *backend, &out);

  long failed = 0;
  for (const auto& r : results) {
    store.put(r);
    if (r.status != "ok") {
      ++failed;
      err << "warning: " << r.config.config_id() << " failed: " << r.error << "\n";
    }
  }
  out << (results.size() - failed) << " ok, " << failed << " failed -> " << opt.store_path
      << "\n";
  return (opt.strict && failed > 0) ? 1 : 0;
}

// ---------------------------------------------------------------------------
// recommend

struct RecommendOptions {
  std::string store_path;
  std::string metric = "auto";
  std::string target;
};

int cmd_recommend(const RecommendOptions& opt, std::ostream& out, std::ostream& err) {
  ResultStore store = open_store(opt.store_path);
  std::vector<RunResult> results = store.load_all();
  if (results.empty()) throw EmptyInput("store '" + opt.store_path + "' has no runs");

  const std::string metric = resolve_metric(opt.metric, results);
  const double target_s = parse_duration_s(opt.target);

  std::vector<OperatingPoint> points;
  for (const auto& r : results) {
    if (r.status != "ok") continue;
    points.push_back({r.config.config_id(), metric_value(r, metric), r.energy_per_request_j});
  }
  if (points.empty()) throw EmptyInput("store has no successful runs");

  try {
    Recommendation rec = recommend(points, target_s);
    out << "metric = " << metric << "\n";
    out << "target_s = " << g6(target_s) << "\n";
    out << "baseline = " << rec.baseline.config_id << " (latency " << g6(rec.baseline.latency_s)
        << " s, energy/request " << g6(rec.baseline.energy_per_request_j) << " J)\n";
    out << "chosen = " << rec.chosen.config_id << " (latency " << g6(rec.chosen.latency_s)
        << " s, energy/request " << g6(rec.chosen.energy_per_request_j) << " J)\n";
    out << "savings_fraction = " << g6(rec.energy_savings_fraction) << "\n";
    return 0;
  } catch (const NoFeasiblePoint& e) {
    err << "no configuration meets target " << g6(target_s) << " s; minimum achievable "
        << metric << " = " << g6(e.min_achievable_latency_s) << " s\n";
    return 3;
  }
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
  std::string store_path;
  std::string format = "csv";
  std::string metric = "auto";
  std::string out_path;
};

int cmd_report(const ReportOptions& opt, std::ostream& out) {
  ResultStore store = open_store(opt.store_path);
  std::vector<RunResult> results = store.load_all();
  // render before opening any output file so an empty store writes nothing
  const std::string body =
      render_report(results, opt.format, resolve_metric(opt.metric, results));
  if (opt.out_path.empty()) {
    out << body;
  } else {
    open_output(opt.out_path) << body;
    out << "wrote " << opt.out_path << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
  std::string trace_path;
  std::string log_path;
  std::string gap_tolerance;  // duration text, empty = default
  double min_fraction = 0.10;
  long max_batch = 0;  // 0 = peak observed batch
  bool verbose = false;
};

int cmd_analyze(const AnalyzeOptions& opt, std::ostream& out) {
  std::ifstream trace_in(opt.trace_path);
  if (!trace_in) throw InvalidArgument("cannot open trace file '" + opt.trace_path + "'");
  std::ifstream log_in(opt.log_path);
  if (!log_in) throw InvalidArgument("cannot open log file '" + opt.log_path + "'");

  const ParsedPowerFile power = parse_power_trace(trace_in);
  const ParsedServingLog log = parse_serving_log(log_in);
  if (log.records.empty()) throw EmptyInput("serving log has no completed requests");
  for (const auto& id : log.incomplete) out << "note: request '" << id << "' never completed\n";

  const bool diffusion =
      std::any_of(log.iterations.begin(), log.iterations.end(),
                  [](const IterationLog& it) { return it.phase == Phase::denoise_step; });

  EnergyAccount account;
  std::vector<std::string> flags;
  if (diffusion) {
    account = diffusion_account(power.traces,
                                derive_batch_groups(log.records, log.iterations));
  } else if (!log.iterations.empty()) {
    const BatchTimeline timeline = batch_timeline(log.iterations);
    long max_batch = opt.max_batch;
    if (max_batch <= 0)
      for (const auto& it : log.iterations) max_batch = std::max(max_batch, it.batch_size);
    SteadyParams params;
    params.min_fraction = opt.min_fraction;
    if (!opt.gap_tolerance.empty())
      params.gap_tolerance_s = parse_duration_s(opt.gap_tolerance);
    SteadyWindow window;
    try {
      window = detect_steady_state(timeline, max_batch, params);
    } catch (const SteadyStateNotFound&) {
      window = central_fallback_window(timeline, max_batch);
      flags.push_back("non-steady");
    }
    account = llm_account(power.traces, log.records, log.iterations, window);
  } else {
    // no iteration log (external capture): central half of the request span
    double r0 = log.records.front().submit_t, r1 = log.records.front().complete_t;
    for (const auto& r : log.records) {
      r0 = std::min(r0, r.submit_t);
      r1 = std::max(r1, r.complete_t);
    }
    double a = r0 + 0.25 * (r1 - r0), b = r1 - 0.25 * (r1 - r0);
    for (const auto& trace : power.traces) {
      a = std::max(a, trace.samples().front().t);
      b = std::min(b, trace.samples().back().t);
    }
    if (a >= b)
      throw WindowOutOfRange("power trace does not overlap the central request window");
    const double tokens = estimate_tokens_in_window(log.records, a, b);
    if (tokens <= 0.0) throw ZeroSteadyTokens("no output tokens inside the central window");
    const double energy = merge_energy(power.traces, a, b);
    account.method = AccountingMethod::steady_state;
    account.energy_per_token_j = energy / tokens;
    double mean_output = 0.0;
    for (const auto& r : log.records) mean_output += static_cast<double>(r.output_tokens);
    mean_output /= static_cast<double>(log.records.size());
    account.energy_per_request_j = *account.energy_per_token_j * mean_output;
    SteadyWindow window;
    window.t0 = a;
    window.t1 = b;
    window.tokens_steady = std::lround(tokens);
    window.energy_steady_j = energy;
    account.steady = window;
    flags.push_back("non-steady");
    flags.push_back("estimated-tokens");
  }

  const LatencySummary latency = latency_metrics(log.records, !diffusion);
  out << "records = " << log.records.size() << "\n";
  out << "method = " << to_string(account.method) << "\n";
  if (account.steady) {
    out << "window = [" << g6(account.steady->t0) << ", " << g6(account.steady->t1) << "] s\n";
    out << "saturation_fraction = " << g6(account.steady->saturation_fraction) << "\n";
    out << "tokens_steady = " << account.steady->tokens_steady << "\n";
    out << "energy_steady_j = " << g6(account.steady->energy_steady_j) << "\n";
  }
  if (account.energy_per_token_j)
    out << "energy_per_token_j = " << g6(*account.energy_per_token_j) << "\n";
  out << "energy_per_request_j = " << g6(account.energy_per_request_j) << "\n";
  if (!diffusion) {
    out << "mean_ttft_s = " << g6(latency.mean_ttft_s) << "\n";
    out << "mean_tpot_s = " << g6(latency.mean_tpot_s) << "\n";
  }
  out << "mean_e2e_s = " << g6(latency.mean_e2e_s) << "\n";
  if (power.tdp_w) {
    double t0 = power.traces.front().samples().front().t;
    double t1 = power.traces.front().samples().back().t;
    for (const auto& trace : power.traces) {
      t0 = std::min(t0, trace.samples().front().t);
      t1 = std::max(t1, trace.samples().back().t);
    }
    out << "tdp_overestimate_ratio = "
        << g6(tdp_overestimate_ratio(power.traces, t0, t1, *power.tdp_w,
                                     static_cast<int>(power.traces.size())))
        << "\n";
  }
  if (!flags.empty()) {
    out << "flags = ";
    for (size_t i = 0; i < flags.size(); ++i) out << (i ? ";" : "") << flags[i];
    out << "\n";
  }
  if (opt.verbose) {
    for (const auto& [id, energy] : account.per_request_energy_j)
      out << "request " << id << " energy_j = " << g6(energy) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string task = "chat";
  std::string profile = "highpower";
  int tp = 1;
  long batch = 8;
  std::string preemption = "recompute";
  double kv_budget = 1 << 20;
  double kv_per_token = 1.0;
  double swap_bandwidth = 80000.0;
  std::string sampling_interval = "5ms";
  long steps = 25;
  long resolution = 512;
  long n = 8;
  double input_mean = 256.0;
  double alpha = 2.5;
  double output_mean = 256.0;
  std::string workload_path;
  std::string trace_out;
  std::string log_out;
  std::string ledger_out;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateOptions& opt, std::ostream& out) {
  const DeviceProfile& profile = device_profile(opt.profile);

  SimConfig config;
  config.max_batch_size = opt.batch;
  config.tp_degree = opt.tp;
  config.kv_budget_tokens = opt.kv_budget;
  config.kv_tokens_per_request_token = opt.kv_per_token;
  config.preemption = preemption_mode_from_string(opt.preemption);
  config.swap_bandwidth_tokens_per_s = opt.swap_bandwidth;
  config.sampling_interval_s = parse_duration_s(opt.sampling_interval);
  config.seed = opt.seed;

  SimWorkload workload;
  if (!opt.workload_path.empty()) {
    std::ifstream in(opt.workload_path);
    if (!in) throw InvalidArgument("cannot open workload file '" + opt.workload_path + "'");
    workload = parse_workload(in);
    const bool want_llm = is_token_task(opt.task);
    if (want_llm != (workload.kind == SimWorkload::Kind::llm))
      throw InvalidArgument("workload file kind does not match task '" + opt.task + "'");
  } else if (is_token_task(opt.task)) {
    SynthSpec synth;
    synth.n_requests = opt.n;
    synth.input_mean = opt.input_mean;
    synth.input_pareto_alpha = opt.alpha;
    synth.output_mean = opt.output_mean;
    workload = synth_workload(synth, opt.seed);
  } else {
    workload.kind = SimWorkload::Kind::diffusion;
    for (long i = 0; i < opt.n; ++i)
      workload.diffusion.push_back({"img" + std::to_string(i), opt.steps, opt.resolution});
  }

  const SimResult result =
      workload.kind == SimWorkload::Kind::llm
          ? simulate_llm(config, workload, profile.latency, profile.power)
          : simulate_diffusion(config, workload, profile.latency, profile.power);

  double total_energy = 0.0;
  for (const auto& entry : result.ledger) total_energy += entry.energy_j;

  out << "requests = " << result.records.size() << "\n";
  out << "end_t_s = " << g6(result.end_t) << "\n";
  out << "total_energy_j = " << g6(total_energy) << "\n";
  out << "preemptions = " << result.preemption_count << "\n";
  if (!opt.trace_out.empty()) {
    std::ofstream f = open_output(opt.trace_out);
    write_power_trace(f, result.traces, "run-epoch", profile.power.max_w);
    out << "wrote " << opt.trace_out << "\n";
  }
  if (!opt.log_out.empty()) {
    std::ofstream f = open_output(opt.log_out);
    write_serving_log(f, result.records, result.iterations);
    out << "wrote " << opt.log_out << "\n";
  }
  if (!opt.ledger_out.empty()) {
    std::ofstream f = open_output(opt.ledger_out);
    write_ledger(f, result.ledger);
    out << "wrote " << opt.ledger_out << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// synth-dataset

struct SynthOptions {
  long n = 32;
  double input_mean = 256.0;
  double alpha = 2.5;
  double output_mean = 256.0;
  std::string out_path;
  std::uint64_t seed = 0;
};

int cmd_synth_dataset(const SynthOptions& opt, std::ostream& out) {
  SynthSpec synth;
  synth.n_requests = opt.n;
  synth.input_mean = opt.input_mean;
  synth.input_pareto_alpha = opt.alpha;
  synth.output_mean = opt.output_mean;
  const SimWorkload workload = synth_workload(synth, opt.seed);
  if (opt.out_path.empty()) {
    write_workload(out, workload);
  } else {
    std::ofstream f = open_output(opt.out_path);
    write_workload(f, workload);
    out << "wrote " << opt.out_path << " (" << workload.llm.size() << " requests)\n";
  }
  return 0;
}

}  // namespace

double parse_duration_s(const std::string& text) {
  std::string number = text;
  double scale = 1.0;
  if (number.size() > 2 && number.substr(number.size() - 2) == "ms") {
    scale = 1e-3;
    number.resize(number.size() - 2);
  } else if (number.size() > 1 && number.back() == 's') {
    number.resize(number.size() - 1);
  }
  char* end = nullptr;
  const double value = std::strtod(number.c_str(), &end);
  if (end != number.c_str() + number.size() || number.empty() || !std::isfinite(value) ||
      value < 0.0)
    throw InvalidArgument("bad duration '" + text + "' (expected e.g. 250ms, 0.25s, 0.25)");
  return value * scale;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"per-request energy benchmarking for generative model serving"};
  app.name("wattbench");
  app.require_subcommand(1);

  std::string store_path;
  std::uint64_t seed = 0;
  bool verbose = false;
  app.add_option("--store", store_path, "result store directory")->envname("WATTBENCH_STORE");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "workload RNG seed");
  app.add_flag("--verbose", verbose, "extra per-request detail where available");

  RunOptions run_opt;
  CLI::App* run = app.add_subcommand("run", "execute a sweep spec and persist the results");
  run->add_option("--spec", run_opt.spec_path, "sweep spec file")->required();
  run->add_flag("--dry-run", run_opt.dry_run, "print the expanded grid without executing");
  run->add_flag("--strict", run_opt.strict, "exit nonzero if any configuration fails");

  RecommendOptions rec_opt;
  CLI::App* rec =
      app.add_subcommand("recommend", "cheapest stored configuration meeting a latency target");
  rec->add_option("--metric", rec_opt.metric, "latency metric: tpot, e2e, ttft, or auto");
  rec->add_option("--target", rec_opt.target, "latency budget (e.g. 120ms, 0.5s)")->required();

  ReportOptions rep_opt;
  CLI::App* rep = app.add_subcommand("report", "render the store as csv, md, or svg");
  rep->add_option("--format", rep_opt.format, "csv (default), md, or svg");
  rep->add_option("--metric", rep_opt.metric, "latency axis: tpot, e2e, ttft, or auto");
  rep->add_option("--out", rep_opt.out_path, "output file (default: stdout)");

  AnalyzeOptions an_opt;
  CLI::App* analyze =
      app.add_subcommand("analyze", "account energy over a power trace and serving log");
  analyze->add_option("--trace", an_opt.trace_path, "power trace file")->required();
  analyze->add_option("--log", an_opt.log_path, "serving log file")->required();
  analyze->add_option("--gap-tolerance", an_opt.gap_tolerance,
                      "bridgeable gap inside the steady window (duration)");
  analyze->add_option("--min-fraction", an_opt.min_fraction,
                      "minimum steady window span fraction");
  analyze->add_option("--max-batch", an_opt.max_batch,
                      "saturation batch size (default: peak observed)");

  SimulateOptions sim_opt;
  CLI::App* sim = app.add_subcommand("simulate", "run one configuration and emit artifacts");
  sim->add_option("--task", sim_opt.task, "chat, code, t2i, t2v, or i2v");
  sim->add_option("--profile", sim_opt.profile, "device profile name");
  sim->add_option("--tp", sim_opt.tp, "tensor parallel degree");
  sim->add_option("--batch", sim_opt.batch, "max batch size");
  sim->add_option("--preemption", sim_opt.preemption, "recompute or swap");
  sim->add_option("--kv-budget", sim_opt.kv_budget, "KV cache budget in tokens");
  sim->add_option("--kv-per-token", sim_opt.kv_per_token, "KV tokens per request token");
  sim->add_option("--swap-bandwidth", sim_opt.swap_bandwidth, "swap tokens per second");
  sim->add_option("--sampling-interval", sim_opt.sampling_interval, "meter period (duration)");
  sim->add_option("--steps", sim_opt.steps, "denoising steps (image/video tasks)");
  sim->add_option("--resolution", sim_opt.resolution, "output resolution (image/video tasks)");
  sim->add_option("--n", sim_opt.n, "synthetic request count");
  sim->add_option("--input-mean", sim_opt.input_mean, "mean prompt tokens");
  sim->add_option("--alpha", sim_opt.alpha, "prompt Pareto shape");
  sim->add_option("--output-mean", sim_opt.output_mean, "mean output tokens");
  sim->add_option("--workload", sim_opt.workload_path, "workload file (overrides synthesis)");
  sim->add_option("--trace-out", sim_opt.trace_out, "write the power trace here");
  sim->add_option("--log-out", sim_opt.log_out, "write the serving log here");
  sim->add_option("--ledger-out", sim_opt.ledger_out, "write the energy ledger here");

  SynthOptions synth_opt;
  CLI::App* synth = app.add_subcommand("synth-dataset", "generate a synthetic token workload");
  synth->add_option("--n", synth_opt.n, "request count");
  synth->add_option("--input-mean", synth_opt.input_mean, "mean prompt tokens");
  synth->add_option("--alpha", synth_opt.alpha, "prompt Pareto shape");
  synth->add_option("--output-mean", synth_opt.output_mean, "mean output tokens");
  synth->add_option("--out", synth_opt.out_path, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      run_opt.store_path = store_path;
      if (seed_opt->count() > 0) run_opt.seed = seed;
      return cmd_run(run_opt, out, err);
    }
    if (rec->parsed()) {
      rec_opt.store_path = store_path;
      return cmd_recommend(rec_opt, out, err);
    }
    if (rep->parsed()) {
      rep_opt.store_path = store_path;
      return cmd_report(rep_opt, out);
    }
    if (analyze->parsed()) {
      an_opt.verbose = verbose;
      return cmd_analyze(an_opt, out);
    }
    if (sim->parsed()) {
      sim_opt.seed = seed;
      return cmd_simulate(sim_opt, out);
    }
    if (synth->parsed()) {
      synth_opt.seed = seed;
      return cmd_synth_dataset(synth_opt, out);
    }
    err << "error: no command given\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace wattbench
