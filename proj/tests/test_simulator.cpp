#include "wattbench/simulator.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "wattbench/errors.hpp"
#include "wattbench/meter.hpp"

using namespace wattbench;

namespace {

// zero-cost prefill so decode arithmetic can be checked by hand
LatencyModel bare_decode_lm() {
  LatencyModel lm;
  lm.decode_base_s = 5e-3;
  lm.decode_per_seq_s = 5e-4;
  return lm;
}

PowerModel flat_pm() {
  PowerModel pm;
  pm.idle_w = 100.0;
  pm.max_w = 400.0;
  return pm;
}

SimWorkload uniform_llm(long n, long input_tokens, long output_tokens) {
  SimWorkload w;
  w.kind = SimWorkload::Kind::llm;
  for (long i = 0; i < n; ++i) {
    w.llm.push_back({"r" + std::to_string(i), input_tokens, output_tokens});
  }
  return w;
}

double ledger_total(const std::vector<LedgerEntry>& ledger, const std::string& phase = "") {
  double acc = 0.0;
  for (const auto& e : ledger) {
    if (phase.empty() || e.phase == phase) acc += e.energy_j;
  }
  return acc;
}

long emitted_tokens(const SimResult& res) {
  long acc = 0;
  for (const auto& it : res.iterations) acc += it.tokens_emitted;
  return acc;
}

}  // namespace

TEST_CASE("full batch decodes in lockstep") {
  // 8 requests, cap 8, 100 tokens each, no prefill cost: every iteration
  // takes 5ms + 8 * 0.5ms = 9ms, and the run is 100 iterations long.
  SimConfig cfg;
  cfg.max_batch_size = 8;
  cfg.sampling_interval_s = 1e-3;
  SimResult res = simulate_llm(cfg, uniform_llm(8, 32, 100), bare_decode_lm(), flat_pm());

  CHECK(res.end_t == doctest::Approx(0.9).epsilon(1e-12));
  REQUIRE(res.iterations.size() == 100);
  for (const auto& it : res.iterations) {
    CHECK(it.phase == Phase::decode);
    CHECK(it.batch_size == 8);
    CHECK(it.tokens_emitted == 8);
    CHECK(it.t_end - it.t_start == doctest::Approx(9e-3).epsilon(1e-12));
  }
  for (const auto& rec : res.records) {
    REQUIRE(rec.first_token_t.has_value());
    CHECK(*rec.first_token_t == doctest::Approx(9e-3).epsilon(1e-12));
    CHECK(rec.complete_t == doctest::Approx(0.9).epsilon(1e-12));
  }
  CHECK(res.preemption_count == 0);
}

TEST_CASE("batch cap splits the workload into waves") {
  // Same 8 requests under cap 4: two back-to-back waves of 100 iterations at
  // 5ms + 4 * 0.5ms = 7ms each.
  SimConfig cfg;
  cfg.max_batch_size = 4;
  cfg.sampling_interval_s = 1e-3;
  SimResult res = simulate_llm(cfg, uniform_llm(8, 32, 100), bare_decode_lm(), flat_pm());

  CHECK(res.end_t == doctest::Approx(1.4).epsilon(1e-12));
  REQUIRE(res.iterations.size() == 200);
  for (const auto& it : res.iterations) {
    CHECK(it.batch_size == 4);
    CHECK(it.t_end - it.t_start == doctest::Approx(7e-3).epsilon(1e-12));
  }
  for (size_t i = 0; i < 4; ++i) {
    CHECK(res.records[i].complete_t == doctest::Approx(0.7).epsilon(1e-12));
  }
  for (size_t i = 4; i < 8; ++i) {
    CHECK(res.records[i].first_token_t.value() == doctest::Approx(0.707).epsilon(1e-12));
    CHECK(res.records[i].complete_t == doctest::Approx(1.4).epsilon(1e-12));
  }
}

TEST_CASE("every generated token shows up in exactly one iteration") {
  const DeviceProfile& prof = device_profile("highpower");
  SimWorkload w = synth_workload({24, 128.0, 2.5, 100.0}, 7);
  long expected = 0;
  for (const auto& r : w.llm) expected += r.output_tokens;

  SimConfig cfg;
  cfg.max_batch_size = 6;
  SimResult res = simulate_llm(cfg, w, prof.latency, prof.power);

  CHECK(emitted_tokens(res) == expected);
  CHECK(res.preemption_count == 0);
  for (const auto& it : res.iterations) {
    CHECK(it.batch_size >= 1);
    CHECK(it.batch_size <= 6);
    CHECK(it.t_end > it.t_start);
  }
  for (const auto& rec : res.records) {
    REQUIRE(rec.first_token_t.has_value());
    CHECK(*rec.first_token_t > 0.0);
    CHECK(rec.complete_t >= *rec.first_token_t);
  }
}

TEST_CASE("emitted traces reproduce the internal energy ledger") {
  const DeviceProfile& prof = device_profile("highpower");
  SimConfig cfg;
  cfg.max_batch_size = 4;
  cfg.tp_degree = 2;
  SimResult res = simulate_llm(cfg, synth_workload({12, 96.0, 2.5, 80.0}, 3), prof.latency,
                               prof.power);

  REQUIRE(res.traces.size() == 2);
  const double ledger_j = ledger_total(res.ledger);
  const double metered_j =
      merge_energy(res.traces, res.traces[0].first_t(), res.traces[0].last_t());
  CHECK(metered_j == doctest::Approx(ledger_j).epsilon(1e-6));

  // individual ledger entries are visible through the meter too
  for (size_t i = 0; i < std::min<size_t>(res.ledger.size(), 8); ++i) {
    const auto& e = res.ledger[i];
    CHECK(merge_energy(res.traces, e.t_start, e.t_end) ==
          doctest::Approx(e.energy_j).epsilon(1e-6));
  }
  const double p_cap = prof.power.max_w + 1e-9;
  for (const auto& tr : res.traces) {
    for (const auto& s : tr.samples()) CHECK(s.value <= p_cap);
  }
}

TEST_CASE("KV pressure evicts the most recent admission") {
  // Four requests of 100+100 tokens against a 700-token budget: headroom runs
  // out at the 76th decode iteration and the last admission is shed.
  LatencyModel lm = bare_decode_lm();
  lm.prefill_base_s = 1e-3;
  lm.prefill_per_token_s = 1e-4;
  SimConfig cfg;
  cfg.max_batch_size = 4;
  cfg.kv_budget_tokens = 700.0;

  SUBCASE("recompute re-runs the context through prefill") {
    cfg.preemption = PreemptionMode::recompute;
    SimResult res = simulate_llm(cfg, uniform_llm(4, 100, 100), lm, flat_pm());
    CHECK(res.preemption_count == 1);
    REQUIRE(res.records[3].preemptions() == 1);
    CHECK(res.records[3].preemption_events[0].second == "recompute");
    for (int i = 0; i < 3; ++i) CHECK(res.records[i].preemptions() == 0);
    CHECK(emitted_tokens(res) == 400);
    // the victim's second prefill covers prompt plus already-generated tokens
    long prefills = 0;
    for (const auto& it : res.iterations) {
      if (it.phase == Phase::prefill) ++prefills;
    }
    CHECK(prefills == 5);
  }

  SUBCASE("swap costs idle-power transfers instead of recompute") {
    cfg.preemption = PreemptionMode::recompute;
    SimResult recompute = simulate_llm(cfg, uniform_llm(4, 100, 100), lm, flat_pm());
    cfg.preemption = PreemptionMode::swap;
    SimResult swap = simulate_llm(cfg, uniform_llm(4, 100, 100), lm, flat_pm());

    CHECK(swap.preemption_count == 1);
    CHECK(swap.records[3].preemption_events[0].second == "swap");
    CHECK(emitted_tokens(swap) == 400);
    long swap_outs = 0, swap_ins = 0;
    for (const auto& e : swap.ledger) {
      if (e.phase == "swap-out") ++swap_outs;
      if (e.phase == "swap-in") ++swap_ins;
    }
    CHECK(swap_outs == 1);
    CHECK(swap_ins == 1);

    CHECK(ledger_total(swap.ledger) < ledger_total(recompute.ledger));
    CHECK(swap.end_t < recompute.end_t);
  }
}

TEST_CASE("oversized requests are rejected up front") {
  SimConfig cfg;
  cfg.kv_budget_tokens = 150.0;
  CHECK_THROWS_AS(simulate_llm(cfg, uniform_llm(1, 100, 100), bare_decode_lm(), flat_pm()),
                  InfeasibleConfig);
  cfg.kv_budget_tokens = 1 << 20;
  cfg.max_batch_size = 0;
  CHECK_THROWS_AS(simulate_llm(cfg, uniform_llm(1, 100, 100), bare_decode_lm(), flat_pm()),
                  InvalidArgument);
}

TEST_CASE("synthetic workloads match their requested distributions") {
  const SynthSpec spec{4000, 512.0, 2.5, 256.0};
  SimWorkload w = synth_workload(spec, 42);
  REQUIRE(w.llm.size() == 4000);

  double in_sum = 0.0, out_sum = 0.0;
  long in_min = 1 << 30, out_min = 1 << 30;
  for (const auto& r : w.llm) {
    in_sum += static_cast<double>(r.input_tokens);
    out_sum += static_cast<double>(r.output_tokens);
    in_min = std::min(in_min, r.input_tokens);
    out_min = std::min(out_min, r.output_tokens);
  }
  // Pareto scale for mean 512 at alpha 2.5 is 512 * 1.5 / 2.5 = 307.2, so no
  // prompt can be shorter than 308 tokens.
  CHECK(in_min >= 308);
  CHECK(out_min >= 1);
  CHECK(in_sum / 4000.0 == doctest::Approx(512.0).epsilon(0.08));
  CHECK(out_sum / 4000.0 == doctest::Approx(256.0).epsilon(0.08));

  SimWorkload again = synth_workload(spec, 42);
  REQUIRE(again.llm.size() == w.llm.size());
  for (size_t i = 0; i < w.llm.size(); ++i) {
    CHECK(again.llm[i].input_tokens == w.llm[i].input_tokens);
    CHECK(again.llm[i].output_tokens == w.llm[i].output_tokens);
  }
  SimWorkload other = synth_workload(spec, 43);
  bool differs = false;
  for (size_t i = 0; i < w.llm.size(); ++i) {
    differs |= other.llm[i].input_tokens != w.llm[i].input_tokens;
  }
  CHECK(differs);

  CHECK_THROWS_AS(synth_workload({0, 512.0, 2.5, 256.0}, 1), InvalidDistributionParams);
  CHECK_THROWS_AS(synth_workload({10, 512.0, 1.0, 256.0}, 1), InvalidDistributionParams);
  CHECK_THROWS_AS(synth_workload({10, 0.5, 2.5, 256.0}, 1), InvalidDistributionParams);
}

TEST_CASE("simulation output is bit-stable across runs") {
  const DeviceProfile& prof = device_profile("midpower");
  SimConfig cfg;
  cfg.max_batch_size = 4;
  SimWorkload w = synth_workload({10, 64.0, 2.5, 48.0}, 11);

  auto render = [&]() {
    SimResult res = simulate_llm(cfg, w, prof.latency, prof.power);
    std::ostringstream log, trace;
    write_serving_log(log, res.records, res.iterations);
    write_power_trace(trace, res.traces, std::string("sim"), prof.power.max_w);
    return log.str() + "\x1f" + trace.str();
  };
  CHECK(render() == render());
}

TEST_CASE("whole-batch image runs follow encode, steps, decode") {
  const DeviceProfile& prof = device_profile("highpower");
  SimWorkload w;
  w.kind = SimWorkload::Kind::diffusion;
  for (long i = 0; i < 5; ++i) w.diffusion.push_back({"img" + std::to_string(i), 50, 512});
  w.diffusion[2].steps = 30;  // batch runs at the longest member's step count

  SimConfig cfg;
  cfg.max_batch_size = 4;
  SimResult res = simulate_diffusion(cfg, w, prof.latency, prof.power);

  REQUIRE(res.batch_groups.size() == 2);
  CHECK(res.batch_groups[0].request_ids.size() == 4);
  CHECK(res.batch_groups[1].request_ids.size() == 1);
  // batch of 4 at 512px: 0.05 encode + 50 * (0.02 + 0.0048) + 0.2 decode
  CHECK(res.batch_groups[0].t_end == doctest::Approx(1.49).epsilon(1e-12));
  // trailing batch of 1: 0.05 + 50 * 0.0212 + 0.2 on top
  CHECK(res.end_t == doctest::Approx(2.8).epsilon(1e-12));

  for (const auto& rec : res.records) {
    CHECK_FALSE(rec.first_token_t.has_value());
    REQUIRE(rec.batch_id.has_value());
  }
  CHECK(res.records[0].complete_t == doctest::Approx(1.49).epsilon(1e-12));
  CHECK(res.records[4].complete_t == doctest::Approx(2.8).epsilon(1e-12));

  long denoise_iters = 0;
  for (const auto& it : res.iterations) {
    if (it.phase == Phase::denoise_step) ++denoise_iters;
  }
  CHECK(denoise_iters == 100);
}

TEST_CASE("denoising energy is linear in the step count") {
  const DeviceProfile& prof = device_profile("highpower");
  auto run = [&](long steps) {
    SimWorkload w;
    w.kind = SimWorkload::Kind::diffusion;
    for (long i = 0; i < 4; ++i) w.diffusion.push_back({"img" + std::to_string(i), steps, 512});
    SimConfig cfg;
    cfg.max_batch_size = 4;
    return simulate_diffusion(cfg, w, prof.latency, prof.power);
  };
  const double e50 = ledger_total(run(50).ledger, "denoise-step");
  const double e25 = ledger_total(run(25).ledger, "denoise-step");
  CHECK(e50 / e25 == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("workloads and ledgers survive a round trip") {
  SimWorkload w = synth_workload({6, 80.0, 2.5, 40.0}, 5);
  std::ostringstream first;
  write_workload(first, w);
  std::istringstream in(first.str());
  SimWorkload back = parse_workload(in);
  REQUIRE(back.llm.size() == w.llm.size());
  std::ostringstream second;
  write_workload(second, back);
  CHECK(first.str() == second.str());

  SimWorkload d;
  d.kind = SimWorkload::Kind::diffusion;
  d.diffusion.push_back({"img0", 30, 768});
  std::ostringstream dout;
  write_workload(dout, d);
  std::istringstream din(dout.str());
  SimWorkload dback = parse_workload(din);
  CHECK(dback.kind == SimWorkload::Kind::diffusion);
  REQUIRE(dback.diffusion.size() == 1);
  CHECK(dback.diffusion[0].resolution == 768);

  const DeviceProfile& prof = device_profile("midpower");
  SimConfig cfg;
  SimResult res = simulate_llm(cfg, synth_workload({4, 32.0, 2.5, 16.0}, 9), prof.latency,
                               prof.power);
  std::ostringstream lout;
  write_ledger(lout, res.ledger);
  std::istringstream lin(lout.str());
  std::vector<LedgerEntry> lback = parse_ledger(lin);
  REQUIRE(lback.size() == res.ledger.size());
  CHECK(ledger_total(lback) == doctest::Approx(ledger_total(res.ledger)).epsilon(1e-12));

  std::istringstream junk("{\"id\": \"x\"");
  CHECK_THROWS_AS(parse_workload(junk), MalformedRecord);
}
