#include "wattbench/store.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "wattbench/errors.hpp"

namespace wattbench {

namespace {

using nlohmann::json;

std::string g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

json config_to_json(const BenchmarkConfig& c) {
  json j{{"task", c.task},
         {"model_id", c.model_id},
         {"device_profile", c.device_profile},
         {"tp_degree", c.tp_degree},
         {"max_batch_size", c.max_batch_size},
         {"denoising_steps", c.denoising_steps},
         {"resolution", c.resolution},
         {"preemption_mode", to_string(c.preemption)}};
  if (c.power_limit_w.has_value()) j["power_limit_w"] = *c.power_limit_w;
  return j;
}

BenchmarkConfig config_from_json(const json& j) {
  BenchmarkConfig c;
  c.task = j.at("task").get<std::string>();
  c.model_id = j.at("model_id").get<std::string>();
  c.device_profile = j.at("device_profile").get<std::string>();
  c.tp_degree = j.at("tp_degree").get<int>();
  c.max_batch_size = j.at("max_batch_size").get<long>();
  c.denoising_steps = j.at("denoising_steps").get<long>();
  c.resolution = j.at("resolution").get<long>();
  c.preemption = preemption_mode_from_string(j.at("preemption_mode").get<std::string>());
  if (j.contains("power_limit_w")) c.power_limit_w = j["power_limit_w"].get<double>();
  return c;
}

json result_to_json(const RunResult& r) {
  json j{{"schema_version", ResultStore::kSchemaVersion},
         {"config_id", r.config.config_id()},
         {"config", config_to_json(r.config)},
         {"status", r.status},
         {"repetitions", r.repetitions},
         {"flags", r.flags}};
  if (!r.error.empty()) j["error"] = r.error;
  if (r.status == "ok") {
    json m{{"accounting_method", r.accounting_method},
           {"energy_per_request_j", r.energy_per_request_j},
           {"mean_ttft_s", r.mean_ttft_s},
           {"mean_tpot_s", r.mean_tpot_s},
           {"mean_e2e_s", r.mean_e2e_s},
           {"throughput", r.throughput},
           {"avg_power_w", r.avg_power_w},
           {"total_energy_j", r.total_energy_j},
           {"preemption_count", r.preemption_count}};
    if (r.energy_per_token_j.has_value()) m["energy_per_token_j"] = *r.energy_per_token_j;
    j["metrics"] = std::move(m);
    if (r.steady_window.has_value()) {
      j["steady_window"] = json{{"t0", r.steady_window->t0},
                                {"t1", r.steady_window->t1},
                                {"saturation_fraction", r.steady_window->saturation_fraction},
                                {"tokens_steady", r.steady_window->tokens_steady},
                                {"energy_steady_j", r.steady_window->energy_steady_j}};
    }
  }
  json artifacts;
  if (!r.trace_path.empty()) artifacts["trace"] = r.trace_path;
  if (!r.log_path.empty()) artifacts["log"] = r.log_path;
  if (!artifacts.empty()) j["artifacts"] = std::move(artifacts);
  return j;
}

RunResult result_from_json(const json& j, const std::string& config_id) {
  if (!j.contains("schema_version")) {
    throw StoreCorrupt("run document '" + config_id + "' has no schema version");
  }
  const int version = j["schema_version"].get<int>();
  if (version != ResultStore::kSchemaVersion) {
    throw VersionMismatch("run document '" + config_id + "' has schema version " +
                          std::to_string(version) + ", expected " +
                          std::to_string(ResultStore::kSchemaVersion));
  }
  RunResult r;
  r.config = config_from_json(j.at("config"));
  r.status = j.at("status").get<std::string>();
  r.repetitions = j.value("repetitions", 1);
  r.flags = j.value("flags", std::vector<std::string>{});
  r.error = j.value("error", "");
  if (j.contains("metrics")) {
    const json& m = j["metrics"];
    r.accounting_method = m.at("accounting_method").get<std::string>();
    r.energy_per_request_j = m.at("energy_per_request_j").get<double>();
    if (m.contains("energy_per_token_j")) r.energy_per_token_j = m["energy_per_token_j"].get<double>();
    r.mean_ttft_s = m.at("mean_ttft_s").get<double>();
    r.mean_tpot_s = m.at("mean_tpot_s").get<double>();
    r.mean_e2e_s = m.at("mean_e2e_s").get<double>();
    r.throughput = m.at("throughput").get<double>();
    r.avg_power_w = m.at("avg_power_w").get<double>();
    r.total_energy_j = m.at("total_energy_j").get<double>();
    r.preemption_count = m.at("preemption_count").get<long>();
  }
  if (j.contains("steady_window")) {
    const json& w = j["steady_window"];
    SteadyWindow window;
    window.t0 = w.at("t0").get<double>();
    window.t1 = w.at("t1").get<double>();
    window.saturation_fraction = w.at("saturation_fraction").get<double>();
    window.tokens_steady = w.at("tokens_steady").get<long>();
    window.energy_steady_j = w.at("energy_steady_j").get<double>();
    r.steady_window = window;
  }
  if (j.contains("artifacts")) {
    r.trace_path = j["artifacts"].value("trace", "");
    r.log_path = j["artifacts"].value("log", "");
  }
  if (r.config.config_id() != config_id) {
    throw StoreCorrupt("run document '" + config_id + "' holds config '" +
                       r.config.config_id() + "'");
  }
  return r;
}

}  // namespace

ResultStore::ResultStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_ / "runs");
}

void ResultStore::put(const RunResult& result) {
  const std::string id = result.config.config_id();
  {
    std::ofstream doc(root_ / "runs" / (id + ".json"));
    if (!doc) throw Error("cannot write run document for '" + id + "'");
    doc << result_to_json(result).dump(2) << "\n";
  }

  // rebuild the index from the documents on disk so it can never dangle
  std::set<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(root_ / "runs")) {
    if (entry.path().extension() == ".json") ids.insert(entry.path().stem().string());
  }
  std::ostringstream index;
  index << "config_id,task,status,energy_per_request_j,mean_tpot_s,mean_e2e_s\n";
  for (const std::string& config_id : ids) {
    std::optional<RunResult> r = get(config_id);
    if (!r.has_value()) continue;
    index << config_id << "," << r->config.task << "," << r->status << ","
          << g6(r->energy_per_request_j) << "," << g6(r->mean_tpot_s) << ","
          << g6(r->mean_e2e_s) << "\n";
  }
  std::ofstream out(root_ / "index.csv");
  if (!out) throw Error("cannot write the store index");
  out << index.str();
}

std::vector<RunResult> ResultStore::load_all() const {
  std::vector<RunResult> results;
  std::ifstream index(root_ / "index.csv");
  if (!index) return results;  // an absent index is an empty store
  std::string line;
  if (!std::getline(index, line)) return results;
  if (line.rfind("config_id,", 0) != 0) {
    throw StoreCorrupt("index.csv does not start with the expected header");
  }
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    const std::string id = line.substr(0, line.find(','));
    std::ifstream doc(root_ / "runs" / (id + ".json"));
    if (!doc) throw StoreCorrupt("index references missing run '" + id + "'");
    json j;
    try {
      doc >> j;
    } catch (const json::exception& e) {
      throw StoreCorrupt("run document '" + id + "' is not valid JSON: " + e.what());
    }
    results.push_back(result_from_json(j, id));
  }
  return results;
}

std::optional<RunResult> ResultStore::get(const std::string& config_id) const {
  std::ifstream doc(root_ / "runs" / (config_id + ".json"));
  if (!doc) return std::nullopt;
  json j;
  try {
    doc >> j;
  } catch (const json::exception& e) {
    throw StoreCorrupt("run document '" + config_id + "' is not valid JSON: " + e.what());
  }
  return result_from_json(j, config_id);
}

}  // namespace wattbench
