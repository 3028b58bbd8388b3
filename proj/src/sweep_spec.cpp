#include "wattbench/sweep_spec.hpp"

#include <algorithm>
#include <istream>
#include <sstream>

#include "wattbench/errors.hpp"

namespace wattbench {

namespace {

std::string strip(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string uncomment(const std::string& s) {
  const size_t hash = s.find('#');
  return hash == std::string::npos ? s : s.substr(0, hash);
}

[[noreturn]] void fail(size_t lineno, const std::string& what) {
  throw SpecParseError("line " + std::to_string(lineno) + ": " + what);
}

double num(const std::string& v, size_t lineno, const std::string& key) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    fail(lineno, key + " must be numeric, got '" + v + "'");
  }
}

long integer(const std::string& v, size_t lineno, const std::string& key) {
  const double x = num(v, lineno, key);
  const long n = static_cast<long>(x);
  if (static_cast<double>(n) != x) fail(lineno, key + " must be an integer, got '" + v + "'");
  return n;
}

// "values = [4, 8, 16]" -> {"4", "8", "16"}
std::vector<std::string> parse_list(const std::string& v, size_t lineno) {
  const std::string body = strip(v);
  if (body.size() < 2 || body.front() != '[' || body.back() != ']') {
    fail(lineno, "expected a bracketed list, got '" + v + "'");
  }
  std::vector<std::string> items;
  std::string item;
  std::istringstream inner(body.substr(1, body.size() - 2));
  while (std::getline(inner, item, ',')) {
    const std::string value = strip(item);
    if (value.empty()) fail(lineno, "empty element in value list");
    items.push_back(value);
  }
  return items;
}

Constraint parse_constraint(const std::string& line, size_t lineno) {
  for (const char* op : {"<=", ">=", "==", "!=", "<", ">"}) {
    const size_t at = line.find(op);
    if (at == std::string::npos) continue;
    Constraint c;
    c.dimension = strip(line.substr(0, at));
    c.op = op;
    c.rhs = strip(line.substr(at + std::string(op).size()));
    if (c.dimension.empty() || c.rhs.empty()) {
      throw ConstraintParseError("line " + std::to_string(lineno) +
                                 ": constraint needs '<dimension> <op> <value>'");
    }
    return c;
  }
  throw ConstraintParseError("line " + std::to_string(lineno) +
                             ": no comparison operator in '" + line + "'");
}

}  // namespace

SweepSpec parse_sweep_spec(std::istream& in) {
  SweepSpec spec;
  std::string section;
  std::string line;
  size_t lineno = 0;
  bool saw_anything = false;

  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = strip(uncomment(line));
    if (text.empty()) continue;
    saw_anything = true;

    if (text.front() == '[') {
      if (text.back() != ']') fail(lineno, "unterminated section header");
      section = strip(text.substr(1, text.size() - 2));
      if (section.empty()) fail(lineno, "empty section name");
      const bool known = section == "task" || section == "backend" ||
                         section == "constraints" || section == "workload" ||
                         section == "accounting" || section.rfind("grid.", 0) == 0;
      if (!known) fail(lineno, "unknown section [" + section + "]");
      continue;
    }
    if (section.empty()) fail(lineno, "content before any section header");

    if (section == "constraints") {
      spec.constraints.push_back(parse_constraint(text, lineno));
      continue;
    }

    const size_t eq = text.find('=');
    if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
    const std::string key = strip(text.substr(0, eq));
    const std::string value = strip(text.substr(eq + 1));
    if (key.empty() || value.empty()) fail(lineno, "expected 'key = value'");

    if (section == "task") {
      if (key != "kind") fail(lineno, "unknown key '" + key + "' in [task]");
      static const std::vector<std::string> tasks{"chat", "code", "t2i", "t2v", "i2v"};
      if (std::find(tasks.begin(), tasks.end(), value) == tasks.end()) {
        fail(lineno, "unknown task '" + value + "'");
      }
      spec.task = value;
    } else if (section == "backend") {
      if (key == "kind") {
        if (value != "simulator" && value != "http") {
          fail(lineno, "unknown backend '" + value + "'");
        }
        spec.backend = value;
      } else if (key == "endpoint") {
        spec.endpoint = value;
      } else if (key == "power_trace") {
        spec.power_trace_path = value;
      } else if (key == "bearer_token") {
        spec.bearer_token = value;
      } else {
        fail(lineno, "unknown key '" + key + "' in [backend]");
      }
    } else if (section.rfind("grid.", 0) == 0) {
      if (key != "values") fail(lineno, "unknown key '" + key + "' in [" + section + "]");
      spec.grid[section.substr(5)] = parse_list(value, lineno);
    } else if (section == "workload") {
      if (key == "n_requests") {
        spec.workload.n_requests = integer(value, lineno, key);
      } else if (key == "input_mean") {
        spec.workload.input_mean = num(value, lineno, key);
      } else if (key == "input_pareto_alpha") {
        spec.workload.input_pareto_alpha = num(value, lineno, key);
      } else if (key == "output_mean") {
        spec.workload.output_mean = num(value, lineno, key);
      } else if (key == "kv_budget_tokens") {
        spec.workload.kv_budget_tokens = num(value, lineno, key);
      } else if (key == "kv_tokens_per_request_token") {
        spec.workload.kv_tokens_per_request_token = num(value, lineno, key);
      } else if (key == "seed") {
        spec.seed = static_cast<std::uint64_t>(integer(value, lineno, key));
      } else {
        fail(lineno, "unknown key '" + key + "' in [workload]");
      }
    } else if (section == "accounting") {
      if (key == "gap_tolerance_s") {
        spec.accounting.gap_tolerance_s = num(value, lineno, key);
      } else if (key == "min_fraction") {
        spec.accounting.min_fraction = num(value, lineno, key);
      } else if (key == "sampling_interval_s") {
        spec.accounting.sampling_interval_s = num(value, lineno, key);
      } else if (key == "repetitions") {
        spec.accounting.repetitions = static_cast<int>(integer(value, lineno, key));
        if (spec.accounting.repetitions < 1) fail(lineno, "repetitions must be >= 1");
      } else {
        fail(lineno, "unknown key '" + key + "' in [accounting]");
      }
    }
  }

  if (!saw_anything) throw EmptyInput("sweep spec is empty");
  if (spec.backend == "http" && spec.endpoint.empty()) {
    throw SpecParseError("http backend needs an endpoint");
  }
  if (spec.backend == "http" && spec.power_trace_path.empty()) {
    throw SpecParseError("http backend needs a power_trace file");
  }
  return spec;
}

}  // namespace wattbench
