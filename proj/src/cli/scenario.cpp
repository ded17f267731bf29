#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "feemarket/cli.hpp"

namespace feemarket::cli {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ScenarioError(path.empty() ? "$" : path, "expected an object");
}

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ScenarioError(path.empty() ? key : path + "." + key, "unknown key");
  }
}

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

const json& field(const json& obj, const std::string& path, std::string_view key) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) throw ScenarioError(join(path, key), "missing required field");
  return *it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ScenarioError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ScenarioError(path, "expected a finite number");
  return v;
}

double number_or(const json& obj, const std::string& path, std::string_view key, double fallback) {
  const auto it = obj.find(std::string(key));
  return it == obj.end() ? fallback : as_number(*it, join(path, key));
}

std::int64_t as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ScenarioError(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ScenarioError(path, "expected a string");
  return j.get<std::string>();
}

DemandFamily parse_demand(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string type = as_string(field(j, path, "type"), join(path, "type"));
  if (type == "isoelastic") {
    reject_unknown(j, path, {"type", "elasticity"});
    return Isoelastic{as_number(field(j, path, "elasticity"), join(path, "elasticity"))};
  }
  if (type == "linear_uniform") {
    reject_unknown(j, path, {"type", "max_value"});
    return LinearUniform{as_number(field(j, path, "max_value"), join(path, "max_value"))};
  }
  throw ScenarioError(join(path, "type"), fmt::format("unknown demand type '{}'", type));
}

QueueSpec parse_queue(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown(j, path, {"name", "market_size", "demand", "delay"});
  QueueSpec q;
  q.name = as_string(field(j, path, "name"), join(path, "name"));
  q.market_size = as_number(field(j, path, "market_size"), join(path, "market_size"));
  q.demand = parse_demand(field(j, path, "demand"), join(path, "demand"));
  if (const auto it = j.find("delay"); it != j.end()) {
    const std::string dpath = join(path, "delay");
    require_object(*it, dpath);
    reject_unknown(*it, dpath, {"discount_rate", "linear_cost"});
    q.delay.discount_rate = number_or(*it, dpath, "discount_rate", 0.0);
    q.delay.linear_cost = number_or(*it, dpath, "linear_cost", 0.0);
  }
  return q;
}

SimSection parse_sim(const json& j) {
  const std::string path = "sim";
  require_object(j, path);
  reject_unknown(j, path, {"horizon", "warmup", "seed", "replications"});
  SimSection s;
  s.horizon = number_or(j, path, "horizon", s.horizon);
  if (!(s.horizon > 0.0)) throw ScenarioError("sim.horizon", "horizon must be positive");
  s.warmup = number_or(j, path, "warmup", 0.1 * s.horizon);
  if (!(s.warmup >= 0.0 && s.warmup < s.horizon)) {
    throw ScenarioError("sim.warmup", "warmup must lie in [0, horizon)");
  }
  if (const auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_unsigned()) throw ScenarioError("sim.seed", "expected a non-negative integer");
    s.seed = it->get<std::uint64_t>();
  }
  if (const auto it = j.find("replications"); it != j.end()) {
    const std::int64_t r = as_integer(*it, "sim.replications");
    if (r < 1 || r > 100000) throw ScenarioError("sim.replications", "replications must be in [1, 100000]");
    s.replications = static_cast<int>(r);
  }
  return s;
}

OrderingPolicy parse_policy(const json& j, std::size_t queues) {
  const std::string path = "policy";
  require_object(j, path);
  const std::string type = as_string(field(j, path, "type"), "policy.type");
  if (type == "global_bid") {
    reject_unknown(j, path, {"type"});
    return GlobalBid{};
  }
  if (type != "mvw") throw ScenarioError("policy.type", fmt::format("unknown policy type '{}'", type));
  reject_unknown(j, path, {"type", "expected_values"});
  const json& ev = field(j, path, "expected_values");
  if (ev.is_array()) {
    if (ev.size() != queues) {
      throw ScenarioError("policy.expected_values",
                          fmt::format("expected {} values, one per queue, got {}", queues, ev.size()));
    }
    MarketValueWeighted mvw;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      const std::string ipath = fmt::format("policy.expected_values[{}]", i);
      const double v = as_number(ev[i], ipath);
      if (!(v > 0.0)) throw ScenarioError(ipath, "expected value must be positive");
      mvw.expected_values.push_back(v);
    }
    return mvw;
  }
  if (ev.is_object()) {
    reject_unknown(ev, "policy.expected_values", {"ema_half_life"});
    const double h = as_number(field(ev, "policy.expected_values", "ema_half_life"),
                               "policy.expected_values.ema_half_life");
    if (!(h > 0.0)) throw ScenarioError("policy.expected_values.ema_half_life", "half-life must be positive");
    return EstimatedEma{h};
  }
  throw ScenarioError("policy.expected_values", "expected an array or {\"ema_half_life\": number}");
}

SweepSection parse_sweep(const json& j) {
  const std::string path = "sweep";
  require_object(j, path);
  reject_unknown(j, path, {"path", "from", "to", "steps"});
  SweepSection s;
  s.path = as_string(field(j, path, "path"), "sweep.path");
  s.from = as_number(field(j, path, "from"), "sweep.from");
  s.to = as_number(field(j, path, "to"), "sweep.to");
  const std::int64_t steps = as_integer(field(j, path, "steps"), "sweep.steps");
  if (steps < 1 || steps > 100000) throw ScenarioError("sweep.steps", "steps must be in [1, 100000]");
  s.steps = static_cast<int>(steps);
  return s;
}

// "queues[1].demand.max_value" -> /queues/1/demand/max_value
json::json_pointer to_pointer(const std::string& path) {
  std::string pointer;
  std::stringstream ss(path);
  std::string segment;
  while (std::getline(ss, segment, '.')) {
    std::string key = segment;
    std::string index;
    if (const auto open = segment.find('['); open != std::string::npos) {
      const auto close = segment.find(']', open);
      if (close == std::string::npos || close + 1 != segment.size()) {
        throw ScenarioError("sweep.path", fmt::format("malformed path '{}'", path));
      }
      key = segment.substr(0, open);
      index = segment.substr(open + 1, close - open - 1);
      if (index.empty() || index.find_first_not_of("0123456789") != std::string::npos) {
        throw ScenarioError("sweep.path", fmt::format("malformed index in '{}'", path));
      }
    }
    if (key.empty()) throw ScenarioError("sweep.path", fmt::format("malformed path '{}'", path));
    pointer += "/" + key;
    if (!index.empty()) pointer += "/" + index;
  }
  if (pointer.empty()) throw ScenarioError("sweep.path", "empty path");
  return json::json_pointer(pointer);
}

}  // namespace

Scenario parse_scenario_json(const json& doc) {
  require_object(doc, "");
  reject_unknown(doc, "", {"capacity", "queues", "sim", "policy", "sweep"});
  Scenario s;
  s.system.capacity = as_number(field(doc, "", "capacity"), "capacity");
  const json& queues = field(doc, "", "queues");
  if (!queues.is_array()) throw ScenarioError("queues", "expected an array");
  for (std::size_t i = 0; i < queues.size(); ++i) {
    s.system.queues.push_back(parse_queue(queues[i], fmt::format("queues[{}]", i)));
  }
  const auto violations = validate_system(s.system);
  if (!violations.empty()) {
    std::string msg = violations.front().message;
    for (std::size_t k = 1; k < violations.size(); ++k) {
      msg += fmt::format("; {}: {}", violations[k].path, violations[k].message);
    }
    throw ScenarioError(violations.front().path, msg);
  }

  if (const auto it = doc.find("sim"); it != doc.end()) {
    s.sim = parse_sim(*it);
  } else {
    s.sim.warmup = 0.1 * s.sim.horizon;
  }
  if (const auto it = doc.find("policy"); it != doc.end()) s.policy = parse_policy(*it, s.system.size());
  if (const auto it = doc.find("sweep"); it != doc.end()) {
    s.sweep = parse_sweep(*it);
    json probe = to_json(s);
    const auto ptr = to_pointer(s.sweep->path);
    if (!probe.contains(ptr) || !probe.at(ptr).is_number() || s.sweep->path.rfind("sweep", 0) == 0) {
      throw ScenarioError("sweep.path", fmt::format("'{}' does not name a numeric field", s.sweep->path));
    }
  }
  return s;
}

Scenario parse_scenario(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw ScenarioError("$", fmt::format("malformed JSON: {}", e.what()));
  }
  return parse_scenario_json(doc);
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("$", fmt::format("cannot read scenario file '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(std::string_view(buffer.str()));
}

json to_json(const Scenario& s) {
  json doc;
  doc["capacity"] = s.system.capacity;
  doc["queues"] = json::array();
  for (const QueueSpec& q : s.system.queues) {
    json demand;
    if (const auto* iso = std::get_if<Isoelastic>(&q.demand)) {
      demand = {{"type", "isoelastic"}, {"elasticity", iso->elasticity}};
    } else {
      demand = {{"type", "linear_uniform"}, {"max_value", std::get<LinearUniform>(q.demand).max_value}};
    }
    doc["queues"].push_back({
        {"name", q.name},
        {"market_size", q.market_size},
        {"demand", demand},
        {"delay", {{"discount_rate", q.delay.discount_rate}, {"linear_cost", q.delay.linear_cost}}},
    });
  }
  doc["sim"] = {
      {"horizon", s.sim.horizon},
      {"warmup", s.sim.warmup},
      {"seed", s.sim.seed},
      {"replications", s.sim.replications},
  };
  if (const auto* mvw = std::get_if<MarketValueWeighted>(&s.policy)) {
    doc["policy"] = {{"type", "mvw"}, {"expected_values", mvw->expected_values}};
  } else if (const auto* ema = std::get_if<EstimatedEma>(&s.policy)) {
    doc["policy"] = {{"type", "mvw"}, {"expected_values", {{"ema_half_life", ema->half_life}}}};
  } else {
    doc["policy"] = {{"type", "global_bid"}};
  }
  if (s.sweep) {
    doc["sweep"] = {{"path", s.sweep->path}, {"from", s.sweep->from}, {"to", s.sweep->to}, {"steps", s.sweep->steps}};
  }
  return doc;
}

std::string canonical_text(const Scenario& s) { return to_json(s).dump(2) + "\n"; }

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string scenario_hash(const Scenario& s) { return sha256_hex(canonical_text(s)); }

Scenario with_value(const Scenario& s, const std::string& path, double value) {
  json doc = to_json(s);
  doc.erase("sweep");
  const auto ptr = to_pointer(path);
  if (!doc.contains(ptr) || !doc.at(ptr).is_number()) {
    throw ScenarioError("sweep.path", fmt::format("'{}' does not name a numeric field", path));
  }
  doc[ptr] = value;
  return parse_scenario_json(doc);
}

}  // namespace feemarket::cli
