#include "feemarket/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace feemarket {

double QueueSpec::rate_cap() const { return std::min(market_size, 1.0) - kStabilityMargin; }

double Allocation::total_rate() const { return std::accumulate(rates.begin(), rates.end(), 0.0); }

bool Allocation::is_served(std::size_t i) const {
  return std::binary_search(served_set.begin(), served_set.end(), i);
}

Allocation make_allocation(std::vector<double> rates, double shadow_price, double objective_value) {
  Allocation a;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i] > 0.0) a.served_set.push_back(i);
  }
  a.rates = std::move(rates);
  a.shadow_price = shadow_price;
  a.objective_value = objective_value;
  return a;
}

namespace {

void check_demand(const DemandFamily& family, const std::string& prefix,
                  std::vector<Violation>& out) {
  if (const auto* iso = std::get_if<Isoelastic>(&family)) {
    if (!(iso->elasticity > 1.0) || !std::isfinite(iso->elasticity)) {
      out.push_back({prefix + ".elasticity", "elasticity must exceed 1"});
    }
  } else {
    const auto& lin = std::get<LinearUniform>(family);
    if (!(lin.max_value > 0.0) || !std::isfinite(lin.max_value)) {
      out.push_back({prefix + ".max_value", "max_value must be positive"});
    }
  }
}

}  // namespace

std::vector<Violation> validate_system(const SystemSpec& spec) {
  std::vector<Violation> out;
  if (!(spec.capacity > 0.0) || !std::isfinite(spec.capacity)) {
    out.push_back({"capacity", "capacity must be positive"});
  }
  if (spec.queues.empty()) {
    out.push_back({"queues", "at least one queue is required"});
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < spec.queues.size(); ++i) {
    const QueueSpec& q = spec.queues[i];
    const std::string prefix = fmt::format("queues[{}]", i);
    if (q.name.empty()) {
      out.push_back({prefix + ".name", "name must be non-empty"});
    } else if (!seen.insert(q.name).second) {
      out.push_back({prefix + ".name", fmt::format("duplicate queue name '{}'", q.name)});
    }
    if (!(q.market_size > 0.0) || !std::isfinite(q.market_size)) {
      out.push_back({prefix + ".market_size", "market_size must be positive"});
    }
    check_demand(q.demand, prefix + ".demand", out);
    if (!(q.delay.discount_rate >= 0.0) || !std::isfinite(q.delay.discount_rate)) {
      out.push_back({prefix + ".delay.discount_rate", "discount_rate must be non-negative"});
    }
    if (!(q.delay.linear_cost >= 0.0) || !std::isfinite(q.delay.linear_cost)) {
      out.push_back({prefix + ".delay.linear_cost", "linear_cost must be non-negative"});
    }
  }
  return out;
}

void require_valid(const SystemSpec& spec) {
  const auto violations = validate_system(spec);
  if (violations.empty()) return;
  std::string msg = "invalid system:";
  for (const auto& v : violations) msg += fmt::format(" {}: {};", v.path, v.message);
  throw std::invalid_argument(msg);
}

}  // namespace feemarket
