#include "feemarket/pricing.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "feemarket/delay.hpp"
#include "feemarket/demand.hpp"
#include "feemarket/equilibrium.hpp"

namespace feemarket {

namespace {

void check_pair(std::size_t i, std::size_t j, const SystemSpec& spec, const Allocation& alloc) {
  if (alloc.rates.size() != spec.size()) {
    throw std::invalid_argument("allocation does not match system");
  }
  if (i >= spec.size() || j >= spec.size()) throw std::out_of_range("queue index out of range");
}

}  // namespace

PriceSchedule optimal_prices(const SystemSpec& spec, const Allocation& alloc) {
  if (alloc.rates.size() != spec.size()) {
    throw std::invalid_argument(fmt::format("optimal_prices: allocation has {} rates for {} queues",
                                            alloc.rates.size(), spec.size()));
  }
  PriceSchedule schedule;
  schedule.queues.reserve(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const QueueSpec& q = spec.queues[i];
    const double rate = alloc.rates[i];
    PriceComponents pc;
    if (rate > 0.0) {
      const DemandCurveEval v = eval_demand(rate, q.market_size, q.demand);
      const DelayCurveEval t = eval_delay(rate, q.delay);
      pc.served = true;
      pc.local_discount_externality = -v.gross_value * t.d_discount;
      pc.local_cost_externality = rate * t.d_cost;
      pc.global_term = alloc.shadow_price;
    } else {
      pc.global_term = choke_price(q);
    }
    pc.price = pc.local_discount_externality + pc.local_cost_externality + pc.global_term;
    schedule.queues.push_back(pc);
  }
  return schedule;
}

double approx_price_ratio(std::size_t i, std::size_t j, const SystemSpec& spec, const Allocation& alloc) {
  check_pair(i, j, spec, alloc);
  const QueueSpec& qi = spec.queues[i];
  const QueueSpec& qj = spec.queues[j];
  if (!is_isoelastic(qi.demand) || !is_isoelastic(qj.demand)) {
    throw std::invalid_argument("approx_price_ratio: both queues must have isoelastic demand");
  }
  if (qi.delay.discount_rate != qj.delay.discount_rate || qi.delay.linear_cost != qj.delay.linear_cost) {
    throw std::invalid_argument("approx_price_ratio: queues must share discount rate and linear cost");
  }
  const double d = qi.delay.discount_rate;
  const double c = qi.delay.linear_cost;
  const double weight = d / ((1.0 + d) * (1.0 + d));
  auto term = [&](const QueueSpec& q, double rate) {
    const double gross = eval_demand(rate, q.market_size, q.demand).gross_value;
    return gross * weight + c * rate + alloc.shadow_price;
  };
  return term(qi, alloc.rates[i]) / term(qj, alloc.rates[j]);
}

double limit_price_ratio(std::size_t i, std::size_t j, const SystemSpec& spec, const Allocation& alloc) {
  check_pair(i, j, spec, alloc);
  if (alloc.rates[j] == 0.0) throw std::domain_error("limit_price_ratio: queue j has zero rate");
  return (alloc.rates[i] / spec.queues[i].market_size) / (alloc.rates[j] / spec.queues[j].market_size);
}

}  // namespace feemarket
