#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "feemarket/delay.hpp"
#include "feemarket/demand.hpp"
#include "feemarket/equilibrium.hpp"
#include "feemarket/rng.hpp"
#include "feemarket/simulate.hpp"

namespace feemarket {

namespace {

struct ReplicationStats {
  double admitted_rate = 0.0;
  double mean_sojourn = 0.0;
  double discount = 0.0;
  double cost = 0.0;
  double revenue_rate = 0.0;
  double welfare_rate = 0.0;
  std::uint64_t measured = 0;
  std::uint64_t admitted = 0;
  std::uint64_t completed = 0;
  std::uint64_t in_system = 0;
};

struct QueuePlan {
  const QueueSpec* queue = nullptr;
  double price = 0.0;
  double equilibrium_rate = 0.0;
  double expected_discount = 1.0;
  double expected_cost = 0.0;
};

ReplicationStats simulate_queue(const QueuePlan& plan, const SimConfig& cfg, std::size_t queue_index,
                                int replication) {
  const QueueSpec& q = *plan.queue;
  const auto rep = static_cast<std::uint64_t>(replication);
  CounterRng arrivals(cfg.seed, rep, queue_index, StreamPurpose::kArrival);
  CounterRng valuations(cfg.seed, rep, queue_index, StreamPurpose::kValuation);
  CounterRng services(cfg.seed, rep, queue_index, StreamPurpose::kService);

  const double d = q.delay.discount_rate;
  const double c = q.delay.linear_cost;
  const double p = plan.price;

  ReplicationStats s;
  double sum_sojourn = 0.0;
  double sum_discount = 0.0;
  double sum_cost = 0.0;
  double sum_welfare = 0.0;
  double last_departure = 0.0;
  std::deque<double> departures;  // only tracked for the backlog rule

  double t = arrivals.exponential(q.market_size);
  while (t < cfg.horizon) {
    const double v = sample_value(valuations.uniform_open_zero(), q.demand);
    bool join = false;
    if (cfg.admission == AdmissionRule::kSteadyState) {
      join = plan.equilibrium_rate > 0.0 && v * plan.expected_discount - plan.expected_cost - p >= 0.0;
    } else {
      while (!departures.empty() && departures.front() <= t) departures.pop_front();
      // Sojourn given n ahead is Gamma(n + 1, 1).
      const double ahead = static_cast<double>(departures.size()) + 1.0;
      join = v * std::pow(1.0 / (1.0 + d), ahead) - c * ahead - p >= 0.0;
    }
    if (join) {
      const double start = std::max(t, last_departure);
      const double departure = start + services.exponential(1.0);
      last_departure = departure;
      if (cfg.admission == AdmissionRule::kInstantaneousBacklog) departures.push_back(departure);
      ++s.admitted;
      if (departure <= cfg.horizon) {
        ++s.completed;
      } else {
        ++s.in_system;
      }
      if (t >= cfg.warmup) {
        const double sojourn = departure - t;
        const double discount = std::exp(-d * sojourn);
        ++s.measured;
        sum_sojourn += sojourn;
        sum_discount += discount;
        sum_cost += c * sojourn;
        sum_welfare += v * discount - c * sojourn;
      }
    }
    t += arrivals.exponential(q.market_size);
  }

  const double window = cfg.horizon - cfg.warmup;
  const double n = static_cast<double>(s.measured);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.admitted_rate = n / window;
  s.mean_sojourn = s.measured ? sum_sojourn / n : nan;
  s.discount = s.measured ? sum_discount / n : nan;
  s.cost = s.measured ? sum_cost / n : nan;
  s.revenue_rate = p * n / window;
  s.welfare_rate = sum_welfare / window;
  return s;
}

Estimate summarize(const std::vector<double>& xs) {
  std::vector<double> finite;
  for (double x : xs) {
    if (std::isfinite(x)) finite.push_back(x);
  }
  Estimate e;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (finite.empty()) return {nan, nan};
  const auto n = static_cast<double>(finite.size());
  double mean = 0.0;
  for (double x : finite) mean += x;
  mean /= n;
  e.mean = mean;
  if (finite.size() < 2) {
    e.half_width = nan;
    return e;
  }
  double ss = 0.0;
  for (double x : finite) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  e.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(n);
  return e;
}

}  // namespace

SimResult run_posted_price_sim(const SimConfig& cfg) {
  require_valid(cfg.spec);
  const std::size_t n = cfg.spec.size();
  if (cfg.prices.size() != n) {
    throw std::invalid_argument(
        fmt::format("run_posted_price_sim: {} prices for {} queues", cfg.prices.size(), n));
  }
  if (!(cfg.warmup >= 0.0 && cfg.warmup < cfg.horizon)) {
    throw std::invalid_argument("run_posted_price_sim: require 0 <= warmup < horizon");
  }
  if (cfg.replications < 1) throw std::invalid_argument("run_posted_price_sim: replications must be >= 1");

  std::vector<QueuePlan> plans(n);
  for (std::size_t i = 0; i < n; ++i) {
    const QueueSpec& q = cfg.spec.queues[i];
    QueuePlan& plan = plans[i];
    plan.queue = &q;
    plan.price = cfg.prices[i];
    plan.equilibrium_rate = demand_of_price(plan.price, q);
    if (q.market_size >= 1.0 && plan.equilibrium_rate >= q.rate_cap()) {
      throw SolverError(fmt::format(
          "run_posted_price_sim: price {} drives queue '{}' to the stability bound", plan.price, q.name));
    }
    const DelayCurveEval t = eval_delay(plan.equilibrium_rate, q.delay);
    plan.expected_discount = t.expected_discount;
    plan.expected_cost = t.expected_cost;
  }

  // Replications are independent; results are gathered by index.
  std::vector<std::future<std::vector<ReplicationStats>>> pending;
  for (int r = 0; r < cfg.replications; ++r) {
    pending.push_back(std::async(std::launch::async, [&, r] {
      std::vector<ReplicationStats> out(n);
      for (std::size_t i = 0; i < n; ++i) out[i] = simulate_queue(plans[i], cfg, i, r);
      return out;
    }));
  }
  std::vector<std::vector<ReplicationStats>> reps;
  for (auto& f : pending) reps.push_back(f.get());

  SimResult result;
  result.rng_algorithm = CounterRng::kAlgorithm;
  for (std::size_t i = 0; i < n; ++i) {
    QueueSimStats qs;
    qs.equilibrium_rate = plans[i].equilibrium_rate;
    std::vector<double> rate, sojourn, discount, cost, revenue, welfare;
    for (const auto& rep : reps) {
      const ReplicationStats& s = rep[i];
      rate.push_back(s.admitted_rate);
      sojourn.push_back(s.mean_sojourn);
      discount.push_back(s.discount);
      cost.push_back(s.cost);
      revenue.push_back(s.revenue_rate);
      welfare.push_back(s.welfare_rate);
      qs.completed_jobs += s.measured;
      qs.admitted.push_back(s.admitted);
      qs.completed.push_back(s.completed);
      qs.in_system.push_back(s.in_system);
    }
    qs.admitted_rate = summarize(rate);
    qs.mean_sojourn = summarize(sojourn);
    qs.discount = summarize(discount);
    qs.cost = summarize(cost);
    qs.revenue_rate = summarize(revenue);
    qs.welfare_rate = summarize(welfare);
    result.queues.push_back(std::move(qs));
  }
  return result;
}

}  // namespace feemarket
