#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "feemarket/allocate.hpp"
#include "feemarket/delay.hpp"
#include "feemarket/demand.hpp"

namespace feemarket {

namespace {

constexpr int kMaxBisection = 400;
constexpr double kMaxGridPoints = 1e8;

void check_rate(double rate, const QueueSpec& q, const char* what) {
  const double upper = std::min(q.market_size, 1.0);
  if (!(rate >= 0.0 && rate < upper)) {
    throw std::domain_error(
        fmt::format("{}: rate {} outside [0, {}) for queue '{}'", what, rate, upper, q.name));
  }
}

std::vector<double> rates_at_level(double level, const SystemSpec& spec) {
  std::vector<double> rates(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    rates[i] = inverse_welfare_slope(level, spec.queues[i]);
  }
  return rates;
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

WelfareCurveEval eval_welfare(double rate, const QueueSpec& q) {
  check_rate(rate, q, "eval_welfare");
  const DemandCurveEval v = eval_demand(rate, q.market_size, q.demand);
  const DelayCurveEval t = eval_delay(rate, q.delay);
  WelfareCurveEval w;
  w.welfare = v.gross_value * t.expected_discount - rate * t.expected_cost;
  if (std::isinf(v.marginal_value)) {
    w.d_welfare = kInfinity;
  } else {
    w.d_welfare = v.marginal_value * t.expected_discount + v.gross_value * t.d_discount -
                  t.expected_cost - rate * t.d_cost;
  }
  return w;
}

double welfare_slope_at_zero(const QueueSpec& q) { return eval_welfare(0.0, q).d_welfare; }

double inverse_welfare_slope(double level, const QueueSpec& q) {
  if (welfare_slope_at_zero(q) <= level) return 0.0;
  const double cap = q.rate_cap();
  if (eval_welfare(cap, q).d_welfare >= level) return cap;
  double lo = 0.0;
  double hi = cap;
  for (int it = 0; it < kMaxBisection; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (eval_welfare(mid, q).d_welfare > level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

bool is_welfare_concave(const QueueSpec& q, int samples) {
  const double cap = q.rate_cap();
  double prev = welfare_slope_at_zero(q);
  for (int k = 1; k <= samples; ++k) {
    const double slope = eval_welfare(cap * k / samples, q).d_welfare;
    if (!(slope < prev)) return false;
    prev = slope;
  }
  return true;
}

double total_welfare(std::span<const double> rates, const SystemSpec& spec) {
  if (rates.size() != spec.size()) throw std::invalid_argument("total_welfare: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) total += eval_welfare(rates[i], spec.queues[i]).welfare;
  return total;
}

Allocation solve_welfare(const SystemSpec& spec) {
  require_valid(spec);
  for (const QueueSpec& q : spec.queues) {
    if (!is_welfare_concave(q)) {
      throw SolverError(fmt::format("solve_welfare: net welfare of queue '{}' is not strictly concave",
                                    q.name));
    }
  }

  const double kappa = spec.capacity;
  std::vector<double> rates = rates_at_level(0.0, spec);
  if (sum(rates) <= kappa) {
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const QueueSpec& q = spec.queues[i];
      if (q.market_size >= 1.0 && rates[i] == q.rate_cap()) {
        throw SolverError(fmt::format(
            "solve_welfare: queue '{}' saturates the stability bound with slack capacity", q.name));
      }
    }
    const double objective = total_welfare(rates, spec);
    return make_allocation(std::move(rates), 0.0, objective);
  }

  // Total allocation is non-increasing in the water level; at the largest
  // W'_i(capacity / N) every queue takes at most capacity / N.
  double lo = 0.0;
  double hi = 0.0;
  const double share = kappa / static_cast<double>(spec.size());
  for (const QueueSpec& q : spec.queues) {
    hi = std::max(hi, eval_welfare(std::min(share, q.rate_cap()), q).d_welfare);
  }
  hi = std::max(hi, 1e-12);
  while (sum(rates_at_level(hi, spec)) > kappa) hi *= 2.0;

  for (int it = 0; it < kMaxBisection; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double total = sum(rates_at_level(mid, spec));
    if (total > kappa) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (std::abs(total - kappa) <= 1e-13 * std::max(1.0, kappa) && total <= kappa) break;
  }
  rates = rates_at_level(hi, spec);
  const double objective = total_welfare(rates, spec);
  return make_allocation(std::move(rates), hi, objective);
}

Allocation brute_force_welfare(const SystemSpec& spec, double grid_step) {
  require_valid(spec);
  const std::size_t n = spec.size();
  if (n > 4) throw std::invalid_argument("brute_force_welfare: at most 4 queues");
  if (!(grid_step > 0.0)) throw std::invalid_argument("brute_force_welfare: grid_step must be positive");

  const auto budget = static_cast<std::int64_t>(std::floor(spec.capacity / grid_step + 1e-9));
  std::vector<std::int64_t> limit(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double cap = std::min(spec.queues[i].rate_cap(), spec.capacity);
    limit[i] = std::min(budget, static_cast<std::int64_t>(std::floor(cap / grid_step)));
  }

  // Exact point count of the truncated simplex, by convolution over queues.
  std::vector<double> ways(static_cast<std::size_t>(budget) + 1, 0.0);
  ways[0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> next(ways.size(), 0.0);
    for (std::size_t s = 0; s < ways.size(); ++s) {
      if (ways[s] == 0.0) continue;
      for (std::int64_t j = 0; j <= limit[i] && s + static_cast<std::size_t>(j) < ways.size(); ++j) {
        next[s + static_cast<std::size_t>(j)] += ways[s];
      }
    }
    ways = std::move(next);
  }
  double points = 0.0;
  for (double w : ways) points += w;
  if (points > kMaxGridPoints) {
    throw std::invalid_argument(
        fmt::format("brute_force_welfare: grid has {:.3g} points (limit 1e8)", points));
  }

  std::vector<std::vector<double>> table(n);
  for (std::size_t i = 0; i < n; ++i) {
    table[i].resize(static_cast<std::size_t>(limit[i]) + 1);
    for (std::int64_t j = 0; j <= limit[i]; ++j) {
      table[i][static_cast<std::size_t>(j)] =
          eval_welfare(static_cast<double>(j) * grid_step, spec.queues[i]).welfare;
    }
  }
  // Running argmax of the last queue's table over j <= r; replaces the
  // innermost loop without skipping any grid point.
  const std::vector<double>& last = table[n - 1];
  std::vector<std::int64_t> best_last(static_cast<std::size_t>(budget) + 1);
  std::int64_t arg = 0;
  for (std::int64_t r = 0; r <= budget; ++r) {
    if (r <= limit[n - 1] && last[static_cast<std::size_t>(r)] > last[static_cast<std::size_t>(arg)]) {
      arg = r;
    }
    best_last[static_cast<std::size_t>(r)] = arg;
  }

  std::vector<std::int64_t> idx(n, 0);
  std::vector<std::int64_t> best_idx(n, 0);
  double best = -kInfinity;
  auto recurse = [&](auto&& self, std::size_t depth, std::int64_t used, double partial) -> void {
    if (depth == n - 1) {
      const std::int64_t j = best_last[static_cast<std::size_t>(budget - used)];
      const double value = partial + last[static_cast<std::size_t>(j)];
      if (value > best) {
        best = value;
        idx[depth] = j;
        best_idx = idx;
      }
      return;
    }
    for (std::int64_t j = 0; j <= limit[depth] && used + j <= budget; ++j) {
      idx[depth] = j;
      self(self, depth + 1, used + j, partial + table[depth][static_cast<std::size_t>(j)]);
    }
  };
  recurse(recurse, 0, 0, 0.0);

  std::vector<double> rates(n);
  for (std::size_t i = 0; i < n; ++i) rates[i] = static_cast<double>(best_idx[i]) * grid_step;
  return make_allocation(std::move(rates), 0.0, best);
}

InteriorityReport verify_interior(const SystemSpec& spec, const Allocation& alloc) {
  if (alloc.rates.size() != spec.size()) {
    throw std::invalid_argument("verify_interior: allocation does not match system");
  }
  InteriorityReport report;
  report.shadow_price = alloc.shadow_price;
  report.hypothesis_holds = true;
  report.all_served = true;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    InteriorityEntry e;
    e.slope_at_zero = welfare_slope_at_zero(spec.queues[i]);
    e.served = alloc.rates[i] > 0.0;
    e.above_shadow = e.slope_at_zero > alloc.shadow_price;
    report.hypothesis_holds = report.hypothesis_holds && e.above_shadow;
    report.all_served = report.all_served && e.served;
    report.queues.push_back(e);
  }
  return report;
}

}  // namespace feemarket
