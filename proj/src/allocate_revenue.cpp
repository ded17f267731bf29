#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "feemarket/allocate.hpp"
#include "feemarket/delay.hpp"
#include "feemarket/demand.hpp"
#include "feemarket/equilibrium.hpp"

namespace feemarket {

namespace {

constexpr std::size_t kMaxEnumeratedQueues = 12;
constexpr int kCoarseGridSteps = 200;
constexpr int kMaxAscentIterations = 5000;
constexpr int kPolishSweeps = 4;
constexpr double kGoldenRatio = 0.6180339887498949;
constexpr double kZeroRate = 1e-12;

double revenue_term(double rate, const QueueSpec& q) {
  const DelayCurveEval t = eval_delay(rate, q.delay);
  return gross_revenue(rate, q.market_size, q.demand) * t.expected_discount - rate * t.expected_cost;
}

// Maximization of sum r_i(x_i) over the coordinates in `active`, subject to
// 0 <= x_i <= cap_i and sum x_i <= capacity. Coordinates outside `active`
// stay at zero.
class SubsetProblem {
 public:
  SubsetProblem(const SystemSpec& spec, std::vector<std::size_t> active)
      : spec_(spec), active_(std::move(active)) {
    for (std::size_t i : active_) caps_.push_back(std::min(spec.queues[i].rate_cap(), spec.capacity));
  }

  std::size_t dim() const { return active_.size(); }
  double cap(std::size_t k) const { return caps_[k]; }
  double capacity() const { return spec_.capacity; }
  const QueueSpec& queue(std::size_t k) const { return spec_.queues[active_[k]]; }

  double value(const std::vector<double>& x) const {
    double total = 0.0;
    for (std::size_t k = 0; k < dim(); ++k) total += revenue_term(x[k], queue(k));
    return total;
  }

  std::vector<double> gradient(const std::vector<double>& x) const {
    std::vector<double> g(dim());
    for (std::size_t k = 0; k < dim(); ++k) {
      // Isoelastic marginal revenue is unbounded at zero; evaluate just inside.
      g[k] = marginal_revenue(std::max(x[k], kZeroRate), queue(k));
    }
    return g;
  }

  // Euclidean projection onto the box intersected with the budget half-space.
  std::vector<double> project(std::vector<double> x) const {
    auto clipped = [&](double shift) {
      double total = 0.0;
      for (std::size_t k = 0; k < dim(); ++k) total += std::clamp(x[k] - shift, 0.0, caps_[k]);
      return total;
    };
    double shift = 0.0;
    if (clipped(0.0) > capacity()) {
      double lo = 0.0;
      double hi = *std::max_element(x.begin(), x.end());
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (clipped(mid) > capacity() ? lo : hi) = mid;
      }
      shift = hi;
    }
    for (std::size_t k = 0; k < dim(); ++k) x[k] = std::clamp(x[k] - shift, 0.0, caps_[k]);
    return x;
  }

 private:
  const SystemSpec& spec_;
  std::vector<std::size_t> active_;
  std::vector<double> caps_;
};

std::vector<double> projected_ascent(const SubsetProblem& prob, std::vector<double> x) {
  x = prob.project(std::move(x));
  double fx = prob.value(x);
  double step = -1.0;
  for (int it = 0; it < kMaxAscentIterations; ++it) {
    const std::vector<double> g = prob.gradient(x);
    double gmax = 0.0;
    for (double gi : g) gmax = std::max(gmax, std::abs(gi));
    if (gmax == 0.0 || !std::isfinite(gmax)) break;
    if (step < 0.0) step = prob.capacity() / gmax;

    bool accepted = false;
    for (int halving = 0; halving < 80; ++halving) {
      std::vector<double> trial(x.size());
      for (std::size_t k = 0; k < x.size(); ++k) trial[k] = x[k] + step * g[k];
      trial = prob.project(std::move(trial));
      double predicted = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) predicted += g[k] * (trial[k] - x[k]);
      const double ft = prob.value(trial);
      if (predicted > 0.0 && ft >= fx + 1e-4 * predicted) {
        const double gain = ft - fx;
        x = std::move(trial);
        fx = ft;
        accepted = gain > 1e-16 * std::max(1.0, std::abs(fx));
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return x;
}

// Maximizes f on [a, b] assuming unimodality near the maximizer.
template <class F>
double golden_section_max(F&& f, double a, double b, int iterations = 100) {
  double c = b - kGoldenRatio * (b - a);
  double d = a + kGoldenRatio * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < iterations && b - a > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kGoldenRatio * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kGoldenRatio * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

// Line searches along e_k (slack budget) and e_k - e_l (binding budget).
std::vector<double> golden_polish(const SubsetProblem& prob, std::vector<double> x) {
  double fx = prob.value(x);
  const std::size_t n = prob.dim();
  for (int sweep = 0; sweep < kPolishSweeps; ++sweep) {
    bool improved = false;
    for (std::size_t k = 0; k < n; ++k) {
      const double used = std::accumulate(x.begin(), x.end(), 0.0) - x[k];
      const double hi = std::min(prob.cap(k), prob.capacity() - used);
      if (hi <= 0.0) continue;
      std::vector<double> y = x;
      const double best = golden_section_max(
          [&](double t) {
            y[k] = t;
            return prob.value(y);
          },
          0.0, hi);
      y[k] = best;
      const double fy = prob.value(y);
      if (fy > fx) {
        improved = improved || fy - fx > 1e-15 * std::max(1.0, std::abs(fx));
        x = std::move(y);
        fx = fy;
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t l = k + 1; l < n; ++l) {
        // Move t from l to k: x_k + t in [0, cap_k], x_l - t in [0, cap_l].
        const double t_lo = std::max(-x[k], x[l] - prob.cap(l));
        const double t_hi = std::min(prob.cap(k) - x[k], x[l]);
        if (t_hi - t_lo <= 0.0) continue;
        std::vector<double> y = x;
        const double xk = x[k];
        const double xl = x[l];
        const double best = golden_section_max(
            [&](double t) {
              y[k] = xk + t;
              y[l] = xl - t;
              return prob.value(y);
            },
            t_lo, t_hi);
        y[k] = std::clamp(xk + best, 0.0, prob.cap(k));
        y[l] = std::clamp(xl - best, 0.0, prob.cap(l));
        const double fy = prob.value(y);
        if (fy > fx) {
          improved = improved || fy - fx > 1e-15 * std::max(1.0, std::abs(fx));
          x = std::move(y);
          fx = fy;
        }
      }
    }
    if (!improved) break;
  }
  return x;
}

// Best grid point with every active coordinate at least one grid step,
// found by dynamic programming over the budget.
std::vector<double> coarse_grid_best(const SubsetProblem& prob) {
  const std::size_t n = prob.dim();
  const double h = prob.capacity() / kCoarseGridSteps;
  const int budget = kCoarseGridSteps;
  std::vector<std::vector<double>> best(n + 1, std::vector<double>(budget + 1, -kInfinity));
  std::vector<std::vector<int>> choice(n + 1, std::vector<int>(budget + 1, 0));
  std::fill(best[0].begin(), best[0].end(), 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const int limit = static_cast<int>(std::floor(prob.cap(k) / h));
    std::vector<double> term(static_cast<std::size_t>(std::max(limit, 0)) + 1, 0.0);
    for (int j = 1; j <= limit; ++j) term[j] = revenue_term(j * h, prob.queue(k));
    for (int b = 0; b <= budget; ++b) {
      for (int j = 1; j <= std::min(limit, b); ++j) {
        const double v = best[k][b - j] + term[j];
        if (v > best[k + 1][b]) {
          best[k + 1][b] = v;
          choice[k + 1][b] = j;
        }
      }
    }
  }
  int b = static_cast<int>(std::max_element(best[n].begin(), best[n].end()) - best[n].begin());
  std::vector<double> x(n, 0.0);
  if (!std::isfinite(best[n][b])) return x;
  for (std::size_t k = n; k > 0; --k) {
    const int j = choice[k][b];
    x[k - 1] = j * h;
    b -= j;
  }
  return x;
}

std::vector<std::vector<double>> starting_points(const SubsetProblem& prob) {
  const std::size_t n = prob.dim();
  const double kappa = prob.capacity();
  std::vector<std::vector<double>> starts;
  for (double frac : {1.0, 0.5, 0.25}) {
    starts.emplace_back(n, frac * kappa / static_cast<double>(n));
  }
  std::vector<double> by_cap(n);
  double cap_total = 0.0;
  for (std::size_t k = 0; k < n; ++k) cap_total += prob.cap(k);
  for (std::size_t k = 0; k < n; ++k) by_cap[k] = kappa * prob.cap(k) / cap_total;
  starts.push_back(by_cap);

  std::vector<double> chokes(n);
  double finite_max = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    chokes[k] = choke_price(prob.queue(k));
    if (std::isfinite(chokes[k])) finite_max = std::max(finite_max, chokes[k]);
  }
  std::vector<double> by_choke(n);
  double weight_total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    by_choke[k] = std::isfinite(chokes[k]) ? std::max(chokes[k], 0.0) : 2.0 * finite_max + 1.0;
    weight_total += by_choke[k];
  }
  for (std::size_t k = 0; k < n; ++k) {
    by_choke[k] = weight_total > 0.0 ? kappa * by_choke[k] / weight_total : kappa / n;
  }
  starts.push_back(by_choke);

  // Dominant-queue starts: 90% of capacity to one of the first three queues.
  for (std::size_t lead = 0; lead < 3; ++lead) {
    std::vector<double> x(n, n > 1 ? 0.1 * kappa / static_cast<double>(n - 1) : 0.0);
    x[lead % n] = 0.9 * kappa;
    starts.push_back(x);
  }
  return starts;
}

struct SubsetOptimum {
  std::vector<double> rates;  // full length N
  double revenue = -kInfinity;
  std::vector<std::size_t> served;
};

SubsetOptimum optimize_subset(const SystemSpec& spec, const std::vector<std::size_t>& active) {
  SubsetProblem prob(spec, active);
  std::vector<std::vector<double>> starts = starting_points(prob);
  starts.push_back(coarse_grid_best(prob));

  std::vector<double> best_x;
  double best_value = -kInfinity;
  for (auto& start : starts) {
    std::vector<double> x = golden_polish(prob, projected_ascent(prob, std::move(start)));
    const double v = prob.value(x);
    if (v > best_value) {
      best_value = v;
      best_x = std::move(x);
    }
  }

  SubsetOptimum out;
  out.rates.assign(spec.size(), 0.0);
  for (std::size_t k = 0; k < active.size(); ++k) {
    const double r = best_x[k] < kZeroRate ? 0.0 : best_x[k];
    out.rates[active[k]] = r;
    if (r > 0.0) out.served.push_back(active[k]);
  }
  out.revenue = revenue_objective(out.rates, spec);
  return out;
}

bool preferred(const SubsetOptimum& a, const SubsetOptimum& b) {
  const double tol = 1e-12 * std::max(1.0, std::max(std::abs(a.revenue), std::abs(b.revenue)));
  if (a.revenue > b.revenue + tol) return true;
  if (b.revenue > a.revenue + tol) return false;
  if (a.served.size() != b.served.size()) return a.served.size() < b.served.size();
  return a.served < b.served;
}

double capacity_multiplier(const SystemSpec& spec, const std::vector<double>& rates) {
  const double total = std::accumulate(rates.begin(), rates.end(), 0.0);
  if (total < spec.capacity - 1e-9 * std::max(1.0, spec.capacity)) return 0.0;
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i] > 0.0 && rates[i] < spec.queues[i].rate_cap() - 1e-12) {
      sum += marginal_revenue(rates[i], spec.queues[i]);
      ++count;
    }
  }
  return count > 0 ? std::max(0.0, sum / count) : 0.0;
}

double total_demand(double price, const SystemSpec& spec) {
  double total = 0.0;
  for (const QueueSpec& q : spec.queues) total += demand_of_price(price, q);
  return total;
}

double default_max_price(const SystemSpec& spec) {
  std::vector<double> marginal;
  const double share = spec.capacity / static_cast<double>(spec.size());
  for (const QueueSpec& q : spec.queues) {
    const double rate = std::min(share, q.rate_cap());
    marginal.push_back(eval_demand(rate, q.market_size, q.demand).marginal_value);
  }
  std::sort(marginal.begin(), marginal.end());
  const std::size_t m = marginal.size();
  const double median = m % 2 ? marginal[m / 2] : 0.5 * (marginal[m / 2 - 1] + marginal[m / 2]);
  return 1e3 * median;
}

}  // namespace

double revenue_objective(std::span<const double> rates, const SystemSpec& spec) {
  if (rates.size() != spec.size()) throw std::invalid_argument("revenue_objective: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const QueueSpec& q = spec.queues[i];
    const double upper = std::min(q.market_size, 1.0);
    if (!(rates[i] >= 0.0 && rates[i] < upper)) {
      throw std::domain_error(fmt::format("revenue_objective: rate {} outside [0, {}) for queue '{}'",
                                          rates[i], upper, q.name));
    }
    total += revenue_term(rates[i], q);
  }
  return total;
}

double marginal_revenue(double rate, const QueueSpec& q) {
  const DelayCurveEval t = eval_delay(rate, q.delay);
  double gross_slope = 0.0;  // d/dlambda of lambda V'(lambda)
  if (const auto* iso = std::get_if<Isoelastic>(&q.demand)) {
    if (rate == 0.0) return kInfinity;
    const double k = 1.0 - 1.0 / iso->elasticity;
    gross_slope = k * std::pow(q.market_size, 1.0 / iso->elasticity) * std::pow(rate, -1.0 / iso->elasticity);
  } else {
    const DemandCurveEval v = eval_demand(rate, q.market_size, q.demand);
    const double slope = rate > 0.0 ? marginal_value_slope(rate, q.market_size, q.demand) : 0.0;
    gross_slope = v.marginal_value + rate * slope;
  }
  return gross_slope * t.expected_discount + gross_revenue(rate, q.market_size, q.demand) * t.d_discount -
         t.expected_cost - rate * t.d_cost;
}

Allocation solve_revenue(const SystemSpec& spec) {
  require_valid(spec);
  const std::size_t n = spec.size();
  if (n > kMaxEnumeratedQueues) {
    throw std::invalid_argument(
        fmt::format("solve_revenue: {} queues exceeds the enumeration bound of 12", n));
  }

  SubsetOptimum best;
  best.rates.assign(n, 0.0);
  best.revenue = 0.0;  // empty served set
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) active.push_back(i);
    }
    SubsetOptimum candidate = optimize_subset(spec, active);
    if (preferred(candidate, best)) best = std::move(candidate);
  }
  const double mu = capacity_multiplier(spec, best.rates);
  return make_allocation(std::move(best.rates), mu, best.revenue);
}

UniformPriceSolution solve_revenue_uniform(const SystemSpec& spec, const UniformPriceOptions& options) {
  require_valid(spec);
  const double kappa = spec.capacity;

  double p_hi = 0.0;
  bool unbounded = false;
  for (const QueueSpec& q : spec.queues) {
    const double choke = choke_price(q);
    if (std::isfinite(choke)) {
      p_hi = std::max(p_hi, choke);
    } else {
      unbounded = true;
    }
  }
  if (unbounded) {
    p_hi = std::max(p_hi, options.max_price > 0.0 ? options.max_price : default_max_price(spec));
    while (total_demand(p_hi, spec) > kappa) p_hi *= 2.0;
  }

  // Smallest feasible non-negative price.
  double p_lo = 0.0;
  if (total_demand(0.0, spec) > kappa) {
    double lo = 0.0;
    double hi = p_hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (total_demand(mid, spec) > kappa ? lo : hi) = mid;
    }
    p_lo = hi;
  }

  auto revenue = [&](double p) { return p * total_demand(p, spec); };
  const int m = std::max(options.grid_points, 3);
  double best_p = p_lo;
  double best_r = revenue(p_lo);
  int best_k = 0;
  for (int k = 1; k <= m; ++k) {
    const double p = p_lo + (p_hi - p_lo) * k / m;
    const double r = revenue(p);
    if (r > best_r) {
      best_r = r;
      best_p = p;
      best_k = k;
    }
  }
  const double a = p_lo + (p_hi - p_lo) * std::max(best_k - 1, 0) / m;
  const double b = p_lo + (p_hi - p_lo) * std::min(best_k + 1, m) / m;
  const double polished = golden_section_max(revenue, a, b);
  if (revenue(polished) > best_r) {
    best_p = polished;
    best_r = revenue(polished);
  }

  std::vector<double> rates(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) rates[i] = demand_of_price(best_p, spec.queues[i]);
  const double total = std::accumulate(rates.begin(), rates.end(), 0.0);

  double mu = 0.0;
  if (total >= kappa - 1e-9 * std::max(1.0, kappa) && best_p > 0.0) {
    // KKT in price space: R'(p) = mu * dTotal/dp at the feasibility boundary.
    const double h = 1e-6 * std::max(1.0, best_p);
    const double dr = (revenue(best_p + h) - revenue(best_p - h)) / (2.0 * h);
    const double dq = (total_demand(best_p + h, spec) - total_demand(best_p - h, spec)) / (2.0 * h);
    if (dq < 0.0) mu = std::max(0.0, dr / dq);
  }
  UniformPriceSolution out;
  out.price = best_p;
  out.allocation = make_allocation(std::move(rates), mu, best_r);
  return out;
}

ThresholdResult find_threshold_capacity(const SystemSpec& spec) {
  require_valid(spec);
  const std::size_t n = spec.size();
  std::vector<double> chokes(n);
  for (std::size_t i = 0; i < n; ++i) {
    chokes[i] = choke_price(spec.queues[i]);
    if (!std::isfinite(chokes[i])) {
      throw std::invalid_argument("find_threshold_capacity: requires finite choke prices");
    }
  }
  ThresholdResult result;
  result.top_queue =
      static_cast<std::size_t>(std::max_element(chokes.begin(), chokes.end()) - chokes.begin());

  double cap_total = 0.0;
  for (const QueueSpec& q : spec.queues) cap_total += q.rate_cap();
  result.scan_bound = cap_total;

  const std::vector<std::size_t> only_top{result.top_queue};
  auto serves_only_top = [&](double kappa) {
    SystemSpec probe = spec;
    probe.capacity = kappa;
    return solve_revenue(probe).served_set == only_top;
  };

  constexpr double kResolution = 1e-4;
  constexpr int kScanPoints = 64;
  double lo = 0.0;
  double hi = -1.0;
  if (!serves_only_top(kResolution)) {
    result.capacity = kResolution;
    result.found = true;
    return result;
  }
  lo = kResolution;
  for (int k = 1; k <= kScanPoints; ++k) {
    const double kappa = cap_total * k / kScanPoints;
    if (kappa <= lo) continue;
    if (!serves_only_top(kappa)) {
      hi = kappa;
      break;
    }
    lo = kappa;
  }
  if (hi < 0.0) {
    result.capacity = cap_total;
    result.found = false;
    return result;
  }
  while (hi - lo > kResolution) {
    const double mid = 0.5 * (lo + hi);
    (serves_only_top(mid) ? lo : hi) = mid;
  }
  result.capacity = hi;
  result.found = true;
  return result;
}

}  // namespace feemarket
