#pragma once
// Test-side oracles. Nothing here calls into the solvers it is used to check;
// closed forms are re-derived by hand and curves are integrated numerically.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "feemarket/model.hpp"

namespace oracle {

inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Hand-written curves, deliberately not shared with the library.
inline double marginal_value(double lam, const feemarket::QueueSpec& q) {
  const double x = lam / q.market_size;
  if (const auto* iso = std::get_if<feemarket::Isoelastic>(&q.demand)) return std::pow(x, -1.0 / iso->elasticity);
  return std::get<feemarket::LinearUniform>(q.demand).max_value * (1.0 - x);
}

inline double discount(double lam, double d) { return (1.0 - lam) / (1.0 + d - lam); }
inline double cost(double lam, double c) { return c / (1.0 - lam); }

inline double price(double lam, const feemarket::QueueSpec& q) {
  return marginal_value(lam, q) * discount(lam, q.delay.discount_rate) - cost(lam, q.delay.linear_cost);
}

// Gross value by integrating the marginal value from a small floor.
inline double gross_value(double lam, const feemarket::QueueSpec& q) {
  if (lam <= 0.0) return 0.0;
  if (const auto* iso = std::get_if<feemarket::Isoelastic>(&q.demand)) {
    // integrable singularity at 0: substitute lam = s^k to flatten it
    const double e = iso->elasticity;
    const double k = 4.0;
    return simpson(
        [&](double s) {
          if (s <= 0.0) return 0.0;
          const double l = std::pow(s, k);
          return std::pow(l / q.market_size, -1.0 / e) * k * std::pow(s, k - 1.0);
        },
        0.0, std::pow(lam, 1.0 / k));
  }
  return simpson([&](double l) { return marginal_value(l, q); }, 0.0, lam);
}

inline double welfare(double lam, const feemarket::QueueSpec& q) {
  return gross_value(lam, q) * discount(lam, q.delay.discount_rate) - lam * cost(lam, q.delay.linear_cost);
}

// Monotone bisection for the equilibrium rate at a posted price.
inline double rate_at_price(double p, const feemarket::QueueSpec& q) {
  const double cap = std::min(q.market_size, 1.0) - 1e-9;
  double lo = 0.0, hi = cap;
  if (price(hi, q) >= p) return hi;
  if (!std::get_if<feemarket::Isoelastic>(&q.demand) && price(0.0, q) <= p) return 0.0;
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mid > 0.0 && price(mid, q) >= p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Served-set brute force for revenue on two queues: dense grid over the
// feasible region, returns the arg max.
struct GridArgmax {
  std::vector<double> rates;
  double value = -std::numeric_limits<double>::infinity();
};

inline GridArgmax revenue_grid_2(const feemarket::SystemSpec& spec, int n = 600) {
  GridArgmax best;
  const double c0 = std::min(spec.capacity, std::min(spec.queues[0].market_size, 1.0) - 1e-9);
  const double c1 = std::min(spec.capacity, std::min(spec.queues[1].market_size, 1.0) - 1e-9);
  for (int a = 0; a <= n; ++a) {
    const double l0 = c0 * a / n;
    for (int b = 0; b <= n; ++b) {
      const double l1 = c1 * b / n;
      if (l0 + l1 > spec.capacity * (1 + 1e-12)) break;
      const double r = (l0 > 0 ? l0 * price(l0, spec.queues[0]) : 0.0) +
                       (l1 > 0 ? l1 * price(l1, spec.queues[1]) : 0.0);
      if (r > best.value) best = {{l0, l1}, r};
    }
  }
  return best;
}

// Uniform posted price by scanning prices; returns per-queue rates at the
// best feasible price.
inline GridArgmax uniform_price_grid(const feemarket::SystemSpec& spec, double p_lo, double p_hi, int n = 4000) {
  GridArgmax best;
  for (int k = 0; k <= n; ++k) {
    const double p = p_lo + (p_hi - p_lo) * k / n;
    std::vector<double> r;
    double total = 0.0;
    for (const auto& q : spec.queues) {
      r.push_back(rate_at_price(p, q));
      total += r.back();
    }
    if (total > spec.capacity * (1 + 1e-9)) continue;
    if (p * total > best.value) best = {r, p * total};
  }
  return best;
}

// Sample means of e^{-dW} and cW with W ~ Exp(1 - lam).
struct McDelay {
  double discount, discount_se, cost, cost_se;
};

inline McDelay monte_carlo_delay(double lam, double d, double c, int samples, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::exponential_distribution<double> w(1.0 - lam);
  double s1 = 0, s2 = 0, t1 = 0, t2 = 0;
  for (int i = 0; i < samples; ++i) {
    const double x = w(gen);
    const double a = std::exp(-d * x), b = c * x;
    s1 += a, s2 += a * a, t1 += b, t2 += b * b;
  }
  const double n = samples;
  const double ma = s1 / n, mb = t1 / n;
  return {ma, std::sqrt((s2 / n - ma * ma) / n), mb, std::sqrt((t2 / n - mb * mb) / n)};
}

// Random instance helpers.
inline feemarket::QueueSpec iso_queue(const std::string& name, double market, double eps, double d, double c) {
  return {name, market, feemarket::Isoelastic{eps}, {d, c}};
}
inline feemarket::QueueSpec lin_queue(const std::string& name, double market, double vmax, double d, double c) {
  return {name, market, feemarket::LinearUniform{vmax}, {d, c}};
}

}  // namespace oracle
