#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "feemarket/model.hpp"

namespace feemarket {

/// Net welfare W(lambda) = V(lambda) Dbar(lambda) - lambda Cbar(lambda) of
/// one queue and its derivative.
struct WelfareCurveEval {
  double welfare = 0.0;
  double d_welfare = 0.0;
};

WelfareCurveEval eval_welfare(double rate, const QueueSpec& q);

/// W'(0+); +infinity for Isoelastic demand.
double welfare_slope_at_zero(const QueueSpec& q);

/// Rate at which W' equals level, clamped to [0, rate_cap()].
double inverse_welfare_slope(double level, const QueueSpec& q);

/// Sampled check that W' is strictly decreasing on [0, rate_cap()].
bool is_welfare_concave(const QueueSpec& q, int samples = 200);

double total_welfare(std::span<const double> rates, const SystemSpec& spec);

/// Water-filling solution of max sum W_i(lambda_i) s.t. sum lambda_i <= capacity.
/// Throws SolverError for non-concave W_i or when a queue would run at the
/// stability bound with slack capacity.
Allocation solve_welfare(const SystemSpec& spec);

/// Exhaustive search over the grid {k * grid_step} restricted to
/// sum lambda_i <= capacity. N <= 4 and at most 1e8 grid points.
/// shadow_price is left at zero: the grid search carries no multiplier.
Allocation brute_force_welfare(const SystemSpec& spec, double grid_step);

/// sum lambda_i V'(lambda_i) Dbar(lambda_i) - lambda_i Cbar(lambda_i).
double revenue_objective(std::span<const double> rates, const SystemSpec& spec);

/// d/dlambda of one queue's revenue term; +infinity at 0 for Isoelastic demand.
double marginal_revenue(double rate, const QueueSpec& q);

/// Revenue-maximizing relative prices: served-set enumeration (N <= 12) with
/// multi-start projected ascent, a coarse grid, and golden-section polish.
Allocation solve_revenue(const SystemSpec& spec);

struct UniformPriceOptions {
  /// Upper end of the price scan for systems containing Isoelastic queues.
  /// Non-positive selects 1e3 x the median marginal value at capacity / N.
  double max_price = 0.0;
  int grid_points = 400;
};

struct UniformPriceSolution {
  double price = 0.0;
  Allocation allocation;
};

UniformPriceSolution solve_revenue_uniform(const SystemSpec& spec,
                                           const UniformPriceOptions& options = {});

struct ThresholdResult {
  double capacity = 0.0;     // smallest capacity where the served set leaves {top}
  bool found = false;        // false: never switched; capacity == scan_bound
  double scan_bound = 0.0;
  std::size_t top_queue = 0;
};

/// Scans capacity upward from zero, then bisects to 1e-4, for the point where
/// solve_revenue stops serving only the highest-choke queue.
ThresholdResult find_threshold_capacity(const SystemSpec& spec);

struct InteriorityEntry {
  double slope_at_zero = 0.0;  // W'_i(0+)
  bool served = false;
  bool above_shadow = false;   // W'_i(0+) > mu
};

struct InteriorityReport {
  std::vector<InteriorityEntry> queues;
  double shadow_price = 0.0;
  bool hypothesis_holds = false;  // every W'_i(0+) > mu
  bool all_served = false;
  /// all_served whenever hypothesis_holds.
  bool consistent() const { return !hypothesis_holds || all_served; }
};

InteriorityReport verify_interior(const SystemSpec& spec, const Allocation& alloc);

}  // namespace feemarket
