#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace feemarket {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Upper clamp applied to every per-queue rate: solvers search on
/// [0, min(market_size, 1) - kStabilityMargin].
inline constexpr double kStabilityMargin = 1e-9;

/// Raised by solvers when an instance violates a structural precondition
/// (non-concave welfare, unstable operating point).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Marginal value (lambda / Lambda)^(-1/elasticity); valuations follow
/// the Pareto law with survival v^(-elasticity) on [1, inf).
struct Isoelastic {
  double elasticity = 2.0;
};

/// Valuations uniform on [0, max_value].
struct LinearUniform {
  double max_value = 1.0;
};

using DemandFamily = std::variant<Isoelastic, LinearUniform>;

inline bool is_isoelastic(const DemandFamily& f) { return std::holds_alternative<Isoelastic>(f); }

/// Exponential discount e^(-d t) and linear cost c t applied to the sojourn t.
struct DelayParams {
  double discount_rate = 0.0;
  double linear_cost = 0.0;
};

struct QueueSpec {
  std::string name;
  double market_size = 1.0;
  DemandFamily demand = Isoelastic{};
  DelayParams delay;

  /// min(market_size, 1) - kStabilityMargin.
  double rate_cap() const;
};

struct SystemSpec {
  std::vector<QueueSpec> queues;
  double capacity = 1.0;

  std::size_t size() const { return queues.size(); }
};

struct Allocation {
  std::vector<double> rates;
  std::vector<std::size_t> served_set;  // ascending indices with rates > 0
  double shadow_price = 0.0;
  double objective_value = 0.0;

  double total_rate() const;
  bool is_served(std::size_t i) const;
};

/// Builds an allocation whose served set is derived from the strictly
/// positive rates.
Allocation make_allocation(std::vector<double> rates, double shadow_price, double objective_value);

struct PriceComponents {
  double price = 0.0;
  double local_discount_externality = 0.0;
  double local_cost_externality = 0.0;
  double global_term = 0.0;
  bool served = false;
};

struct PriceSchedule {
  std::vector<PriceComponents> queues;
};

struct Violation {
  std::string path;     // e.g. "queues[1].market_size"
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// One record per broken invariant; empty when the system is well formed.
std::vector<Violation> validate_system(const SystemSpec& spec);

/// Throws std::invalid_argument carrying every violation when the system
/// is malformed.
void require_valid(const SystemSpec& spec);

}  // namespace feemarket
