#include "feemarket/demand.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace feemarket {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

double survival(double v, const DemandFamily& family) {
  if (v < 0.0) throw std::domain_error("survival: valuation must be non-negative");
  return std::visit(overloaded{
                        [v](const Isoelastic& f) {
                          return v <= 1.0 ? 1.0 : std::pow(v, -f.elasticity);
                        },
                        [v](const LinearUniform& f) {
                          return std::clamp(1.0 - v / f.max_value, 0.0, 1.0);
                        },
                    },
                    family);
}

double inverse_survival(double prob, const DemandFamily& family) {
  if (!(prob > 0.0 && prob <= 1.0)) {
    throw std::domain_error("inverse_survival: probability must lie in (0, 1]");
  }
  return std::visit(overloaded{
                        [prob](const Isoelastic& f) { return std::pow(prob, -1.0 / f.elasticity); },
                        [prob](const LinearUniform& f) { return f.max_value * (1.0 - prob); },
                    },
                    family);
}

DemandCurveEval eval_demand(double rate, double market_size, const DemandFamily& family) {
  if (rate < 0.0) throw std::domain_error("eval_demand: rate must be non-negative");
  return std::visit(
      overloaded{
          [&](const Isoelastic& f) -> DemandCurveEval {
            if (rate > market_size) {
              throw std::domain_error(
                  fmt::format("eval_demand: rate {} exceeds market size {}", rate, market_size));
            }
            if (rate == 0.0) return {0.0, kInfinity};
            const double x = rate / market_size;
            const double k = 1.0 - 1.0 / f.elasticity;
            // integral of the marginal value, hence the market-size factor
            return {market_size * std::pow(x, k) / k, std::pow(x, -1.0 / f.elasticity)};
          },
          [&](const LinearUniform& f) -> DemandCurveEval {
            if (rate >= market_size) {
              throw std::domain_error(
                  fmt::format("eval_demand: rate {} reaches market size {}", rate, market_size));
            }
            const double x = rate / market_size;
            return {f.max_value * rate * (1.0 - 0.5 * x), f.max_value * (1.0 - x)};
          },
      },
      family);
}

double marginal_value_slope(double rate, double market_size, const DemandFamily& family) {
  if (!(rate > 0.0)) throw std::domain_error("marginal_value_slope: rate must be positive");
  return std::visit(overloaded{
                        [&](const Isoelastic& f) {
                          const double x = rate / market_size;
                          return -std::pow(x, -1.0 / f.elasticity - 1.0) /
                                 (f.elasticity * market_size);
                        },
                        [&](const LinearUniform& f) { return -f.max_value / market_size; },
                    },
                    family);
}

double gross_revenue(double rate, double market_size, const DemandFamily& family) {
  if (rate == 0.0) return 0.0;
  if (const auto* iso = std::get_if<Isoelastic>(&family)) {
    // lambda * (lambda/Lambda)^(-1/eps) written to avoid 0 * inf.
    return std::pow(market_size, 1.0 / iso->elasticity) *
           std::pow(rate, 1.0 - 1.0 / iso->elasticity);
  }
  return rate * eval_demand(rate, market_size, family).marginal_value;
}

double demand_of_value(double v, double market_size, const DemandFamily& family) {
  return market_size * survival(v, family);
}

double mean_value(const DemandFamily& family) {
  return std::visit(overloaded{
                        [](const Isoelastic& f) { return f.elasticity / (f.elasticity - 1.0); },
                        [](const LinearUniform& f) { return 0.5 * f.max_value; },
                    },
                    family);
}

double sample_value(double u, const DemandFamily& family) { return inverse_survival(u, family); }

}  // namespace feemarket
