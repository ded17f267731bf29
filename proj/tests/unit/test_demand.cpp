#include <doctest.h>

#include <cmath>

#include "feemarket/demand.hpp"
#include "oracles.hpp"

using namespace feemarket;
using doctest::Approx;

TEST_CASE("survival values") {
  CHECK(survival(2.0, Isoelastic{2.0}) == Approx(0.25));
  CHECK(inverse_survival(0.25, Isoelastic{2.0}) == Approx(2.0));
  CHECK(survival(0.0, LinearUniform{10}) == 1.0);
  CHECK(survival(10.0, LinearUniform{10}) == 0.0);
  CHECK(survival(0.5, Isoelastic{2.0}) == 1.0);
}

TEST_CASE("eval_demand examples") {
  auto iso = eval_demand(0.25, 1.0, Isoelastic{2.0});
  CHECK(iso.marginal_value == Approx(2.0));
  CHECK(iso.gross_value == Approx(1.0));
  const auto q = oracle::iso_queue("i", 1, 2, 0, 0);
  CHECK(iso.gross_value == Approx(oracle::gross_value(0.25, q)).epsilon(1e-8));

  CHECK(eval_demand(1.0, 1.0, Isoelastic{2.0}).marginal_value == Approx(1.0));

  auto lin = eval_demand(0.2, 1.0, LinearUniform{10});
  CHECK(lin.marginal_value == Approx(8.0));
  CHECK(lin.gross_value == Approx(1.8));
  const auto ql = oracle::lin_queue("l", 1, 10, 0, 0);
  CHECK(lin.gross_value == Approx(oracle::gross_value(0.2, ql)).epsilon(1e-10));

  auto zero = eval_demand(0.0, 1.0, Isoelastic{2.0});
  CHECK(zero.gross_value == 0.0);
  CHECK(std::isinf(zero.marginal_value));
  CHECK_THROWS_AS(eval_demand(1.5, 1.0, Isoelastic{2.0}), std::domain_error);
  CHECK_THROWS_AS(eval_demand(1.0, 1.0, LinearUniform{1}), std::domain_error);
}

TEST_CASE("demand_of_value examples") {
  CHECK(demand_of_value(2.0, 1.0, Isoelastic{2.0}) == Approx(0.25));
  CHECK(demand_of_value(8.0, 1.0, LinearUniform{10}) == Approx(0.2));
  CHECK(demand_of_value(11.0, 1.0, LinearUniform{10}) == 0.0);
  CHECK(demand_of_value(0.5, 1.0, Isoelastic{2.0}) == 1.0);
}

TEST_CASE("round trip, monotonicity, integral consistency") {
  const DemandFamily families[] = {Isoelastic{1.5}, Isoelastic{3.0}, Isoelastic{50.0}, LinearUniform{10},
                                   LinearUniform{0.7}};
  const double sizes[] = {0.3, 1.0, 2.5};
  for (const auto& f : families) {
    for (double m : sizes) {
      double prev = kInfinity;
      for (int k = 1; k < 200; ++k) {
        const double lam = m * k / 200.0;
        const double vp = eval_demand(lam, m, f).marginal_value;
        CHECK(vp < prev);
        prev = vp;
        CHECK(demand_of_value(vp, m, f) == Approx(lam).epsilon(1e-10));
      }
      const QueueSpec q{"q", m, f, {}};
      for (double lam : {0.1 * m, 0.5 * m, 0.9 * m}) {
        const double delta = 1e-6;
        // l = s^4 flattens the singular end
        const double integral = oracle::simpson(
            [&](double s) { return eval_demand(s * s * s * s, m, f).marginal_value * 4 * s * s * s; },
            std::pow(delta, 0.25), std::pow(lam, 0.25), 200000);
        const double diff = eval_demand(lam, m, f).gross_value - eval_demand(delta, m, f).gross_value;
        CHECK(integral == Approx(diff).epsilon(1e-6));
        CHECK(marginal_value_slope(lam, m, f) ==
              Approx(oracle::central_diff([&](double l) { return eval_demand(l, m, f).marginal_value; }, lam, 1e-7))
                  .epsilon(1e-5));
        CHECK(gross_revenue(lam, m, f) == Approx(lam * eval_demand(lam, m, f).marginal_value));
      }
    }
  }
}

TEST_CASE("value law helpers") {
  CHECK(mean_value(Isoelastic{2.0}) == Approx(2.0));
  CHECK(mean_value(LinearUniform{10}) == Approx(5.0));
  CHECK(sample_value(0.25, Isoelastic{2.0}) == Approx(2.0));
  CHECK(sample_value(0.5, LinearUniform{10}) == Approx(5.0));
  CHECK(gross_revenue(0.0, 1.0, Isoelastic{2.0}) == 0.0);
}
