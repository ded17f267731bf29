#include <doctest.h>

#include <cmath>

#include "feemarket/equilibrium.hpp"
#include "oracles.hpp"

using namespace feemarket;
using doctest::Approx;

namespace {
const QueueSpec kLin = oracle::lin_queue("A", 1, 10, 1, 1);
const QueueSpec kIso = oracle::iso_queue("I", 1, 2, 1, 0.1);
}  // namespace

TEST_CASE("price_of_demand examples") {
  const double hand = 8.0 * (0.8 / 1.8) - 1.25;
  CHECK(price_of_demand(0.2, kLin) == Approx(hand).epsilon(1e-14));
  CHECK(price_of_demand(0.2, kLin) == Approx(2.30556).epsilon(1e-5));
  CHECK(price_of_demand(1e-9, kLin) == Approx(4.0).epsilon(1e-7));
  for (double lam : {0.1, 0.4, 0.7}) {
    const QueueSpec free_iso = oracle::iso_queue("x", 1, 3, 0, 0);
    const QueueSpec free_lin = oracle::lin_queue("y", 1, 5, 0, 0);
    CHECK(price_of_demand(lam, free_iso) == Approx(std::pow(lam, -1.0 / 3)));
    CHECK(price_of_demand(lam, free_lin) == Approx(5 * (1 - lam)));
  }
}

TEST_CASE("demand_of_price examples") {
  CHECK(demand_of_price(8.0 * (0.8 / 1.8) - 1.25, kLin) == Approx(0.2).epsilon(1e-9));
  CHECK(demand_of_price(4.5, kLin) == 0.0);
  CHECK(std::abs(demand_of_price(0.723809524, kIso) - 0.25) < 1e-6);
}

TEST_CASE("choke prices") {
  CHECK(choke_price(kLin) == Approx(4.0));
  CHECK(std::isinf(choke_price(kIso)));
  CHECK(choke_price(oracle::lin_queue("z", 1, 2, 1, 1)) == Approx(0.0));
  CHECK(demand_of_price(0.0, oracle::lin_queue("z", 1, 2, 1, 1)) == 0.0);
}

TEST_CASE("ordering by choke price") {
  SystemSpec s{{oracle::lin_queue("A", 1, 10, 1, 1), oracle::lin_queue("B", 1, 6, 1, 1)}, 1};
  CHECK(paper_order(s) == std::vector<std::size_t>{0, 1});
  std::swap(s.queues[0], s.queues[1]);
  CHECK(paper_order(s) == std::vector<std::size_t>{1, 0});
  SystemSpec mixed{{oracle::lin_queue("A", 1, 10, 1, 1), oracle::iso_queue("B", 1, 2, 1, 1)}, 1};
  CHECK(paper_order(mixed) == std::vector<std::size_t>{1, 0});
  SystemSpec isos{{oracle::iso_queue("A", 1, 2, 1, 1), oracle::iso_queue("B", 3, 2, 1, 1)}, 1};
  CHECK(paper_order(isos) == std::vector<std::size_t>{1, 0});
  SystemSpec tie{{oracle::lin_queue("A", 1, 10, 1, 1), oracle::lin_queue("B", 2, 10, 1, 1)}, 1};
  CHECK_THROWS_AS(paper_order(tie), std::invalid_argument);
}

TEST_CASE("monotonicity, round trip and marginal-user residual") {
  const QueueSpec queues[] = {kLin, kIso, oracle::iso_queue("a", 0.6, 1.5, 2, 0.3),
                              oracle::lin_queue("b", 3, 4, 0.2, 0.1), oracle::iso_queue("c", 5, 40, 0.5, 0)};
  for (const auto& q : queues) {
    const double cap = std::min(q.market_size, 1.0);
    double prev_p = kInfinity;
    for (int k = 1; k < 100; ++k) {
      const double lam = 0.01 + (cap - 0.02) * k / 100.0;
      const double p = price_of_demand(lam, q);
      CHECK(p < prev_p);
      prev_p = p;
      CHECK(p == Approx(oracle::price(lam, q)).epsilon(1e-12));
      CHECK(std::abs(demand_of_price(p, q) - lam) < 1e-8);
      const auto eq = equilibrium_at(p, q);
      REQUIRE(eq.active);
      CHECK(std::abs(marginal_user_residual(eq.rate, p, q)) < 1e-9);
    }
    double prev_l = kInfinity;
    for (int k = 0; k < 100; ++k) {
      const double p = -2.0 + 0.08 * k;
      const double lam = demand_of_price(p, q);
      CHECK(lam <= prev_l);
      prev_l = lam;
      CHECK(lam < std::min(q.market_size, 1.0));
    }
  }
}
