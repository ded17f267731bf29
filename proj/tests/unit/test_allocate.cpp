#include <doctest.h>

#include <cmath>
#include <random>

#include "feemarket/allocate.hpp"
#include "feemarket/equilibrium.hpp"
#include "oracles.hpp"

using namespace feemarket;
using doctest::Approx;

namespace {

SystemSpec prop1_instance(double kappa) {
  return {{oracle::lin_queue("A", 1, 10, 1, 1), oracle::lin_queue("B", 1, 6, 1, 1)}, kappa};
}

void check_allocation_invariants(const SystemSpec& spec, const Allocation& a) {
  REQUIRE(a.rates.size() == spec.size());
  CHECK(a.total_rate() <= spec.capacity + 1e-9);
  if (a.shadow_price > 0) CHECK(std::abs(a.total_rate() - spec.capacity) <= 1e-9);
  CHECK(a.shadow_price >= 0.0);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    CHECK(a.rates[i] >= 0.0);
    CHECK(a.rates[i] < std::min(spec.queues[i].market_size, 1.0));
    CHECK(a.is_served(i) == (a.rates[i] > 0.0));
  }
}

SystemSpec random_mixed(std::mt19937_64& gen, std::size_t n, double kappa) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SystemSpec s;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = "q" + std::to_string(i);
    const double m = 0.4 + 2.0 * u(gen), d = 2.0 * u(gen), c = 0.5 * u(gen);
    if (u(gen) < 0.5) {
      s.queues.push_back(oracle::iso_queue(name, m, 1.3 + 4 * u(gen), d, c));
    } else {
      s.queues.push_back(oracle::lin_queue(name, m, 2 + 10 * u(gen), d, c));
    }
  }
  s.capacity = kappa;
  return s;
}

}  // namespace

TEST_CASE("welfare curve examples") {
  const QueueSpec q = oracle::iso_queue("I", 1, 2, 1, 0.1);
  CHECK(eval_welfare(0.0, q).welfare == 0.0);
  const double hand = 2 * (0.75 / 1.75) + 1 * (-1 / (1.75 * 1.75)) - 0.1 / 0.75 - 0.25 * (0.1 / (0.75 * 0.75));
  CHECK(eval_welfare(0.25, q).d_welfare == Approx(hand).epsilon(1e-13));
  CHECK(eval_welfare(0.25, q).d_welfare == Approx(0.352834).epsilon(1e-6));

  const QueueSpec free_q = oracle::lin_queue("L", 1, 10, 0, 0);
  CHECK(eval_welfare(0.3, free_q).welfare == Approx(10 * 0.3 * (1 - 0.15)));
  CHECK(eval_welfare(0.3, free_q).d_welfare == Approx(7.0));

  const QueueSpec queues[] = {q, oracle::lin_queue("L", 2, 8, 0.5, 0.2), oracle::iso_queue("J", 0.5, 4, 3, 0)};
  for (const auto& x : queues) {
    CHECK(is_welfare_concave(x));
    for (double lam : {0.05, 0.2, 0.4}) {
      const auto w = eval_welfare(lam, x);
      CHECK(w.welfare == Approx(oracle::welfare(lam, x)).epsilon(1e-8));
      CHECK(w.d_welfare ==
            Approx(oracle::central_diff([&](double l) { return eval_welfare(l, x).welfare; }, lam)).epsilon(1e-6));
      CHECK(inverse_welfare_slope(w.d_welfare, x) == Approx(lam).epsilon(1e-9));
    }
  }
  CHECK(std::isinf(welfare_slope_at_zero(q)));
  CHECK(welfare_slope_at_zero(oracle::lin_queue("L", 1, 10, 1, 1)) == Approx(10 * 0.5 - 1));
}

TEST_CASE("solve_welfare symmetric split and hand-computed shadow price") {
  const SystemSpec s{{oracle::iso_queue("A", 1, 2, 1, 0.1), oracle::iso_queue("B", 1, 2, 1, 0.1)}, 0.5};
  const Allocation a = solve_welfare(s);
  check_allocation_invariants(s, a);
  CHECK(a.rates[0] == Approx(0.25).epsilon(1e-10));
  CHECK(a.rates[1] == Approx(0.25).epsilon(1e-10));
  CHECK(a.shadow_price == Approx(0.352834).epsilon(1e-6));
}

TEST_CASE("solve_welfare slack capacity has zero shadow price") {
  const SystemSpec s{{oracle::lin_queue("A", 1, 10, 1, 1), oracle::iso_queue("B", 1, 2, 1, 0.5)}, 5.0};
  const Allocation a = solve_welfare(s);
  check_allocation_invariants(s, a);
  CHECK(a.shadow_price == 0.0);
  for (std::size_t i : a.served_set) CHECK(std::abs(eval_welfare(a.rates[i], s.queues[i]).d_welfare) < 1e-8);
}

TEST_CASE("solve_welfare flags a queue pushed to the stability bound") {
  const SystemSpec s{{oracle::lin_queue("A", 2, 100, 0, 0)}, 5.0};
  CHECK_THROWS_AS(solve_welfare(s), SolverError);
}

TEST_CASE("KKT stationarity, oracle dominance and brute force agreement") {
  std::mt19937_64 gen(2024);
  for (int t = 0; t < 6; ++t) {
    const SystemSpec s = random_mixed(gen, 3, 0.2 + 0.1 * t);
    const Allocation a = solve_welfare(s);
    check_allocation_invariants(s, a);
    for (std::size_t i : a.served_set) {
      CHECK(std::abs(eval_welfare(a.rates[i], s.queues[i]).d_welfare - a.shadow_price) < 1e-8);
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!a.is_served(i)) CHECK(welfare_slope_at_zero(s.queues[i]) <= a.shadow_price + 1e-9);
    }
    const double step = 5e-3;
    const Allocation b = brute_force_welfare(s, step);
    CHECK(a.objective_value >= b.objective_value - 10 * step);
    CHECK(a.objective_value >= b.objective_value - 1e-9);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(a.rates[i] - b.rates[i]) < 2 * step + 1e-3);
  }
}

TEST_CASE("brute force small cases") {
  const SystemSpec one{{oracle::lin_queue("A", 1, 10, 1, 1)}, 0.9};
  const Allocation b = brute_force_welfare(one, 1e-3);
  double best = -1, arg = 0;
  for (int k = 0; k <= 900; ++k) {
    const double lam = k * 1e-3;
    const double w = eval_welfare(lam, one.queues[0]).welfare;
    if (w > best) best = w, arg = lam;
  }
  CHECK(b.rates[0] == Approx(arg));

  const SystemSpec sym{{oracle::iso_queue("A", 1, 2, 1, 0.1), oracle::iso_queue("B", 1, 2, 1, 0.1)}, 0.5};
  const Allocation c = brute_force_welfare(sym, 1e-3);
  CHECK(std::abs(c.rates[0] - 0.25) <= 1e-3 + 1e-12);
  CHECK(std::abs(c.rates[1] - 0.25) <= 1e-3 + 1e-12);
}

TEST_CASE("all-Isoelastic instances serve every queue") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    SystemSpec s;
    for (int i = 0; i < 4; ++i) {
      s.queues.push_back(oracle::iso_queue("q" + std::to_string(i), 0.2 + 3 * u(gen), 1.1 + 5 * u(gen), 3 * u(gen),
                                           u(gen)));
    }
    s.capacity = 0.05 + 0.5 * u(gen);
    const Allocation a = solve_welfare(s);
    CHECK(a.served_set.size() == 4);
    const auto rep = verify_interior(s, a);
    CHECK(rep.hypothesis_holds);
    CHECK(rep.all_served);
  }
}

TEST_CASE("interiority report") {
  const SystemSpec s{{oracle::lin_queue("A", 1, 10, 1, 0.1), oracle::lin_queue("B", 1, 1.3, 1, 0.1)}, 0.1};
  const Allocation a = solve_welfare(s);
  const auto rep = verify_interior(s, a);
  CHECK_FALSE(rep.queues[1].served);
  CHECK_FALSE(rep.hypothesis_holds);
  CHECK(rep.consistent());

  const SystemSpec sym{{oracle::lin_queue("A", 1, 10, 1, 1), oracle::lin_queue("B", 1, 10, 1, 1)}, 0.3};
  const auto r2 = verify_interior(sym, solve_welfare(sym));
  CHECK(r2.queues[0].served == r2.queues[1].served);
  CHECK(r2.queues[0].above_shadow == r2.queues[1].above_shadow);
  CHECK(r2.queues[0].slope_at_zero == r2.queues[1].slope_at_zero);
}

TEST_CASE("water level is monotone") {
  const SystemSpec s{{oracle::lin_queue("A", 1, 10, 1, 1), oracle::iso_queue("B", 2, 3, 1, 0.05),
                      oracle::iso_queue("C", 0.5, 1.5, 0.2, 0.3)},
                     1.0};
  double prev = kInfinity;
  for (int k = 0; k < 60; ++k) {
    const double mu = 0.05 + 0.1 * k;
    double total = 0;
    for (const auto& q : s.queues) total += inverse_welfare_slope(mu, q);
    CHECK(total < prev);
    prev = total;
  }
}

TEST_CASE("revenue objective") {
  const SystemSpec one{{oracle::lin_queue("A", 1, 10, 0, 0)}, 1};
  const std::vector<double> zero{0.0};
  CHECK(revenue_objective(zero, one) == 0.0);
  const std::vector<double> r{0.3};
  CHECK(revenue_objective(r, one) == Approx(2.1));

  const SystemSpec s{{oracle::lin_queue("A", 1, 10, 1, 1), oracle::iso_queue("B", 2, 3, 1, 0.05),
                      oracle::iso_queue("C", 0.5, 1.5, 0.2, 0.3)},
                     1.0};
  for (const std::vector<double>& lam :
       {std::vector<double>{0.1, 0.2, 0.3}, std::vector<double>{0.4, 0.0, 0.2},
        std::vector<double>{0.2, s.queues[1].rate_cap(), 0.1}}) {
    double sum = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      if (lam[i] > 0) sum += lam[i] * price_of_demand(lam[i], s.queues[i]);
    }
    CHECK(std::abs(revenue_objective(lam, s) - sum) < 1e-10);
  }
  for (double lam : {0.1, 0.3}) {
    CHECK(marginal_revenue(lam, s.queues[0]) ==
          Approx(oracle::central_diff([&](double l) { return l * oracle::price(l, s.queues[0]); }, lam)).epsilon(1e-6));
  }
}

TEST_CASE("solve_revenue single queue") {
  SystemSpec s{{oracle::lin_queue("A", 1, 10, 0, 0)}, 1.0};
  Allocation a = solve_revenue(s);
  CHECK(a.rates[0] == Approx(0.5).epsilon(1e-6));
  CHECK(a.objective_value == Approx(2.5).epsilon(1e-9));
  s.capacity = 0.3;
  a = solve_revenue(s);
  CHECK(a.rates[0] == Approx(0.3).epsilon(1e-9));
  CHECK(a.objective_value == Approx(2.1).epsilon(1e-9));
}

TEST_CASE("solve_revenue matches a dense grid on two queues") {
  for (double kappa : {0.05, 0.15, 0.3, 0.6}) {
    const SystemSpec s{{oracle::lin_queue("A", 1, 10, 1, 1), oracle::iso_queue("B", 0.8, 2.5, 0.5, 0.2)}, kappa};
    const Allocation a = solve_revenue(s);
    check_allocation_invariants(s, a);
    const auto g = oracle::revenue_grid_2(s, 600);
    CHECK(a.objective_value >= g.value - 1e-9);
    CHECK(a.objective_value == Approx(g.value).epsilon(1e-3));
  }
}

TEST_CASE("small capacity: revenue serves only the top queue") {
  for (double kappa : {0.01, 0.03, 0.05}) {
    const SystemSpec s = prop1_instance(kappa);
    CHECK(solve_revenue(s).served_set == std::vector<std::size_t>{0});
    CHECK(solve_revenue_uniform(s).allocation.served_set == std::vector<std::size_t>{0});
  }
}

TEST_CASE("uniform price examples") {
  const SystemSpec s{{oracle::lin_queue("A", 1, 10, 1, 1), oracle::lin_queue("B", 1, 10, 1, 1)}, 0.4};
  const auto u = solve_revenue_uniform(s);
  CHECK(u.price == Approx(2.30556).epsilon(1e-5));
  CHECK(u.allocation.rates[0] == Approx(0.2).epsilon(1e-6));
  CHECK(u.allocation.rates[1] == Approx(0.2).epsilon(1e-6));

  // unconstrained: single-queue optimum from a price scan
  const SystemSpec big{{oracle::lin_queue("A", 1, 10, 1, 1)}, 50};
  const auto ub = solve_revenue_uniform(big);
  const auto g = oracle::uniform_price_grid(big, 0.0, 4.0, 40000);
  CHECK(ub.allocation.objective_value >= g.value - 1e-9);
  CHECK(ub.price == Approx(g.value / g.rates[0]).epsilon(1e-3));

  const SystemSpec mixed{{oracle::lin_queue("A", 1, 10, 1, 1), oracle::lin_queue("B", 2, 7, 0.5, 0.5)}, 0.5};
  const auto um = solve_revenue_uniform(mixed);
  const auto gm = oracle::uniform_price_grid(mixed, 0.0, 4.0, 40000);
  CHECK(um.allocation.objective_value >= gm.value - 1e-9);
  CHECK(um.allocation.objective_value == Approx(gm.value).epsilon(1e-5));
}

TEST_CASE("threshold capacity") {
  const auto t = find_threshold_capacity(prop1_instance(1.0));
  CHECK(t.found);
  CHECK(t.capacity > 0.0);
  CHECK(t.top_queue == 0);
  CHECK(solve_revenue(prop1_instance(t.capacity * 0.98)).served_set.size() == 1);
  CHECK(solve_revenue(prop1_instance(t.capacity * 1.05)).served_set.size() == 2);

  double prev = t.capacity;
  for (double vb : {5.0, 4.0, 3.0}) {
    SystemSpec s = prop1_instance(1.0);
    s.queues[1].demand = LinearUniform{vb};
    const auto tv = find_threshold_capacity(s);
    CHECK(tv.capacity > prev);
    prev = tv.capacity;
  }

  SystemSpec same{{oracle::lin_queue("A", 1, 10, 1, 1), oracle::lin_queue("B", 1, 10 + 1e-6, 1, 1)}, 1};
  const auto ts = find_threshold_capacity(same);
  CHECK(ts.capacity <= 1e-3);

  SystemSpec iso{{oracle::iso_queue("A", 1, 2, 1, 1), oracle::iso_queue("B", 1, 3, 1, 1)}, 1};
  CHECK_THROWS_AS(find_threshold_capacity(iso), std::invalid_argument);
}
