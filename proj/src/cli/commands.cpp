#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <future>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "feemarket/allocate.hpp"
#include "feemarket/cli.hpp"
#include "feemarket/equilibrium.hpp"
#include "feemarket/pricing.hpp"
#include "feemarket/rng.hpp"
#include "feemarket/simulate.hpp"

#ifndef FEEMARKET_VERSION
#define FEEMARKET_VERSION "0.0.0"
#endif

namespace feemarket::cli {

using nlohmann::json;

namespace {

struct Artifacts {
  json summary;
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
  std::string human;
};

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{}", x);
}

class Csv {
 public:
  explicit Csv(std::initializer_list<std::string_view> header) {
    std::string line;
    for (auto h : header) line += (line.empty() ? "" : ",") + std::string(h);
    text_ += line + "\n";
  }
  template <class... Ts>
  void row(const Ts&... cells) {
    std::string line;
    ((line += (line.empty() ? "" : ",") + cell(cells)), ...);
    text_ += line + "\n";
  }
  const std::string& text() const { return text_; }

 private:
  static std::string cell(double x) { return num(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class T>
    requires std::is_integral_v<T>
  static std::string cell(T x) {
    return fmt::format("{}", x);
  }
  std::string text_;
};

std::string served_label(const SystemSpec& spec, const std::vector<std::size_t>& served) {
  std::string out = "{";
  for (std::size_t k = 0; k < served.size(); ++k) {
    out += (k ? "," : "") + spec.queues[served[k]].name;
  }
  return out + "}";
}

json allocation_json(const SystemSpec& spec, const Allocation& a) {
  json served = json::array();
  for (std::size_t i : a.served_set) served.push_back(spec.queues[i].name);
  return {
      {"rates", a.rates},
      {"served_set", served},
      {"shadow_price", a.shadow_price},
      {"objective_value", a.objective_value},
      {"total_rate", a.total_rate()},
  };
}

json price_schedule_json(const SystemSpec& spec, const PriceSchedule& ps) {
  json arr = json::array();
  for (std::size_t i = 0; i < ps.queues.size(); ++i) {
    const PriceComponents& pc = ps.queues[i];
    arr.push_back({
        {"queue", spec.queues[i].name},
        {"price", pc.price},
        {"local_discount_externality", pc.local_discount_externality},
        {"local_cost_externality", pc.local_cost_externality},
        {"global_term", pc.global_term},
        {"served", pc.served},
    });
  }
  return arr;
}

json negative_prices(const SystemSpec& spec, const std::vector<double>& prices) {
  json names = json::array();
  for (std::size_t i = 0; i < prices.size(); ++i) {
    if (prices[i] < 0.0) names.push_back(spec.queues[i].name);
  }
  return names;
}

std::string price_note(double p) { return p < 0.0 ? " (negative)" : ""; }

std::string allocation_lines(const SystemSpec& spec, const Allocation& a, const std::vector<double>& prices) {
  std::string s;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    s += fmt::format("  {:<12} lambda={:<14.8g} price={:.8g}{}\n", spec.queues[i].name, a.rates[i], prices[i],
                     price_note(prices[i]));
  }
  s += fmt::format("  served={} mu={:.8g} objective={:.8g}\n", served_label(spec, a.served_set), a.shadow_price,
                   a.objective_value);
  return s;
}

std::string welfare_csv(const SystemSpec& spec, const Allocation& a, const PriceSchedule& ps) {
  Csv csv{"queue", "lambda", "price", "p_local_discount", "p_local_cost", "p_global_mu"};
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const PriceComponents& pc = ps.queues[i];
    csv.row(spec.queues[i].name, a.rates[i], pc.price, pc.local_discount_externality, pc.local_cost_externality,
            pc.global_term);
  }
  return csv.text();
}

// Revenue allocations carry no Pigouvian decomposition; those cells stay empty.
std::string plain_csv(const SystemSpec& spec, const Allocation& a, const std::vector<double>& prices) {
  Csv csv{"queue", "lambda", "price", "p_local_discount", "p_local_cost", "p_global_mu"};
  for (std::size_t i = 0; i < spec.size(); ++i) {
    csv.row(spec.queues[i].name, a.rates[i], prices[i], "", "", "");
  }
  return csv.text();
}

std::vector<double> supporting_prices(const SystemSpec& spec, const Allocation& a) {
  std::vector<double> prices(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    prices[i] = a.rates[i] > 0.0 ? price_of_demand(a.rates[i], spec.queues[i]) : choke_price(spec.queues[i]);
  }
  return prices;
}

std::vector<double> schedule_prices(const PriceSchedule& ps) {
  std::vector<double> p;
  for (const auto& pc : ps.queues) p.push_back(pc.price);
  return p;
}

Artifacts cmd_solve_welfare(const Scenario& sc) {
  const SystemSpec& spec = sc.system;
  const Allocation a = solve_welfare(spec);
  const PriceSchedule ps = optimal_prices(spec, a);
  const InteriorityReport rep = verify_interior(spec, a);
  json interior = json::array();
  for (std::size_t i = 0; i < spec.size(); ++i) {
    interior.push_back({{"queue", spec.queues[i].name},
                        {"welfare_slope_at_zero", rep.queues[i].slope_at_zero},
                        {"served", rep.queues[i].served},
                        {"above_shadow_price", rep.queues[i].above_shadow}});
  }
  Artifacts out;
  out.summary = {
      {"command", "solve-welfare"},
      {"allocation", allocation_json(spec, a)},
      {"prices", price_schedule_json(spec, ps)},
      {"negative_prices", negative_prices(spec, schedule_prices(ps))},
      {"interiority",
       {{"queues", interior}, {"hypothesis_holds", rep.hypothesis_holds}, {"all_served", rep.all_served}}},
  };
  out.files.emplace_back("allocations.csv", welfare_csv(spec, a, ps));
  out.human = "welfare-maximizing allocation\n" + allocation_lines(spec, a, schedule_prices(ps));
  return out;
}

Artifacts cmd_solve_revenue(const Scenario& sc) {
  const SystemSpec& spec = sc.system;
  const Allocation a = solve_revenue(spec);
  const std::vector<double> prices = supporting_prices(spec, a);
  Artifacts out;
  out.summary = {
      {"command", "solve-revenue"},
      {"allocation", allocation_json(spec, a)},
      {"prices", prices},
      {"negative_prices", negative_prices(spec, prices)},
  };
  out.files.emplace_back("allocations.csv", plain_csv(spec, a, prices));
  out.human = "revenue-maximizing relative prices\n" + allocation_lines(spec, a, prices);
  return out;
}

Artifacts cmd_solve_revenue_uniform(const Scenario& sc) {
  const SystemSpec& spec = sc.system;
  const UniformPriceSolution u = solve_revenue_uniform(spec);
  const std::vector<double> prices(spec.size(), u.price);
  Artifacts out;
  out.summary = {
      {"command", "solve-revenue-uniform"},
      {"price", u.price},
      {"allocation", allocation_json(spec, u.allocation)},
  };
  out.files.emplace_back("allocations.csv", plain_csv(spec, u.allocation, prices));
  out.human = fmt::format("revenue-maximizing uniform price {:.8g}\n", u.price) +
              allocation_lines(spec, u.allocation, prices);
  return out;
}

Artifacts cmd_prices(const Scenario& sc) {
  const SystemSpec& spec = sc.system;
  const Allocation a = solve_welfare(spec);
  const PriceSchedule ps = optimal_prices(spec, a);
  json ratios = json::array();
  std::string lines;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.size(); ++j) {
      json r = {{"i", spec.queues[i].name}, {"j", spec.queues[j].name}};
      r["exact"] = ps.queues[i].price / ps.queues[j].price;
      r["limit"] = a.rates[j] > 0.0 ? json(limit_price_ratio(i, j, spec, a)) : json(nullptr);
      try {
        r["approx"] = approx_price_ratio(i, j, spec, a);
      } catch (const std::invalid_argument&) {
        r["approx"] = nullptr;
      }
      lines += fmt::format("  p[{}]/p[{}] exact={:.8g}\n", spec.queues[i].name, spec.queues[j].name,
                           r["exact"].get<double>());
      ratios.push_back(r);
    }
  }
  Artifacts out;
  out.summary = {
      {"command", "prices"},
      {"allocation", allocation_json(spec, a)},
      {"prices", price_schedule_json(spec, ps)},
      {"negative_prices", negative_prices(spec, schedule_prices(ps))},
      {"ratios", ratios},
  };
  out.files.emplace_back("allocations.csv", welfare_csv(spec, a, ps));
  std::string human = "socially optimal prices\n";
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const PriceComponents& pc = ps.queues[i];
    human += fmt::format("  {:<12} p={:.8g} = {:.8g} (discount) + {:.8g} (cost) + {:.8g} (global){}\n",
                         spec.queues[i].name, pc.price, pc.local_discount_externality, pc.local_cost_externality,
                         pc.global_term, price_note(pc.price));
  }
  out.human = human + lines;
  return out;
}

Artifacts cmd_threshold(const Scenario& sc) {
  const SystemSpec& spec = sc.system;
  const ThresholdResult t = find_threshold_capacity(spec);
  Artifacts out;
  out.summary = {
      {"command", "threshold"},
      {"threshold_capacity", t.capacity},
      {"found", t.found},
      {"scan_bound", t.scan_bound},
      {"top_queue", spec.queues[t.top_queue].name},
  };
  out.human = t.found ? fmt::format("threshold capacity {:.6g} (top queue {})\n", t.capacity,
                                    spec.queues[t.top_queue].name)
                      : fmt::format("served set never left {{{}}} up to scan bound {:.6g} (flagged)\n",
                                    spec.queues[t.top_queue].name, t.scan_bound);
  return out;
}

Artifacts cmd_simulate(const Scenario& sc) {
  const SystemSpec& spec = sc.system;
  const Allocation a = solve_welfare(spec);
  const PriceSchedule ps = optimal_prices(spec, a);
  SimConfig cfg;
  cfg.spec = spec;
  cfg.prices = schedule_prices(ps);
  cfg.horizon = sc.sim.horizon;
  cfg.warmup = sc.sim.warmup;
  cfg.seed = sc.sim.seed;
  cfg.replications = sc.sim.replications;
  const SimResult r = run_posted_price_sim(cfg);

  Csv csv{"queue",
          "lambda_hat",
          "mean_sojourn",
          "discount_hat",
          "cost_hat",
          "revenue_rate",
          "welfare_rate",
          "ci_halfwidth_lambda_hat",
          "ci_halfwidth_mean_sojourn",
          "ci_halfwidth_discount_hat",
          "ci_halfwidth_cost_hat",
          "ci_halfwidth_revenue_rate",
          "ci_halfwidth_welfare_rate"};
  json queues = json::array();
  std::string human = "posted-price simulation at socially optimal prices\n";
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const QueueSimStats& q = r.queues[i];
    csv.row(spec.queues[i].name, q.admitted_rate.mean, q.mean_sojourn.mean, q.discount.mean, q.cost.mean,
            q.revenue_rate.mean, q.welfare_rate.mean, q.admitted_rate.half_width, q.mean_sojourn.half_width,
            q.discount.half_width, q.cost.half_width, q.revenue_rate.half_width, q.welfare_rate.half_width);
    auto est = [](const Estimate& e) { return json{{"mean", e.mean}, {"half_width", e.half_width}}; };
    queues.push_back({
        {"queue", spec.queues[i].name},
        {"price", cfg.prices[i]},
        {"solver_rate", a.rates[i]},
        {"equilibrium_rate", q.equilibrium_rate},
        {"lambda_hat", est(q.admitted_rate)},
        {"mean_sojourn", est(q.mean_sojourn)},
        {"discount_hat", est(q.discount)},
        {"cost_hat", est(q.cost)},
        {"revenue_rate", est(q.revenue_rate)},
        {"welfare_rate", est(q.welfare_rate)},
        {"completed_jobs", q.completed_jobs},
    });
    human += fmt::format("  {:<12} lambda*={:.6g} lambda_hat={:.6g} +/- {:.2g}  W_hat={:.6g}\n",
                         spec.queues[i].name, a.rates[i], q.admitted_rate.mean, q.admitted_rate.half_width,
                         q.mean_sojourn.mean);
  }
  Artifacts out;
  out.summary = {
      {"command", "simulate"},
      {"rng", {{"algorithm", r.rng_algorithm}, {"seed", cfg.seed}}},
      {"horizon", cfg.horizon},
      {"warmup", cfg.warmup},
      {"replications", cfg.replications},
      {"negative_prices", negative_prices(spec, cfg.prices)},
      {"queues", queues},
  };
  out.files.emplace_back("sim.csv", csv.text());
  out.human = human;
  return out;
}

Artifacts cmd_block_sim(const Scenario& sc) {
  const SystemSpec& spec = sc.system;
  constexpr double kBlockInterval = 1.0;
  const auto k = static_cast<std::size_t>(std::max(1.0, std::floor(spec.capacity * kBlockInterval + 1e-9)));
  const BlockSimResult r = run_block_sim(spec, sc.policy, k, kBlockInterval, sc.sim.horizon, sc.sim.seed);

  Csv csv{"block", "queue", "backlog", "executed_cum"};
  for (const BlockRecord& rec : r.records) {
    csv.row(rec.block, spec.queues[rec.queue].name, rec.backlog, rec.executed_cum);
  }
  json queues = json::array();
  std::string human = fmt::format("block simulation, {} slots per block\n", k);
  const std::size_t blocks = spec.size() ? r.records.size() / spec.size() : 0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const std::size_t backlog = blocks ? r.records[(blocks - 1) * spec.size() + i].backlog : 0;
    json q = {{"queue", spec.queues[i].name},
              {"arrived", r.arrived[i]},
              {"executed", r.executed[i]},
              {"throughput_share", r.throughput_shares[i]},
              {"final_backlog", backlog}};
    if (!r.final_expected_values.empty()) q["final_expected_value"] = r.final_expected_values[i];
    queues.push_back(q);
    human += fmt::format("  {:<12} executed={} share={:.4f} final backlog={}\n", spec.queues[i].name,
                         r.executed[i], r.throughput_shares[i], backlog);
  }
  Artifacts out;
  out.summary = {
      {"command", "block-sim"},
      {"rng", {{"algorithm", CounterRng::kAlgorithm}, {"seed", sc.sim.seed}}},
      {"block_size", k},
      {"block_interval", kBlockInterval},
      {"blocks", blocks},
      {"policy", to_json(sc)["policy"]},
      {"queues", queues},
  };
  out.files.emplace_back("blocks.csv", csv.text());
  out.human = human;
  return out;
}

json pools_json(const std::vector<Pool>& pools) {
  json arr = json::array();
  for (const Pool& p : pools) {
    json q = json::array();
    for (const Transaction& tx : p) q.push_back({{"label", transaction_label(tx)}, {"bid", tx.bid}});
    arr.push_back(q);
  }
  return arr;
}

json step_json(const ReplayStep& step) {
  json executed = json::array();
  for (std::size_t k = 0; k < step.executed.size(); ++k) {
    executed.push_back({{"label", transaction_label(step.executed[k])},
                        {"bid", step.executed[k].bid},
                        {"score", step.scores[k]}});
  }
  return {{"policy", step.policy},
          {"executed", executed},
          {"remaining", pools_json(step.remaining)},
          {"backlog_before", step.backlog_before},
          {"backlog_after", step.backlog_after}};
}

std::string step_text(const ReplayStep& step) {
  std::string s = fmt::format("  {:<10} executed:", step.policy);
  for (std::size_t k = 0; k < step.executed.size(); ++k) {
    s += fmt::format(" {}={:.4g}", transaction_label(step.executed[k]), step.scores[k]);
  }
  s += "\n             remaining:";
  for (const Pool& p : step.remaining) {
    s += " [";
    for (std::size_t k = 0; k < p.size(); ++k) s += fmt::format("{}{}={:g}", k ? " " : "", transaction_label(p[k]), p[k].bid);
    s += "]";
  }
  return s + "\n";
}

Artifacts cmd_replay() {
  const ReplayTranscript tr = replay_paper_example();
  json transcript = {
      {"initial", pools_json(tr.initial)},
      {"arrivals", pools_json(tr.arrivals)},
      {"expected_values", tr.expected_values},
      {"block_size", tr.block_size},
      {"global_bid", step_json(tr.global_bid)},
      {"mvw", step_json(tr.market_value_weighted)},
  };
  Artifacts out;
  out.summary = {{"command", "replay-example"}, {"transcript", transcript}};
  out.files.emplace_back("replay.json", transcript.dump(2) + "\n");
  out.human = "two-queue block building example\n" + step_text(tr.global_bid) + step_text(tr.market_value_weighted);
  return out;
}

json sweep_point(const Scenario& base, const SweepSection& sw, int index, double value) {
  json point = {{"index", index}, {"value", value}};
  try {
    const Scenario sc = with_value(base, sw.path, value);
    const Allocation w = solve_welfare(sc.system);
    const Allocation r = solve_revenue(sc.system);
    const UniformPriceSolution u = solve_revenue_uniform(sc.system);
    point["welfare"] = allocation_json(sc.system, w);
    point["welfare"]["served_label"] = served_label(sc.system, w.served_set);
    point["revenue"] = allocation_json(sc.system, r);
    point["revenue"]["served_label"] = served_label(sc.system, r.served_set);
    point["uniform"] = allocation_json(sc.system, u.allocation);
    point["uniform"]["price"] = u.price;
    point["uniform"]["served_label"] = served_label(sc.system, u.allocation.served_set);
  } catch (const std::exception& e) {
    point["error"] = e.what();
  }
  return point;
}

Artifacts cmd_sweep(const Scenario& sc) {
  if (!sc.sweep) throw ScenarioError("sweep", "the sweep command requires a sweep section");
  const SweepSection& sw = *sc.sweep;
  std::vector<double> values(static_cast<std::size_t>(sw.steps));
  for (int k = 0; k < sw.steps; ++k) {
    values[k] = sw.steps == 1 ? sw.from : sw.from + (sw.to - sw.from) * k / (sw.steps - 1);
  }
  // Points are independent; gathered by index.
  std::vector<std::future<json>> pending;
  for (int k = 0; k < sw.steps; ++k) {
    pending.push_back(std::async(std::launch::async, sweep_point, std::cref(sc), std::cref(sw), k, values[k]));
  }
  std::vector<json> points;
  for (auto& f : pending) points.push_back(f.get());

  Artifacts out;
  Csv csv{"index",           "value",          "welfare_served", "welfare_mu",     "welfare_objective",
          "revenue_served",  "revenue_objective", "uniform_served", "uniform_price", "uniform_objective",
          "error"};
  std::string human = fmt::format("sweep over {} ({} points)\n", sw.path, sw.steps);
  for (const json& p : points) {
    const int k = p["index"].get<int>();
    out.files.emplace_back(fmt::format("points/point_{:04d}.json", k), p.dump(2) + "\n");
    if (p.contains("error")) {
      csv.row(k, p["value"].get<double>(), "", "", "", "", "", "", "", "", "\"" + p["error"].get<std::string>() + "\"");
      human += fmt::format("  [{:>3}] {:<12.6g} error: {}\n", k, p["value"].get<double>(), p["error"].get<std::string>());
      continue;
    }
    const json& w = p["welfare"];
    const json& r = p["revenue"];
    const json& u = p["uniform"];
    csv.row(k, p["value"].get<double>(), w["served_label"].get<std::string>(), w["shadow_price"].get<double>(),
            w["objective_value"].get<double>(), r["served_label"].get<std::string>(),
            r["objective_value"].get<double>(), u["served_label"].get<std::string>(), u["price"].get<double>(),
            u["objective_value"].get<double>(), "");
    human += fmt::format("  [{:>3}] {:<12.6g} welfare {} revenue {} uniform {}\n", k, p["value"].get<double>(),
                         w["served_label"].get<std::string>(), r["served_label"].get<std::string>(),
                         u["served_label"].get<std::string>());
  }
  out.files.emplace_back("sweep.csv", csv.text());
  out.summary = {{"command", "sweep"}, {"path", sw.path}, {"values", values}, {"points", points}};
  out.human = human;
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::filesystem::filesystem_error("cannot write", path, std::make_error_code(std::errc::io_error));
  f << contents;
}

Artifacts dispatch(std::string_view verb, const Scenario* sc) {
  if (verb == "replay-example") return cmd_replay();
  if (sc == nullptr) throw ScenarioError("--scenario", fmt::format("'{}' requires a scenario", verb));
  if (verb == "solve-welfare") return cmd_solve_welfare(*sc);
  if (verb == "solve-revenue") return cmd_solve_revenue(*sc);
  if (verb == "solve-revenue-uniform") return cmd_solve_revenue_uniform(*sc);
  if (verb == "prices") return cmd_prices(*sc);
  if (verb == "threshold") return cmd_threshold(*sc);
  if (verb == "simulate") return cmd_simulate(*sc);
  if (verb == "block-sim") return cmd_block_sim(*sc);
  if (verb == "sweep") return cmd_sweep(*sc);
  throw std::invalid_argument(fmt::format("unknown command '{}'", verb));
}

}  // namespace

int run_command(std::string_view verb, const std::optional<Scenario>& scenario, const RunOptions& options,
                std::ostream& out, std::ostream& err) {
  try {
    std::optional<Scenario> effective = scenario;
    if (effective && options.seed) effective->sim.seed = *options.seed;

    Artifacts art = dispatch(verb, effective ? &*effective : nullptr);

    const auto& dir = options.out_dir;
    std::filesystem::create_directories(dir);
    for (const auto& [name, contents] : art.files) write_file(dir / name, contents);
    write_file(dir / "summary.json", art.summary.dump(2) + "\n");
    if (scenario) write_file(dir / "scenario.json", canonical_text(*scenario));

    json record = {
        {"scenario_hash", scenario ? json(scenario_hash(*scenario)) : json(nullptr)},
        {"command", std::string(verb)},
        {"seed", effective ? json(effective->sim.seed) : json(nullptr)},
        {"tool_version", FEEMARKET_VERSION},
        {"timestamp", utc_timestamp()},
        {"result", art.summary},
    };
    write_file(dir / "run_record.json", record.dump(2) + "\n");

    if (!options.quiet) out << art.human << fmt::format("results written to {}\n", dir.string());
    return kExitOk;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << "\n";
    return kExitSolverError;
  } catch (const std::domain_error& e) {
    err << "solver error: " << e.what() << "\n";
    return kExitSolverError;
  } catch (const std::invalid_argument& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolverError;
  }
}

}  // namespace feemarket::cli
