#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "feemarket/demand.hpp"
#include "feemarket/rng.hpp"
#include "feemarket/simulate.hpp"

namespace feemarket {

namespace {

struct Candidate {
  double score;
  std::size_t queue;
  std::size_t position;  // index into the queue's pool
};

// Higher score first; ties to the lower queue, then the earlier arrival.
bool ranks_before(const Candidate& a, const Candidate& b, const std::vector<Pool>& pools) {
  if (a.score != b.score) return a.score > b.score;
  if (a.queue != b.queue) return a.queue < b.queue;
  const Transaction& ta = pools[a.queue][a.position];
  const Transaction& tb = pools[b.queue][b.position];
  if (ta.arrival_time != tb.arrival_time) return ta.arrival_time < tb.arrival_time;
  return ta.id < tb.id;
}

std::vector<double> scale_for(const OrderingPolicy& policy, std::size_t queues) {
  if (std::holds_alternative<GlobalBid>(policy)) return std::vector<double>(queues, 1.0);
  if (std::holds_alternative<EstimatedEma>(policy)) {
    throw std::invalid_argument("select_block: EMA policy must be resolved to expected values first");
  }
  const auto& values = std::get<MarketValueWeighted>(policy).expected_values;
  if (values.size() != queues) {
    throw std::invalid_argument(
        fmt::format("select_block: {} expected values for {} queues", values.size(), queues));
  }
  for (double v : values) {
    if (!(v > 0.0)) throw std::invalid_argument("select_block: expected values must be positive");
  }
  return values;
}

}  // namespace

std::string transaction_label(const Transaction& tx) {
  return fmt::format("{}{}", static_cast<char>('a' + tx.queue_index % 26), tx.id);
}

double mvw_adjust(double bid, double expected_value) {
  if (!(expected_value > 0.0)) throw std::invalid_argument("mvw_adjust: expected value must be positive");
  return bid / expected_value;
}

BlockSelection select_block(std::vector<Pool> pools, std::size_t k, const OrderingPolicy& policy) {
  const std::vector<double> scale = scale_for(policy, pools.size());
  const bool weighted = !std::holds_alternative<GlobalBid>(policy);

  // Only the top k of each pool can be selected.
  std::vector<Candidate> candidates;
  for (std::size_t q = 0; q < pools.size(); ++q) {
    std::vector<Candidate> local;
    local.reserve(pools[q].size());
    for (std::size_t j = 0; j < pools[q].size(); ++j) {
      const double bid = pools[q][j].bid;
      local.push_back({weighted ? mvw_adjust(bid, scale[q]) : bid, q, j});
    }
    const std::size_t keep = std::min(k, local.size());
    std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep), local.end(),
                      [&](const Candidate& a, const Candidate& b) { return ranks_before(a, b, pools); });
    candidates.insert(candidates.end(), local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(candidates.begin(), candidates.end(),
            [&](const Candidate& a, const Candidate& b) { return ranks_before(a, b, pools); });
  candidates.resize(std::min(k, candidates.size()));

  BlockSelection out;
  std::vector<std::vector<bool>> taken(pools.size());
  for (std::size_t q = 0; q < pools.size(); ++q) taken[q].assign(pools[q].size(), false);
  for (const Candidate& c : candidates) {
    out.selected.push_back(pools[c.queue][c.position]);
    out.scores.push_back(c.score);
    taken[c.queue][c.position] = true;
  }
  out.pools.resize(pools.size());
  for (std::size_t q = 0; q < pools.size(); ++q) {
    for (std::size_t j = 0; j < pools[q].size(); ++j) {
      if (!taken[q][j]) out.pools[q].push_back(std::move(pools[q][j]));
    }
  }
  return out;
}

BlockSimResult run_block_sim(const SystemSpec& spec, const OrderingPolicy& policy, std::size_t k,
                             double block_interval, double horizon, std::uint64_t seed) {
  require_valid(spec);
  if (k < 1) throw std::invalid_argument("run_block_sim: block size must be at least 1");
  if (!(block_interval > 0.0)) throw std::invalid_argument("run_block_sim: block interval must be positive");
  const std::size_t n = spec.size();
  if (std::holds_alternative<MarketValueWeighted>(policy)) scale_for(policy, n);
  const auto* ema = std::get_if<EstimatedEma>(&policy);
  if (ema && !(ema->half_life > 0.0)) throw std::invalid_argument("run_block_sim: half-life must be positive");
  const double alpha = ema ? 1.0 - std::exp2(-1.0 / ema->half_life) : 0.0;

  std::vector<CounterRng> arrival_rng;
  std::vector<CounterRng> bid_rng;
  std::vector<double> next_arrival(n);
  for (std::size_t q = 0; q < n; ++q) {
    arrival_rng.emplace_back(seed, 0, q, StreamPurpose::kBlockArrival);
    bid_rng.emplace_back(seed, 0, q, StreamPurpose::kBlockBid);
    next_arrival[q] = arrival_rng[q].exponential(spec.queues[q].market_size);
  }

  BlockSimResult result;
  result.arrived.assign(n, 0);
  result.executed.assign(n, 0);
  std::vector<Pool> pools(n);
  std::vector<double> estimate(n, 1.0);
  std::vector<bool> observed(n, false);

  const auto blocks = static_cast<std::size_t>(std::floor(horizon / block_interval + 1e-12));
  for (std::size_t b = 1; b <= blocks; ++b) {
    const double now = static_cast<double>(b) * block_interval;
    for (std::size_t q = 0; q < n; ++q) {
      const QueueSpec& spec_q = spec.queues[q];
      while (next_arrival[q] <= now) {
        Transaction tx;
        tx.id = ++result.arrived[q];
        tx.queue_index = q;
        tx.arrival_time = next_arrival[q];
        tx.valuation = sample_value(bid_rng[q].uniform_open_zero(), spec_q.demand);
        tx.bid = tx.valuation;
        if (ema) {
          estimate[q] = observed[q] ? estimate[q] + alpha * (tx.bid - estimate[q]) : tx.bid;
          observed[q] = true;
        }
        pools[q].push_back(tx);
        next_arrival[q] += arrival_rng[q].exponential(spec_q.market_size);
      }
    }

    OrderingPolicy effective = policy;
    if (ema) effective = MarketValueWeighted{estimate};
    BlockSelection sel = select_block(std::move(pools), k, effective);
    for (Transaction& tx : sel.selected) {
      tx.completion_time = now;
      ++result.executed[tx.queue_index];
    }
    pools = std::move(sel.pools);
    for (std::size_t q = 0; q < n; ++q) {
      result.records.push_back({b, q, pools[q].size(), result.executed[q]});
    }
  }

  std::uint64_t total = 0;
  for (auto e : result.executed) total += e;
  for (std::size_t q = 0; q < n; ++q) {
    result.throughput_shares.push_back(total ? static_cast<double>(result.executed[q]) / total : 0.0);
  }
  if (ema) result.final_expected_values = estimate;
  return result;
}

ReplayTranscript replay_paper_example() {
  auto tx = [](std::size_t queue, std::uint64_t id, double value, double time) {
    Transaction t;
    t.id = id;
    t.queue_index = queue;
    t.valuation = value;
    t.bid = value;
    t.arrival_time = time;
    return t;
  };
  ReplayTranscript tr;
  tr.block_size = 5;
  tr.expected_values = {10.0, 6.0};
  tr.initial = {
      {tx(0, 1, 15, 0), tx(0, 2, 10, 0), tx(0, 3, 5, 0)},
      {tx(1, 1, 8, 0), tx(1, 2, 6, 0), tx(1, 3, 4, 0)},
  };
  tr.arrivals = {
      {tx(0, 4, 12, 1), tx(0, 5, 7, 1)},
      {tx(1, 4, 5, 1), tx(1, 5, 7, 1)},
  };

  std::vector<Pool> pending = tr.initial;
  for (std::size_t q = 0; q < pending.size(); ++q) {
    pending[q].insert(pending[q].end(), tr.arrivals[q].begin(), tr.arrivals[q].end());
  }

  auto run = [&](const char* name, const OrderingPolicy& policy) {
    ReplayStep step;
    step.policy = name;
    for (const Pool& p : tr.initial) step.backlog_before.push_back(p.size());
    BlockSelection sel = select_block(pending, tr.block_size, policy);
    step.executed = std::move(sel.selected);
    step.scores = std::move(sel.scores);
    step.remaining = std::move(sel.pools);
    for (Pool& p : step.remaining) {
      // Display order: highest bid first.
      std::stable_sort(p.begin(), p.end(),
                       [](const Transaction& a, const Transaction& b) { return a.bid > b.bid; });
      step.backlog_after.push_back(p.size());
    }
    return step;
  };
  tr.global_bid = run("global_bid", GlobalBid{});
  tr.market_value_weighted = run("mvw", MarketValueWeighted{tr.expected_values});
  return tr;
}

}  // namespace feemarket
