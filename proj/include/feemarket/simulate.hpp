#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "feemarket/model.hpp"

namespace feemarket {

// ---------------------------------------------------------------------------
// Posted-price queue simulation
// ---------------------------------------------------------------------------

enum class AdmissionRule {
  /// Join iff v Dbar(lambda_eq) - Cbar(lambda_eq) - p >= 0 at the steady-state
  /// equilibrium rate.
  kSteadyState,
  /// Diagnostic only: join on the expected sojourn given the backlog seen on
  /// arrival.
  kInstantaneousBacklog,
};

struct SimConfig {
  SystemSpec spec;
  std::vector<double> prices;  // one posted price per queue
  double horizon = 1e5;
  double warmup = 1e4;
  std::uint64_t seed = 1;
  int replications = 10;
  AdmissionRule admission = AdmissionRule::kSteadyState;
};

/// Mean across replications and the 95% Student-t half-width.
/// half_width is NaN with a single replication.
struct Estimate {
  double mean = 0.0;
  double half_width = 0.0;
};

struct QueueSimStats {
  double equilibrium_rate = 0.0;
  Estimate admitted_rate;
  Estimate mean_sojourn;
  Estimate discount;
  Estimate cost;
  Estimate revenue_rate;
  Estimate welfare_rate;
  std::uint64_t completed_jobs = 0;  // post-warmup jobs with measured sojourn, all replications
  // Per replication, counted from time zero.
  std::vector<std::uint64_t> admitted;
  std::vector<std::uint64_t> completed;
  std::vector<std::uint64_t> in_system;
};

struct SimResult {
  std::vector<QueueSimStats> queues;
  std::string rng_algorithm;
};

/// Throws SolverError when a posted price drives a queue to the stability bound.
SimResult run_posted_price_sim(const SimConfig& config);

// ---------------------------------------------------------------------------
// Block building
// ---------------------------------------------------------------------------

struct Transaction {
  std::uint64_t id = 0;  // sequence number within its queue
  std::size_t queue_index = 0;
  double valuation = 0.0;
  double arrival_time = 0.0;
  double bid = 0.0;
  std::optional<double> completion_time;
};

/// Letter for the queue followed by the sequence number, e.g. "a4".
std::string transaction_label(const Transaction& tx);

using Pool = std::vector<Transaction>;

struct GlobalBid {};
struct MarketValueWeighted {
  std::vector<double> expected_values;
};
/// Market value-weighted ordering with per-queue expected values estimated
/// as an exponential moving average of observed bids (half-life counted in
/// observations, seeded with the first bid).
struct EstimatedEma {
  double half_life = 10.0;
};
using OrderingPolicy = std::variant<GlobalBid, MarketValueWeighted, EstimatedEma>;

/// bid / expected_value.
double mvw_adjust(double bid, double expected_value);

struct BlockSelection {
  std::vector<Transaction> selected;  // execution order
  std::vector<double> scores;         // ordering key of each selected transaction
  std::vector<Pool> pools;            // remaining transactions
};

/// Top-k transactions by raw bid (GlobalBid) or adjusted bid (MVW); ties go
/// to the lower queue index, then the earlier arrival. EstimatedEma must be
/// resolved to MarketValueWeighted by the caller.
BlockSelection select_block(std::vector<Pool> pools, std::size_t k, const OrderingPolicy& policy);

struct BlockRecord {
  std::size_t block = 0;
  std::size_t queue = 0;
  std::size_t backlog = 0;
  std::uint64_t executed_cum = 0;
};

struct BlockSimResult {
  std::vector<BlockRecord> records;  // block-major, queue-minor
  std::vector<std::uint64_t> arrived;
  std::vector<std::uint64_t> executed;
  std::vector<double> throughput_shares;
  std::vector<double> final_expected_values;  // EMA estimates; empty otherwise
};

BlockSimResult run_block_sim(const SystemSpec& spec, const OrderingPolicy& policy, std::size_t k,
                             double block_interval, double horizon, std::uint64_t seed);

struct ReplayStep {
  std::string policy;
  std::vector<Transaction> executed;
  std::vector<double> scores;
  std::vector<Pool> remaining;
  std::vector<std::size_t> backlog_before;
  std::vector<std::size_t> backlog_after;
};

struct ReplayTranscript {
  std::vector<Pool> initial;
  std::vector<Pool> arrivals;
  std::vector<double> expected_values;
  std::size_t block_size = 0;
  ReplayStep global_bid;
  ReplayStep market_value_weighted;
};

/// Two-queue walkthrough: A = {15, 10, 5}, B = {8, 6, 4} with expected
/// values 10 and 6, arrivals a4 = 12, a5 = 7, b4 = 5, b5 = 7, five slots.
ReplayTranscript replay_paper_example();

}  // namespace feemarket
