#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "feemarket/model.hpp"
#include "feemarket/simulate.hpp"

namespace feemarket::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitSolverError = 2;

/// Schema violation; what() starts with the offending path.
class ScenarioError : public std::invalid_argument {
 public:
  ScenarioError(const std::string& path, const std::string& message)
      : std::invalid_argument(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct SimSection {
  double horizon = 1e5;
  double warmup = 1e4;
  std::uint64_t seed = 1;
  int replications = 10;
};

struct SweepSection {
  std::string path;
  double from = 0.0;
  double to = 0.0;
  int steps = 2;
};

struct Scenario {
  SystemSpec system;
  SimSection sim;
  OrderingPolicy policy = GlobalBid{};
  std::optional<SweepSection> sweep;
};

Scenario parse_scenario(std::string_view document);
Scenario parse_scenario_json(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& path);

/// Canonical document: every default filled, keys sorted.
nlohmann::json to_json(const Scenario& scenario);
std::string canonical_text(const Scenario& scenario);

/// SHA-256 of canonical_text, lowercase hex.
std::string scenario_hash(const Scenario& scenario);
std::string sha256_hex(std::string_view bytes);

/// Returns a copy of the scenario with the numeric field at `path`
/// (e.g. "capacity", "queues[1].demand.max_value") set to value.
Scenario with_value(const Scenario& scenario, const std::string& path, double value);

struct RunOptions {
  std::filesystem::path out_dir = "runs";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

inline constexpr std::string_view kVerbs[] = {
    "solve-welfare", "solve-revenue", "solve-revenue-uniform", "prices",     "threshold",
    "simulate",      "block-sim",     "replay-example",        "sweep",
};

/// Runs one verb and writes its artifacts under options.out_dir. Returns an
/// exit code; error messages go to err.
int run_command(std::string_view verb, const std::optional<Scenario>& scenario, const RunOptions& options,
                std::ostream& out, std::ostream& err);

}  // namespace feemarket::cli
