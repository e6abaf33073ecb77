#pragma once

// CSV and JSON serialization. CSV output is byte-stable across reruns with
// identical inputs; timestamps appear only in JSON metadata.

#include <string>
#include <vector>

#include <json.hpp>

#include "attnlab/dynamics.hpp"
#include "attnlab/theory.hpp"
#include "attnlab/types.hpp"

namespace attnlab {

/// Shortest round-trippable decimal form ("%.17g").
std::string format_double(double value);

inline constexpr const char* kTrajectoryCsvHeader =
    "step,mu,phi,stable_rank,sigma_min,rank,eps_layer,sigma2_over_sigma1";

/// One row per step, 0..T; eps_layer of the final row is nan (no layer
/// follows it).
std::string trajectory_csv(const TrajectoryRecord& record);

/// Snapshot export: header "t,i,x_1..x_d", token indices 1-based.
std::string snapshots_csv(const std::vector<std::pair<int, TokenMatrix>>& snapshots);

/// Token matrix export as a single snapshot at step t.
std::string token_matrix_csv(const TokenMatrix& X, int t = 0);

nlohmann::json to_json(const BoundReport& report);
nlohmann::json to_json(const MaskClassification& c);  // 1-based node output

struct AggregateStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // sample standard deviation over seeds
};

/// Column-wise mean/std over per-seed series (all series same length).
AggregateStats aggregate_series(const std::vector<std::vector<double>>& per_seed);

void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

/// Structural check mirroring docs/summary.schema.json: required keys
/// version/command/generated_at/config/results with the right types.
bool validate_summary_json(const nlohmann::json& summary, std::string* error = nullptr);

/// Summary skeleton carrying the version string, command name, timestamp and
/// config echo; callers fill "results".
nlohmann::json make_summary(const std::string& command, const nlohmann::json& config_echo);

}  // namespace attnlab
