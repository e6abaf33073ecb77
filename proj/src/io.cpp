#include "attnlab/io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "attnlab/version.hpp"

namespace attnlab {

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string trajectory_csv(const TrajectoryRecord& record) {
  std::ostringstream out;
  out << kTrajectoryCsvHeader << "\n";
  const std::size_t T = record.eps_per_layer.size();
  for (std::size_t t = 0; t < record.metrics.size(); ++t) {
    const MetricsRow& m = record.metrics[t];
    const double eps = t < T ? record.eps_per_layer[t] : std::nan("");
    out << t << ',' << format_double(m.mu) << ',' << format_double(m.phi) << ','
        << format_double(m.stable_rank) << ',' << format_double(m.sigma_min) << ','
        << m.rank << ',' << format_double(eps) << ','
        << format_double(m.sigma2_over_sigma1) << "\n";
  }
  return out.str();
}

namespace {

void append_snapshot_rows(std::ostringstream& out, int t, const TokenMatrix& X) {
  for (Index i = 0; i < X.rows(); ++i) {
    out << t << ',' << i + 1;
    for (Index j = 0; j < X.cols(); ++j) out << ',' << format_double(X(i, j));
    out << "\n";
  }
}

std::string snapshot_header(Index d) {
  std::ostringstream out;
  out << "t,i";
  for (Index j = 1; j <= d; ++j) out << ",x_" << j;
  return out.str();
}

}  // namespace

std::string snapshots_csv(const std::vector<std::pair<int, TokenMatrix>>& snapshots) {
  if (snapshots.empty()) return "t,i\n";
  std::ostringstream out;
  out << snapshot_header(snapshots.front().second.cols()) << "\n";
  for (const auto& [t, X] : snapshots) append_snapshot_rows(out, t, X);
  return out.str();
}

std::string token_matrix_csv(const TokenMatrix& X, int t) {
  std::ostringstream out;
  out << snapshot_header(X.cols()) << "\n";
  append_snapshot_rows(out, t, X);
  return out.str();
}

nlohmann::json to_json(const BoundReport& report) {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : report.violations)
    violations.push_back({{"step", v.step}, {"measured", v.measured}, {"allowed", v.allowed}});
  nlohmann::json j{{"theorem", report.theorem},
                   {"epsilon", report.epsilon},
                   {"radius", report.radius},
                   {"factor", report.factor},
                   {"violations", violations},
                   {"pass", report.pass},
                   {"blocks_checked", report.blocks_checked}};
  if (!report.note.empty()) j["note"] = report.note;
  return j;
}

nlohmann::json to_json(const MaskClassification& c) {
  nlohmann::json centers = nlohmann::json::array();
  for (int v : c.center_nodes) centers.push_back(v + 1);
  nlohmann::json j{{"has_self_loops", c.has_self_loops},
                   {"strongly_connected", c.strongly_connected},
                   {"quasi_strongly_connected", c.quasi_strongly_connected},
                   {"center_nodes", centers},
                   {"center_count", c.center_count}};
  j["radius"] = c.radius ? nlohmann::json(*c.radius) : nlohmann::json(nullptr);
  j["diameter"] = c.diameter ? nlohmann::json(*c.diameter) : nlohmann::json(nullptr);
  return j;
}

AggregateStats aggregate_series(const std::vector<std::vector<double>>& per_seed) {
  AggregateStats stats;
  if (per_seed.empty()) return stats;
  const std::size_t len = per_seed.front().size();
  for (const auto& series : per_seed)
    if (series.size() != len)
      throw std::invalid_argument("aggregate_series: ragged per-seed series");
  const double n = static_cast<double>(per_seed.size());
  stats.mean.assign(len, 0.0);
  stats.stddev.assign(len, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    double sum = 0.0;
    for (const auto& s : per_seed) sum += s[t];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& s : per_seed) ss += (s[t] - mean) * (s[t] - mean);
    stats.mean[t] = mean;
    stats.stddev[t] = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return stats;
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << contents;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

bool validate_summary_json(const nlohmann::json& summary, std::string* error) {
  auto fail = [&](const std::string& why) {
    if (error) *error = why;
    return false;
  };
  if (!summary.is_object()) return fail("summary must be an object");
  for (const char* key : {"version", "command", "generated_at"}) {
    if (!summary.contains(key) || !summary[key].is_string())
      return fail(std::string("missing string field: ") + key);
  }
  for (const char* key : {"config", "results"}) {
    if (!summary.contains(key) || !summary[key].is_object())
      return fail(std::string("missing object field: ") + key);
  }
  return true;
}

nlohmann::json make_summary(const std::string& command, const nlohmann::json& config_echo) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
  return nlohmann::json{{"version", kVersionString},
                        {"command", command},
                        {"generated_at", stamp},
                        {"config", config_echo},
                        {"results", nlohmann::json::object()}};
}

}  // namespace attnlab
