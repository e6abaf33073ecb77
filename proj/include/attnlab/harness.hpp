#pragma once

// Experiment harness: binds flat configs to module calls and emits CSV/JSON.
// All commands return process exit codes: 0 success, 1 verification failure,
// 2 validation/usage error.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnlab/config.hpp"
#include "attnlab/dynamics.hpp"
#include "attnlab/mask_graph.hpp"
#include "attnlab/theory.hpp"

namespace attnlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerificationFailed = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnvVar = "ATTNLAB_OUT_DIR";

/// Resolves out_dir config key, then $ATTNLAB_OUT_DIR, then ".".
std::string resolve_out_dir(KeyValueConfig& cfg);

MaskGraph mask_from_config(KeyValueConfig& cfg);
WeightSchedule schedule_from_config(KeyValueConfig& cfg, Index d, std::uint64_t seed);
TokenMatrix initial_state_from_config(const std::string& init, int n, int d, double w,
                                      std::uint64_t seed);

/// Least-squares slope of ln(mu) versus step over points above the numerical
/// floor; NaN when fewer than two usable points exist.
double mu_log_slope(const std::vector<double>& mu_series);

int cmd_mask(KeyValueConfig cfg, std::ostream& out);
int cmd_run(KeyValueConfig cfg, std::ostream& out);
int cmd_sweep(KeyValueConfig cfg, std::ostream& out);
int cmd_verify(KeyValueConfig cfg, std::ostream& out);
int cmd_equilibrium(KeyValueConfig cfg, std::ostream& out);

/// Run independent jobs 0..count-1 on up to `threads` workers.
void parallel_for(int count, int threads, const std::function<void(int)>& job);

}  // namespace attnlab
