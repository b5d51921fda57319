#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lrb/config.hpp"
#include "lrb/environment.hpp"
#include "lrb/metrics.hpp"
#include "lrb/policies.hpp"

namespace lrb {

inline constexpr std::string_view kArtifactVersion = "0.1.0";

/// A repetition that aborted; none of its rows are kept.
struct RunFailure {
  std::size_t repetition = 0;
  std::string message;
};

/// Running FNV-1a checksum of the decision sets one policy consumed in one
/// repetition.
struct StreamChecksum {
  PolicyKind policy = PolicyKind::tracenorm;
  std::size_t repetition = 0;
  std::uint64_t value = 0;
};

struct RunResult {
  /// Sorted by (policy, repetition, round).
  std::vector<RoundRecord> records;
  std::optional<DiagnosticsReport> diagnostics;
  ExperimentConfig config_echo;
  std::string artifact_version{kArtifactVersion};
  std::vector<RunFailure> failures;
  std::vector<StreamChecksum> checksums;
};

struct RunOptions {
  std::size_t jobs = 1;
};

/// `requested`, unless LOWRANK_BANDIT_THREADS holds a positive integer.
std::size_t resolve_jobs(std::size_t requested);

/// Arm distribution, noise level and task-matrix settings for `config`.
EnvironmentSetting make_setting(const ExperimentConfig& config);

/// Builds one policy for a repetition whose true task matrix is `w`.
std::unique_ptr<Policy> make_policy(PolicyKind kind, const ExperimentConfig& config,
                                    const Matrix& w, double sigma_op_max);

/// Every requested policy against one replay per repetition.
///
/// Repetitions run on up to `options.jobs` threads; the merged output does
/// not depend on the thread count. A repetition that throws is recorded in
/// `failures` and the others proceed. Diagnostics are computed when
/// `config.emit_diagnostics` is set.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Only the diagnostics suite, for the `diagnose` command.
DiagnosticsReport run_diagnostics(const ExperimentConfig& config, const RunOptions& options = {});

struct AggregateRow {
  PolicyKind policy = PolicyKind::tracenorm;
  std::size_t round = 0;
  std::size_t repetitions = 0;
  double mean_reward = 0.0;
  double stderr_reward = 0.0;
  double mean_regret = 0.0;
  double stderr_regret = 0.0;
};

struct Aggregate {
  /// Sorted by (policy, round).
  std::vector<AggregateRow> rows;
  /// Set when some (policy, round) has fewer repetitions than the others.
  bool partial = false;
};

/// Mean and standard error (sample std / sqrt(m)) over repetitions.
Aggregate aggregate(std::span<const RoundRecord> records);

inline constexpr std::string_view kResultsHeader =
    "policy,repetition,round,avg_cum_reward,avg_cum_regret,frob_error,lambda,solver_converged,"
    "rank_estimate";

/// 17 significant digits.
std::string format_real(double value);

std::string results_csv(std::span<const RoundRecord> records);
std::string aggregate_csv(const Aggregate& agg);
std::string realized_csv(std::span<const RoundRecord> records);
std::string diagnostics_json(const RunResult& result);

/// Writes results.csv, aggregate.csv, realized.csv, diagnostics.json and
/// config_echo.json into `out_dir` (created if needed). Returns the paths.
std::vector<std::filesystem::path> write_results(const RunResult& result,
                                                 const std::filesystem::path& out_dir);

}  // namespace lrb
