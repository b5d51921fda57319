#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lrb/environment.hpp"
#include "lrb/errors.hpp"
#include "lrb/estimator.hpp"
#include "lrb/policies.hpp"

namespace lrb {

/// Declarative description of one experiment grid. Defaults reproduce the
/// d = 20, T = 10 reward-curve setting.
struct ExperimentConfig {
  std::string name = "experiment";
  std::size_t d = 20;
  std::size_t tasks = 10;
  std::size_t horizon = 40;
  std::size_t arms = 10;
  std::size_t rank = 5;
  double sigma2 = 1.0;
  double column_norm_cap = 1.0;
  ArmKind arm_kind = ArmKind::gaussian_iid;
  std::vector<PolicyKind> policies{PolicyKind::tracenorm, PolicyKind::itl, PolicyKind::oracle};
  LambdaVariant lambda_variant = LambdaVariant::experimental;
  double lambda_scale = 1.0;
  double lambda_delta = 0.1;
  RankMode mlingreedy_rank_mode = RankMode::true_rank;
  std::size_t repetitions = 5;
  std::uint64_t master_seed = 0;
  bool fix_task_matrix = false;
  bool emit_diagnostics = false;
};

/// Raised by parse_config; carries every violation found, each prefixed
/// with its field path.
class ValidationError : public ConfigError {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Parses a flat JSON object whose keys are exactly the configuration field
/// names (d, T, N, K, r, sigma2, L, arm_kind, policies, lambda_variant,
/// lambda_l, lambda_delta, mlingreedy_rank_mode, repetitions, master_seed,
/// fix_task_matrix, emit_diagnostics, name). Missing keys take defaults;
/// unknown keys are errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Cross-field checks (rank bound, positivity, ...); empty when valid.
std::vector<std::string> validate(const ExperimentConfig& config);

/// Serializes every field, defaults included, in the parse_config format.
std::string to_json(const ExperimentConfig& config);

std::string_view to_string(LambdaVariant variant);

}  // namespace lrb
