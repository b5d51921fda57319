#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lrb/environment.hpp"
#include "lrb/estimator.hpp"

namespace lrb {

enum class PolicyKind { tracenorm, itl, oracle, mlingreedy };

std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view text);

/// Greedy multi-task bandit policy.
///
/// Before any data (round 0) arms are chosen uniformly at random per task;
/// afterwards each task plays argmax_k x_k . [estimate]_t with the smallest
/// index winning ties. Subclasses only decide how the estimate is refreshed
/// from the accumulated histories.
class Policy {
 public:
  Policy(std::size_t dim, std::size_t tasks);
  virtual ~Policy() = default;

  virtual PolicyKind kind() const = 0;

  /// `sets` holds one decision set per task. The first round draws from `rng`.
  std::vector<std::size_t> select_arms(std::span<const DecisionSet> sets, RngStream& rng) const;
  /// Same, with the first-round random choices supplied by the caller.
  std::vector<std::size_t> select_arms(std::span<const DecisionSet> sets,
                                       std::span<const std::size_t> first_round) const;

  /// Appends one (context, reward) pair per task (contexts are the columns of
  /// a d x T matrix) and refreshes the estimate.
  void observe(const Matrix& contexts, std::span<const double> rewards);

  const Matrix& estimate() const { return estimate_; }
  const MultiTaskData& histories() const { return histories_; }
  std::size_t round() const { return histories_.rounds(); }
  std::size_t dim() const { return histories_.dim(); }
  std::size_t tasks() const { return histories_.tasks(); }

  /// False when the last refresh hit an iteration cap or was rejected.
  virtual bool last_update_converged() const { return true; }
  virtual std::optional<double> last_lambda() const { return std::nullopt; }

 protected:
  virtual void refit() = 0;

  Matrix estimate_;
  MultiTaskData histories_;
};

/// Trace-norm bandit: refit the nuclear-norm regularized estimator on all
/// data every round, warm-started at the previous estimate.
///
/// Knows only the lambda rule (confidence level and noise level) and the
/// solver settings; never the rank of the task matrix.
class TraceNormPolicy final : public Policy {
 public:
  struct Settings {
    LambdaRule lambda;
    SolverOptions solver;
    std::size_t horizon = 40;
  };

  TraceNormPolicy(std::size_t dim, std::size_t tasks, Settings settings);

  PolicyKind kind() const override { return PolicyKind::tracenorm; }
  bool last_update_converged() const override { return converged_; }
  std::optional<double> last_lambda() const override { return lambda_; }
  const FitResult& last_fit() const { return fit_; }

 protected:
  void refit() override;

 private:
  Settings settings_;
  std::optional<double> lambda_;
  bool converged_ = true;
  FitResult fit_;
};

/// Independent task learning: per-task ridge regression.
class ItlPolicy final : public Policy {
 public:
  ItlPolicy(std::size_t dim, std::size_t tasks, double ridge = 1.0);

  PolicyKind kind() const override { return PolicyKind::itl; }

 protected:
  void refit() override;

 private:
  double ridge_;
};

/// d x r matrix with orthonormal columns spanning the task matrix's column space.
struct OracleBasis {
  Matrix b;

  /// Top-`rank` left singular vectors of the true task matrix.
  static OracleBasis from_task_matrix(const Matrix& w, std::size_t rank);
};

/// Per-task ridge regression on the r-dimensional features b^T x.
class OraclePolicy final : public Policy {
 public:
  OraclePolicy(std::size_t tasks, OracleBasis basis, double ridge = 1.0);

  PolicyKind kind() const override { return PolicyKind::oracle; }
  const OracleBasis& basis() const { return basis_; }

 protected:
  void refit() override;

 private:
  OracleBasis basis_;
  double ridge_;
};

enum class RankMode { true_rank, over, under };

std::string_view to_string(RankMode mode);
RankMode parse_rank_mode(std::string_view text);

/// Rank parameter handed to the factorization baseline: r, min(2r, d, T) or
/// max(floor(r/2), 1).
std::size_t factor_rank(RankMode mode, std::size_t rank, std::size_t dim, std::size_t tasks);

struct FactorizationResult {
  Matrix left;   // d x r
  Matrix right;  // r x T
  double objective = 0.0;
  bool diverged = false;
};

/// Alternating least squares for min sum_t ||y_t - X_t B c_t||^2 with
/// B (d x rank) and C (rank x T). Each half-step is a minimum-norm least
/// squares solve. An alternation that increases the objective is undone and
/// flagged.
FactorizationResult factorize(const MultiTaskData& data, std::size_t rank, int alternations,
                              const std::optional<Matrix>& initial_left = std::nullopt);

/// Epoch-based greedy policy with a matrix-factorization estimate
/// (MLinGreedy-style). Factors are refit when the round count reaches a power
/// of two; between refits the policy plays greedily on the frozen estimate.
class MLinGreedyPolicy final : public Policy {
 public:
  static constexpr int kAlternations = 15;

  MLinGreedyPolicy(std::size_t dim, std::size_t tasks, std::size_t rank);

  PolicyKind kind() const override { return PolicyKind::mlingreedy; }
  bool last_update_converged() const override { return !diverged_; }
  std::size_t rank_parameter() const { return rank_; }

  static bool is_epoch_end(std::size_t round);

 protected:
  void refit() override;

 private:
  std::size_t rank_;
  std::optional<Matrix> left_;
  bool diverged_ = false;
};

/// Ridge estimate (X^T X + gamma I)^{-1} X^T y; zero for an empty history.
Vector ridge_estimate(const TaskHistory& history, double ridge);

}  // namespace lrb
