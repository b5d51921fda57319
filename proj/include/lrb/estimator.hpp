#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lrb/linalg.hpp"

namespace lrb {

/// Rows of `design` are the contexts chosen for one task; `rewards` the
/// matching observations.
class TaskHistory {
 public:
  TaskHistory() = default;
  explicit TaskHistory(std::size_t dim);
  TaskHistory(Matrix design, Vector rewards);

  void append(const Vector& context, double reward);

  std::size_t rounds() const { return static_cast<std::size_t>(design_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(design_.cols()); }
  const Matrix& design() const { return design_; }
  const Vector& rewards() const { return rewards_; }

 private:
  Matrix design_;
  Vector rewards_;
};

/// Histories of T tasks sharing round count n and dimension d.
class MultiTaskData {
 public:
  MultiTaskData() = default;
  MultiTaskData(std::size_t dim, std::size_t tasks);
  explicit MultiTaskData(std::vector<TaskHistory> tasks);

  /// Adds one observation per task; contexts are the columns of `contexts` (d x T).
  void append_round(const Matrix& contexts, std::span<const double> rewards);

  std::size_t tasks() const { return tasks_.size(); }
  std::size_t rounds() const { return tasks_.empty() ? 0 : tasks_.front().rounds(); }
  std::size_t dim() const { return dim_; }
  const TaskHistory& task(std::size_t t) const { return tasks_[t]; }
  const std::vector<TaskHistory>& all() const { return tasks_; }

 private:
  std::size_t dim_ = 0;
  std::vector<TaskHistory> tasks_;
};

struct SolverOptions {
  int max_iterations = 500;
  /// Stop once |F_k - F_{k-1}| <= objective_tolerance * max(1, |F_k|).
  double objective_tolerance = 1e-8;
  std::optional<Matrix> warm_start;
  /// When set, stopping also requires kkt_certificate(...).residual() to be
  /// at most this. Once the objective no longer resolves progress the solver
  /// keeps iterating without objective checks; `objective_history` then ends
  /// where those iterations begin.
  std::optional<double> kkt_tolerance;
};

struct FitResult {
  Matrix estimate;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Objective after every accepted iterate, starting with the initial point.
  std::vector<double> objective_history;
};

enum class LambdaVariant { theoretical, experimental };

struct LambdaRule {
  LambdaVariant variant = LambdaVariant::experimental;
  double scale = 1.0;
  double delta = 0.1;
  double sigma = 1.0;
  /// max_k ||Sigma_k||_op^{1/2}
  double sigma_op_max = 1.0;
};

/// (1/n) sum_t ||y_t - X_t a_t||^2 + lambda ||a||_*
double objective(const Matrix& a, const MultiTaskData& data, double lambda);

/// Gradient of the squared-loss part; column t is (2/n) X_t^T (X_t a_t - y_t).
Matrix smooth_gradient(const Matrix& a, const MultiTaskData& data);

/// (2/n) max_t sigma_max(X_t)^2
double lipschitz_estimate(const MultiTaskData& data);

/// Trace-norm regularized multi-task least squares, solved with FISTA.
///
/// The momentum is reset whenever a step would increase the objective and
/// that step is discarded, so `objective_history` is non-increasing. Running
/// out of iterations is not an error: the best iterate is returned with
/// `converged == false`.
FitResult fit_trace_norm(const MultiTaskData& data, double lambda, const SolverOptions& options = {});

/// Smallest lambda for which the zero matrix solves the problem:
/// (2/n) ||[X_1^T y_1, ..., X_T^T y_T]||_op.
double zero_solution_threshold(const MultiTaskData& data);

/// Optimality certificate for a candidate solution.
///
/// With G = -grad f(a) / lambda and a = U S V^T restricted to singular values
/// above `rank_threshold`, optimality requires G = U V^T + M where M lives in
/// the orthogonal complements of both singular subspaces and ||M||_op <= 1.
struct KktReport {
  int rank = 0;
  /// ||G - U V^T - M||_op where M = P_U^perp G P_V^perp.
  double aligned_residual = 0.0;
  /// ||M||_op, must not exceed 1.
  double orthogonal_norm = 0.0;
  /// max(aligned_residual, orthogonal_norm - 1, 0)
  double residual() const;
};

KktReport kkt_certificate(const Matrix& a, const MultiTaskData& data, double lambda,
                          double rank_threshold = 1e-8);

/// lambda_n for n rounds of data, d features, T tasks and horizon N.
///
/// experimental: l * max((T+d)/n + log(2/delta)/n, sqrt((T+d)/n) + sqrt(log(2/delta)/n))
/// theoretical:  sigma_op_max * max(sigma * sqrt((d+T) log(2N(d+T)/delta) / n),
///                                  l * sqrt((T+d+log(4N/delta)) log^3(8N(d+T)/delta)) / n)
double lambda_schedule(const LambdaRule& rule, std::size_t n, std::size_t d, std::size_t tasks,
                       std::size_t horizon);

/// The experimental formula in terms of its raw ingredients; `dims` is T+d
/// and `log_term` is log(2/delta).
double experimental_lambda(double scale, double dims, double log_term, double n);

}  // namespace lrb
