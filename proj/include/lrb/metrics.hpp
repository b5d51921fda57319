#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrb/environment.hpp"
#include "lrb/estimator.hpp"
#include "lrb/policies.hpp"

namespace lrb {

/// One output row: metrics of one policy, repetition and round (1-based).
struct RoundRecord {
  PolicyKind policy = PolicyKind::tracenorm;
  std::size_t repetition = 0;
  std::size_t round = 0;
  /// Cumulative expected reward summed over tasks, divided by T.
  double avg_cum_reward = 0.0;
  /// Cumulative pseudo-regret summed over tasks, divided by T.
  double avg_cum_regret = 0.0;
  /// Cumulative observed (noisy) reward divided by T.
  double avg_cum_realized_reward = 0.0;
  std::optional<double> frob_error;
  std::optional<double> lambda_n;
  bool solver_converged = true;
  std::optional<int> rank_estimate;
};

struct DiagnosticsReport {
  double dn_event_frequency = 0.0;
  /// Empty when the error curve has fewer than two positive points.
  std::optional<double> error_scaling_slope;
  /// Sampling upper bound on the RSC constant, not the exact value.
  double rsc_probe_value = 0.0;
  /// Empty when no N below 1e9 satisfies the sample-size condition.
  std::optional<std::uint64_t> n0_report;
};

/// (x* - x_chosen) . w, never negative.
double instantaneous_regret(const DecisionSet& ds, std::size_t chosen, const Vector& w);

struct CumulativePoint {
  double avg_cum_reward = 0.0;
  double avg_cum_regret = 0.0;
};

/// Running sums over rounds and tasks divided by T. Inputs are N x T.
std::vector<CumulativePoint> cumulative_metrics(const Matrix& rewards, const Matrix& regrets);

/// ||what - truth||_F
double estimation_error(const Matrix& what, const Matrix& truth);

/// D_n = sum_t sum_i eta_{t,i} x_{t,i} e_t^T: column t is X_t^T eta_t over the first n rounds.
Matrix noise_matrix(const MultiTaskData& histories, const Matrix& noise, std::size_t n);

struct NoiseEvent {
  bool holds = false;
  double scaled_norm = 0.0;  // ||D_n||_op / n
  double lambda = 0.0;
};

/// Checks ||D_n||_op / n <= lambda_n using the recorded noise (rounds x T).
/// Throws DiagnosticUnavailable when fewer than n noise rows were recorded.
NoiseEvent dn_event_check(const MultiTaskData& histories, const Matrix& noise,
                          const LambdaRule& rule, std::size_t n, std::size_t horizon);

/// Sampling upper bound on the restricted strong convexity constant.
///
/// Draws `samples` matrices Delta inside the cone
///   ||Pi(Delta)||_* <= 3 ||Delta - Pi(Delta)||_*,
/// Pi projecting onto matrices whose column and row spaces are orthogonal to
/// the singular subspaces of W, and returns the smallest
///   sum_t delta_t^T Sigma_t delta_t / (2 ||Delta||_F^2).
/// `covariances` holds one d x d block per task (or a single block shared by
/// all tasks). Not the exact constant: more samples can only lower it.
double rsc_probe(std::span<const Matrix> covariances, const linalg::SvdResult& w_svd, int rank,
                 std::size_t samples, RngStream& rng);

/// Smallest N with N >= c * max_k ||Sigma_k||^2 * ((r log d) log(4 T N / delta))^2.
/// Throws Error when no N below 1e9 qualifies.
std::uint64_t n0_report(std::size_t d, std::size_t tasks, std::size_t rank, double delta,
                        double sigma_op_max, double c_scale);

/// Least-squares slope of log(errors) against log(ns).
double log_log_slope(std::span<const double> ns, std::span<const double> errors);

/// Estimation error of the trace-norm estimator under uniformly random play,
/// evaluated at each n in `ns` (ascending) on one growing sample.
struct ErrorCurve {
  std::vector<double> ns;
  std::vector<double> errors;
  double slope = 0.0;
};

struct RandomDesignSetting {
  std::size_t d = 15;
  std::size_t tasks = 10;
  std::size_t rank = 3;
  std::size_t arms = 10;
  double sigma = 1.0;
  LambdaRule lambda;
};

ErrorCurve random_design_error_curve(const RandomDesignSetting& setting,
                                     std::span<const std::size_t> ns, std::uint64_t seed);

}  // namespace lrb
