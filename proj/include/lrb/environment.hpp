#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "lrb/linalg.hpp"

namespace lrb {

/// Reproducible random stream keyed by (seed, stream_id).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  double normal();
  /// Uniform real in [0, 1).
  double uniform();
  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

enum class ArmKind { gaussian_iid, gaussian_correlated, uniform_sphere };

std::string_view to_string(ArmKind kind);
ArmKind parse_arm_kind(std::string_view text);

/// The K arm vectors offered to one task in one round; row k is arm k.
struct DecisionSet {
  Matrix arms;  // K x d

  std::size_t size() const { return static_cast<std::size_t>(arms.rows()); }
  Vector arm(std::size_t k) const { return arms.row(static_cast<Eigen::Index>(k)).transpose(); }
};

/// Joint law of a decision set: arm k is Sigma_k^{1/2} z_k.
///
/// gaussian_iid draws independent z_k ~ N(0, I). gaussian_correlated mixes a
/// shared draw into every arm, z_k = sqrt(rho) z_0 + sqrt(1 - rho) e_k, so
/// arms are correlated within a round while each keeps covariance Sigma_k.
/// uniform_sphere normalizes an isotropic Gaussian draw to unit length and
/// ignores the covariances (its second moment is I / d).
///
/// Every kind is symmetric: negating the standard draw negates the arms.
class ArmDistribution {
 public:
  /// Identity covariances for all K arms.
  ArmDistribution(ArmKind kind, std::size_t dim, std::size_t arms, double correlation = 0.5);
  ArmDistribution(ArmKind kind, std::vector<Matrix> covariances, double correlation = 0.5);

  ArmKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t arms() const { return covariances_.size(); }
  const std::vector<Matrix>& covariances() const { return covariances_; }

  /// E[x_k x_k^T] for arm k.
  Matrix second_moment(std::size_t k) const;
  /// max_k ||E[x_k x_k^T]||_op^{1/2}
  double sigma_op_max() const;

  /// Rows of a standard draw needed for one decision set.
  std::size_t draw_rows() const;
  /// Maps a standard Gaussian draw (draw_rows() x d) to a decision set.
  DecisionSet from_standard(const Matrix& z) const;
  DecisionSet sample(RngStream& rng) const;

 private:
  ArmKind kind_;
  std::size_t dim_;
  double correlation_;
  std::vector<Matrix> covariances_;
  std::vector<Matrix> roots_;
};

struct TaskMatrixSpec {
  std::size_t d = 20;
  std::size_t tasks = 10;
  std::size_t rank = 5;
  double column_norm_cap = 1.0;
};

struct NoiseSpec {
  double sigma = 1.0;
};

/// W = G1 G2 with standard Gaussian factors (d x r, r x T), rescaled so the
/// largest column norm equals the cap.
Matrix generate_task_matrix(const TaskMatrixSpec& spec, RngStream& rng);

std::vector<DecisionSet> sample_decision_sets(const ArmDistribution& dist, std::size_t tasks,
                                              RngStream& rng);

/// x.w + sigma * g with g ~ N(0, 1) from `rng`.
double reward(const Vector& x, const Vector& w, const NoiseSpec& noise, RngStream& rng);

struct ArmChoice {
  std::size_t index = 0;
  double value = 0.0;
};

/// argmax_k x_k . w, smallest index on ties.
ArmChoice best_arm(const DecisionSet& ds, const Vector& w);

/// Everything random about one repetition, drawn up front so that every
/// policy faces identical arms and noise (common random numbers).
struct EnvironmentReplay {
  Matrix task_matrix;                           // d x T
  std::vector<std::vector<DecisionSet>> sets;   // [round][task]
  Matrix noise;                                 // N x T, already scaled by sigma
  std::vector<std::size_t> first_round_choices; // uniform arm per task for round 1

  std::size_t rounds() const { return sets.size(); }
  std::size_t tasks() const { return static_cast<std::size_t>(task_matrix.cols()); }
  /// Expected reward x.w_t of `arm` for `task` at `round` (0-based).
  double expected_reward(std::size_t round, std::size_t task, std::size_t arm) const;
  /// Observed reward: expected reward plus the recorded noise.
  double observed_reward(std::size_t round, std::size_t task, std::size_t arm) const;
};

struct EnvironmentSetting {
  TaskMatrixSpec task;
  ArmDistribution arms;
  NoiseSpec noise;
  std::size_t horizon = 40;
  bool fix_task_matrix = false;
};

/// Replay for one repetition. Streams are keyed by (seed, 4 * repetition + j)
/// for the task matrix, arms, noise and first-round choices respectively;
/// with fix_task_matrix every repetition reuses repetition 0's task matrix.
EnvironmentReplay make_replay(const EnvironmentSetting& setting, std::uint64_t seed,
                              std::uint64_t repetition);

/// FNV-1a over the raw bytes of one round's decision sets.
std::uint64_t checksum(const std::vector<DecisionSet>& sets, std::uint64_t state = 1469598103934665603ULL);

/// Symmetric PSD square root; throws ConfigError if `m` is not symmetric PSD
/// within 1e-10.
Matrix psd_sqrt(const Matrix& m);

}  // namespace lrb
