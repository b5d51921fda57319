#include "lrb/environment.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "lrb/errors.hpp"

namespace lrb {

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32), 0x6c72625fU};
  engine_.seed(seq);
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw InputError("uniform_index needs a non-empty range");
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

std::string_view to_string(ArmKind kind) {
  switch (kind) {
    case ArmKind::gaussian_iid: return "gaussian_iid";
    case ArmKind::gaussian_correlated: return "gaussian_correlated";
    case ArmKind::uniform_sphere: return "uniform_sphere";
  }
  return "unknown";
}

ArmKind parse_arm_kind(std::string_view text) {
  if (text == "gaussian_iid") return ArmKind::gaussian_iid;
  if (text == "gaussian_correlated") return ArmKind::gaussian_correlated;
  if (text == "uniform_sphere") return ArmKind::uniform_sphere;
  throw ConfigError("unknown arm kind '" + std::string(text) + "'");
}

Matrix psd_sqrt(const Matrix& m) {
  if (m.rows() != m.cols()) throw ConfigError("covariance must be square");
  linalg::require_finite(m, "covariance");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw ConfigError("covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  if (eig.info() != Eigen::Success) throw ConfigError("covariance eigendecomposition failed");
  if (eig.eigenvalues().minCoeff() < -1e-10) throw ConfigError("covariance is not PSD");
  const Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

ArmDistribution::ArmDistribution(ArmKind kind, std::size_t dim, std::size_t arms,
                                 double correlation)
    : ArmDistribution(kind,
                      std::vector<Matrix>(arms, Matrix::Identity(static_cast<Eigen::Index>(dim),
                                                                 static_cast<Eigen::Index>(dim))),
                      correlation) {}

ArmDistribution::ArmDistribution(ArmKind kind, std::vector<Matrix> covariances,
                                 double correlation)
    : kind_(kind), dim_(0), correlation_(correlation), covariances_(std::move(covariances)) {
  if (covariances_.empty()) throw ConfigError("arm distribution needs K >= 1");
  if (!(correlation_ >= 0.0 && correlation_ <= 1.0)) {
    throw ConfigError("arm correlation must lie in [0, 1]");
  }
  dim_ = static_cast<std::size_t>(covariances_.front().rows());
  if (dim_ == 0) throw ConfigError("arm dimension must be positive");
  roots_.reserve(covariances_.size());
  for (const auto& c : covariances_) {
    if (static_cast<std::size_t>(c.rows()) != dim_) {
      throw ConfigError("all arm covariances must share the dimension");
    }
    roots_.push_back(psd_sqrt(c));
  }
}

Matrix ArmDistribution::second_moment(std::size_t k) const {
  if (kind_ == ArmKind::uniform_sphere) {
    const auto d = static_cast<Eigen::Index>(dim_);
    return Matrix::Identity(d, d) / static_cast<double>(dim_);
  }
  return covariances_.at(k);
}

double ArmDistribution::sigma_op_max() const {
  double top = 0.0;
  for (std::size_t k = 0; k < arms(); ++k) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(second_moment(k), Eigen::EigenvaluesOnly);
    top = std::max(top, eig.eigenvalues().maxCoeff());
  }
  return std::sqrt(top);
}

std::size_t ArmDistribution::draw_rows() const {
  return kind_ == ArmKind::gaussian_correlated ? arms() + 1 : arms();
}

DecisionSet ArmDistribution::from_standard(const Matrix& z) const {
  const auto k_arms = static_cast<Eigen::Index>(arms());
  const auto d = static_cast<Eigen::Index>(dim_);
  if (z.rows() != static_cast<Eigen::Index>(draw_rows()) || z.cols() != d) {
    throw DimensionError("standard draw has the wrong shape");
  }
  DecisionSet ds{Matrix(k_arms, d)};
  switch (kind_) {
    case ArmKind::gaussian_iid:
      for (Eigen::Index k = 0; k < k_arms; ++k) {
        ds.arms.row(k) = (roots_[static_cast<std::size_t>(k)] * z.row(k).transpose()).transpose();
      }
      break;
    case ArmKind::gaussian_correlated: {
      const double shared = std::sqrt(correlation_);
      const double own = std::sqrt(1.0 - correlation_);
      for (Eigen::Index k = 0; k < k_arms; ++k) {
        const Vector mixed = shared * z.row(0).transpose() + own * z.row(k + 1).transpose();
        ds.arms.row(k) = (roots_[static_cast<std::size_t>(k)] * mixed).transpose();
      }
      break;
    }
    case ArmKind::uniform_sphere:
      for (Eigen::Index k = 0; k < k_arms; ++k) {
        const double nrm = z.row(k).norm();
        if (nrm == 0.0) throw InputError("degenerate sphere draw");
        ds.arms.row(k) = z.row(k) / nrm;
      }
      break;
  }
  return ds;
}

DecisionSet ArmDistribution::sample(RngStream& rng) const {
  Matrix z(static_cast<Eigen::Index>(draw_rows()), static_cast<Eigen::Index>(dim_));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = rng.normal();
  }
  return from_standard(z);
}

Matrix generate_task_matrix(const TaskMatrixSpec& spec, RngStream& rng) {
  if (spec.d == 0 || spec.tasks == 0 || spec.rank == 0) {
    throw ConfigError("task matrix dimensions must be positive");
  }
  if (spec.rank > std::min(spec.d, spec.tasks)) throw ConfigError("rank exceeds min(d, T)");
  if (!(spec.column_norm_cap > 0.0)) throw ConfigError("column norm cap must be positive");

  const auto d = static_cast<Eigen::Index>(spec.d);
  const auto r = static_cast<Eigen::Index>(spec.rank);
  const auto t = static_cast<Eigen::Index>(spec.tasks);
  Matrix left(d, r);
  Matrix right(r, t);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < r; ++j) left(i, j) = rng.normal();
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < t; ++j) right(i, j) = rng.normal();

  Matrix w = left * right;
  const double top = w.colwise().norm().maxCoeff();
  w *= spec.column_norm_cap / top;

  const auto s = linalg::svd(w);
  if (linalg::numerical_rank(s) != static_cast<int>(spec.rank)) {
    throw ConvergenceError("generated task matrix lost rank", s.singular_values(r - 1));
  }
  return w;
}

std::vector<DecisionSet> sample_decision_sets(const ArmDistribution& dist, std::size_t tasks,
                                              RngStream& rng) {
  std::vector<DecisionSet> out;
  out.reserve(tasks);
  for (std::size_t t = 0; t < tasks; ++t) out.push_back(dist.sample(rng));
  return out;
}

double reward(const Vector& x, const Vector& w, const NoiseSpec& noise, RngStream& rng) {
  if (x.size() != w.size()) throw DimensionError("arm and task vector dimensions differ");
  if (noise.sigma == 0.0) return x.dot(w);
  return x.dot(w) + noise.sigma * rng.normal();
}

ArmChoice best_arm(const DecisionSet& ds, const Vector& w) {
  if (ds.arms.rows() == 0) throw InputError("empty decision set");
  if (ds.arms.cols() != w.size()) throw DimensionError("arm and task vector dimensions differ");
  ArmChoice best{0, ds.arms.row(0).dot(w)};
  for (Eigen::Index k = 1; k < ds.arms.rows(); ++k) {
    const double v = ds.arms.row(k).dot(w);
    if (v > best.value) best = {static_cast<std::size_t>(k), v};
  }
  return best;
}

double EnvironmentReplay::expected_reward(std::size_t round, std::size_t task,
                                          std::size_t arm) const {
  return sets[round][task].arms.row(static_cast<Eigen::Index>(arm)).dot(
      task_matrix.col(static_cast<Eigen::Index>(task)));
}

double EnvironmentReplay::observed_reward(std::size_t round, std::size_t task,
                                          std::size_t arm) const {
  return expected_reward(round, task, arm) +
         noise(static_cast<Eigen::Index>(round), static_cast<Eigen::Index>(task));
}

EnvironmentReplay make_replay(const EnvironmentSetting& setting, std::uint64_t seed,
                              std::uint64_t repetition) {
  if (setting.arms.dim() != setting.task.d) {
    throw ConfigError("arm dimension does not match the task matrix");
  }
  if (!(setting.noise.sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  if (setting.horizon == 0) throw ConfigError("horizon must be positive");

  const std::uint64_t base = 4 * repetition;
  EnvironmentReplay replay;
  RngStream w_rng(seed, setting.fix_task_matrix ? 0 : base);
  replay.task_matrix = generate_task_matrix(setting.task, w_rng);

  RngStream arm_rng(seed, base + 1);
  replay.sets.reserve(setting.horizon);
  for (std::size_t n = 0; n < setting.horizon; ++n) {
    replay.sets.push_back(sample_decision_sets(setting.arms, setting.task.tasks, arm_rng));
  }

  RngStream noise_rng(seed, base + 2);
  replay.noise.resize(static_cast<Eigen::Index>(setting.horizon),
                      static_cast<Eigen::Index>(setting.task.tasks));
  for (Eigen::Index n = 0; n < replay.noise.rows(); ++n) {
    for (Eigen::Index t = 0; t < replay.noise.cols(); ++t) {
      replay.noise(n, t) = setting.noise.sigma * noise_rng.normal();
    }
  }

  RngStream first_rng(seed, base + 3);
  replay.first_round_choices.resize(setting.task.tasks);
  for (auto& c : replay.first_round_choices) c = first_rng.uniform_index(setting.arms.arms());
  return replay;
}

std::uint64_t checksum(const std::vector<DecisionSet>& sets, std::uint64_t state) {
  for (const auto& ds : sets) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(ds.arms.data());
    const std::size_t count = static_cast<std::size_t>(ds.arms.size()) * sizeof(double);
    for (std::size_t i = 0; i < count; ++i) {
      state ^= bytes[i];
      state *= 1099511628211ULL;
    }
  }
  return state;
}

}  // namespace lrb
