#include "lrb/policies.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lrb/errors.hpp"

namespace lrb {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::tracenorm: return "tracenorm";
    case PolicyKind::itl: return "itl";
    case PolicyKind::oracle: return "oracle";
    case PolicyKind::mlingreedy: return "mlingreedy";
  }
  return "unknown";
}

PolicyKind parse_policy_kind(std::string_view text) {
  if (text == "tracenorm") return PolicyKind::tracenorm;
  if (text == "itl") return PolicyKind::itl;
  if (text == "oracle") return PolicyKind::oracle;
  if (text == "mlingreedy") return PolicyKind::mlingreedy;
  throw ConfigError("unknown policy '" + std::string(text) + "'");
}

Policy::Policy(std::size_t dim, std::size_t tasks)
    : estimate_(Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(tasks))),
      histories_(dim, tasks) {
  if (dim == 0 || tasks == 0) throw ConfigError("policy needs d >= 1 and T >= 1");
}

std::vector<std::size_t> Policy::select_arms(std::span<const DecisionSet> sets,
                                             RngStream& rng) const {
  std::vector<std::size_t> first;
  if (round() == 0) {
    first.reserve(sets.size());
    for (const auto& ds : sets) first.push_back(rng.uniform_index(ds.size()));
  }
  return select_arms(sets, first);
}

std::vector<std::size_t> Policy::select_arms(std::span<const DecisionSet> sets,
                                             std::span<const std::size_t> first_round) const {
  if (sets.size() != tasks()) throw DimensionError("need one decision set per task");
  std::vector<std::size_t> picks(sets.size());
  if (round() == 0) {
    if (first_round.size() != sets.size()) {
      throw DimensionError("first-round choices must cover every task");
    }
    for (std::size_t t = 0; t < sets.size(); ++t) {
      if (first_round[t] >= sets[t].size()) throw InputError("first-round choice out of range");
      picks[t] = first_round[t];
    }
    return picks;
  }
  for (std::size_t t = 0; t < sets.size(); ++t) {
    picks[t] = best_arm(sets[t], estimate_.col(static_cast<Eigen::Index>(t))).index;
  }
  return picks;
}

void Policy::observe(const Matrix& contexts, std::span<const double> rewards) {
  histories_.append_round(contexts, rewards);
  refit();
  if (estimate_.rows() != static_cast<Eigen::Index>(dim()) ||
      estimate_.cols() != static_cast<Eigen::Index>(tasks())) {
    throw DimensionError("policy estimate changed shape");
  }
}

Vector ridge_estimate(const TaskHistory& history, double ridge) {
  const auto d = static_cast<Eigen::Index>(history.dim());
  if (history.rounds() == 0) return Vector::Zero(d);
  const Matrix& x = history.design();
  Matrix gram = x.transpose() * x;
  gram.diagonal().array() += ridge;
  return gram.ldlt().solve(x.transpose() * history.rewards());
}

TraceNormPolicy::TraceNormPolicy(std::size_t dim, std::size_t tasks, Settings settings)
    : Policy(dim, tasks), settings_(std::move(settings)) {
  // Validates the rule up front.
  lambda_schedule(settings_.lambda, 1, dim, tasks, settings_.horizon);
}

void TraceNormPolicy::refit() {
  const double lambda =
      lambda_schedule(settings_.lambda, round(), dim(), tasks(), settings_.horizon);
  SolverOptions options = settings_.solver;
  options.warm_start = estimate_;
  fit_ = fit_trace_norm(histories_, lambda, options);
  estimate_ = fit_.estimate;
  lambda_ = lambda;
  converged_ = fit_.converged;
}

ItlPolicy::ItlPolicy(std::size_t dim, std::size_t tasks, double ridge)
    : Policy(dim, tasks), ridge_(ridge) {
  if (!(ridge > 0.0)) throw ConfigError("ridge parameter must be positive");
}

void ItlPolicy::refit() {
  for (std::size_t t = 0; t < tasks(); ++t) {
    estimate_.col(static_cast<Eigen::Index>(t)) = ridge_estimate(histories_.task(t), ridge_);
  }
}

OracleBasis OracleBasis::from_task_matrix(const Matrix& w, std::size_t rank) {
  if (rank == 0 || rank > static_cast<std::size_t>(std::min(w.rows(), w.cols()))) {
    throw ConfigError("oracle rank must lie in [1, min(d, T)]");
  }
  const auto s = linalg::svd(w);
  return OracleBasis{s.u.leftCols(static_cast<Eigen::Index>(rank))};
}

OraclePolicy::OraclePolicy(std::size_t tasks, OracleBasis basis, double ridge)
    : Policy(static_cast<std::size_t>(basis.b.rows()), tasks),
      basis_(std::move(basis)),
      ridge_(ridge) {
  if (basis_.b.cols() == 0) throw ConfigError("oracle policy requires a non-empty basis");
  const Matrix gram = basis_.b.transpose() * basis_.b;
  if ((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-10) {
    throw ConfigError("oracle basis columns are not orthonormal");
  }
  if (!(ridge > 0.0)) throw ConfigError("ridge parameter must be positive");
}

void OraclePolicy::refit() {
  const Matrix& b = basis_.b;
  for (std::size_t t = 0; t < tasks(); ++t) {
    const auto& h = histories_.task(t);
    const Matrix features = h.design() * b;
    Matrix gram = features.transpose() * features;
    gram.diagonal().array() += ridge_;
    const Vector coef = gram.ldlt().solve(features.transpose() * h.rewards());
    estimate_.col(static_cast<Eigen::Index>(t)) = b * coef;
  }
}

std::string_view to_string(RankMode mode) {
  switch (mode) {
    case RankMode::true_rank: return "true";
    case RankMode::over: return "over";
    case RankMode::under: return "under";
  }
  return "unknown";
}

RankMode parse_rank_mode(std::string_view text) {
  if (text == "true") return RankMode::true_rank;
  if (text == "over") return RankMode::over;
  if (text == "under") return RankMode::under;
  throw ConfigError("unknown rank mode '" + std::string(text) + "'");
}

std::size_t factor_rank(RankMode mode, std::size_t rank, std::size_t dim, std::size_t tasks) {
  switch (mode) {
    case RankMode::true_rank: return rank;
    case RankMode::over: return std::min({2 * rank, dim, tasks});
    case RankMode::under: return std::max<std::size_t>(rank / 2, 1);
  }
  return rank;
}

namespace {

double factor_objective(const MultiTaskData& data, const Matrix& left, const Matrix& right) {
  double total = 0.0;
  for (std::size_t t = 0; t < data.tasks(); ++t) {
    const auto& h = data.task(t);
    total += (h.rewards() - h.design() * (left * right.col(static_cast<Eigen::Index>(t))))
                 .squaredNorm();
  }
  return total;
}

Matrix solve_right(const MultiTaskData& data, const Matrix& left) {
  Matrix right(left.cols(), static_cast<Eigen::Index>(data.tasks()));
  for (std::size_t t = 0; t < data.tasks(); ++t) {
    const auto& h = data.task(t);
    const Matrix features = h.design() * left;
    right.col(static_cast<Eigen::Index>(t)) =
        features.completeOrthogonalDecomposition().solve(h.rewards());
  }
  return right;
}

// Normal equations for vec(B): sum_t (c_t c_t^T kron X_t^T X_t) vec(B) = sum_t c_t kron X_t^T y_t.
Matrix solve_left(const MultiTaskData& data, const Matrix& right) {
  const auto d = static_cast<Eigen::Index>(data.dim());
  const Eigen::Index r = right.rows();
  Matrix normal = Matrix::Zero(d * r, d * r);
  Vector rhs = Vector::Zero(d * r);
  for (std::size_t t = 0; t < data.tasks(); ++t) {
    const auto& h = data.task(t);
    const Matrix gram = h.design().transpose() * h.design();
    const Vector cross = h.design().transpose() * h.rewards();
    const Vector c = right.col(static_cast<Eigen::Index>(t));
    for (Eigen::Index i = 0; i < r; ++i) {
      rhs.segment(i * d, d) += c(i) * cross;
      for (Eigen::Index j = 0; j < r; ++j) {
        normal.block(i * d, j * d, d, d) += (c(i) * c(j)) * gram;
      }
    }
  }
  const Vector flat = normal.completeOrthogonalDecomposition().solve(rhs);
  return Eigen::Map<const Matrix>(flat.data(), d, r);
}

}  // namespace

FactorizationResult factorize(const MultiTaskData& data, std::size_t rank, int alternations,
                              const std::optional<Matrix>& initial_left) {
  if (data.rounds() == 0) throw DimensionError("factorization needs data");
  if (rank == 0 || rank > std::min(data.dim(), data.tasks())) {
    throw ConfigError("factor rank must lie in [1, min(d, T)]");
  }
  const auto d = static_cast<Eigen::Index>(data.dim());
  const auto r = static_cast<Eigen::Index>(rank);

  Matrix left;
  if (initial_left && initial_left->rows() == d && initial_left->cols() == r) {
    left = *initial_left;
  } else {
    // Spectral start: leading directions of [X_1^T y_1, ..., X_T^T y_T].
    Matrix cross(d, static_cast<Eigen::Index>(data.tasks()));
    for (std::size_t t = 0; t < data.tasks(); ++t) {
      const auto& h = data.task(t);
      cross.col(static_cast<Eigen::Index>(t)) = h.design().transpose() * h.rewards();
    }
    left = linalg::svd(cross).u.leftCols(r);
  }

  FactorizationResult out;
  out.left = left;
  out.right = solve_right(data, left);
  out.objective = factor_objective(data, out.left, out.right);
  for (int it = 0; it < alternations; ++it) {
    Matrix next_left = solve_left(data, out.right);
    Matrix next_right = solve_right(data, next_left);
    const double value = factor_objective(data, next_left, next_right);
    if (!std::isfinite(value) || value > out.objective * (1.0 + 1e-10) + 1e-14) {
      out.diverged = true;
      break;
    }
    out.left = std::move(next_left);
    out.right = std::move(next_right);
    out.objective = value;
  }
  return out;
}

MLinGreedyPolicy::MLinGreedyPolicy(std::size_t dim, std::size_t tasks, std::size_t rank)
    : Policy(dim, tasks), rank_(rank) {
  if (rank == 0 || rank > std::min(dim, tasks)) {
    throw ConfigError("factor rank must lie in [1, min(d, T)]");
  }
}

bool MLinGreedyPolicy::is_epoch_end(std::size_t round) {
  return round > 0 && (round & (round - 1)) == 0;
}

void MLinGreedyPolicy::refit() {
  if (!is_epoch_end(round())) return;
  const auto fit = factorize(histories_, rank_, kAlternations, left_);
  diverged_ = fit.diverged;
  left_ = fit.left;
  estimate_ = fit.left * fit.right;
}

}  // namespace lrb
