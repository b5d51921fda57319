#include "lrb/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lrb/errors.hpp"

namespace lrb {

TaskHistory::TaskHistory(std::size_t dim)
    : design_(0, static_cast<Eigen::Index>(dim)), rewards_(0) {}

TaskHistory::TaskHistory(Matrix design, Vector rewards)
    : design_(std::move(design)), rewards_(std::move(rewards)) {
  if (design_.rows() != rewards_.size()) {
    throw DimensionError("task history has " + std::to_string(design_.rows()) + " contexts but " +
                         std::to_string(rewards_.size()) + " rewards");
  }
  linalg::require_finite(design_, "task design");
  linalg::require_finite(rewards_, "task rewards");
}

void TaskHistory::append(const Vector& context, double reward) {
  if (context.size() != design_.cols()) throw DimensionError("context dimension mismatch");
  if (!context.allFinite() || !std::isfinite(reward)) {
    throw InputError("non-finite observation appended to task history");
  }
  const Eigen::Index n = design_.rows();
  design_.conservativeResize(n + 1, Eigen::NoChange);
  design_.row(n) = context.transpose();
  rewards_.conservativeResize(n + 1);
  rewards_(n) = reward;
}

MultiTaskData::MultiTaskData(std::size_t dim, std::size_t tasks)
    : dim_(dim), tasks_(tasks, TaskHistory(dim)) {}

MultiTaskData::MultiTaskData(std::vector<TaskHistory> tasks) : tasks_(std::move(tasks)) {
  if (tasks_.empty()) throw DimensionError("multi-task data needs at least one task");
  dim_ = tasks_.front().dim();
  const std::size_t n = tasks_.front().rounds();
  for (const auto& t : tasks_) {
    if (t.dim() != dim_ || t.rounds() != n) {
      throw DimensionError("all tasks must share round count and dimension");
    }
  }
}

void MultiTaskData::append_round(const Matrix& contexts, std::span<const double> rewards) {
  if (static_cast<std::size_t>(contexts.cols()) != tasks_.size() ||
      static_cast<std::size_t>(contexts.rows()) != dim_ || rewards.size() != tasks_.size()) {
    throw DimensionError("round shape does not match the multi-task data");
  }
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    tasks_[t].append(contexts.col(static_cast<Eigen::Index>(t)), rewards[t]);
  }
}

namespace {

void check_shape(const Matrix& a, const MultiTaskData& data) {
  if (static_cast<std::size_t>(a.rows()) != data.dim() ||
      static_cast<std::size_t>(a.cols()) != data.tasks()) {
    throw DimensionError("parameter matrix is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + ", data expects " + std::to_string(data.dim()) +
                         "x" + std::to_string(data.tasks()));
  }
}

void check_nonempty(const MultiTaskData& data) {
  if (data.tasks() == 0 || data.rounds() == 0) {
    throw DimensionError("multi-task data has no observations");
  }
}

// Per-task sufficient statistics X_t^T X_t, X_t^T y_t and y_t^T y_t.
struct Moments {
  const MultiTaskData& data;
  std::vector<Matrix> gram;
  Matrix cross;  // d x T
  double inv_n = 0.0;

  explicit Moments(const MultiTaskData& data)
      : data(data),
        cross(static_cast<Eigen::Index>(data.dim()), static_cast<Eigen::Index>(data.tasks())),
        inv_n(1.0 / static_cast<double>(data.rounds())) {
    gram.reserve(data.tasks());
    for (std::size_t t = 0; t < data.tasks(); ++t) {
      const auto& h = data.task(t);
      gram.push_back(h.design().transpose() * h.design());
      cross.col(static_cast<Eigen::Index>(t)) = h.design().transpose() * h.rewards();
    }
  }

  Matrix gradient(const Matrix& a) const {
    Matrix g(a.rows(), a.cols());
    for (Eigen::Index t = 0; t < a.cols(); ++t) {
      g.col(t) = 2.0 * inv_n * (gram[static_cast<std::size_t>(t)] * a.col(t) - cross.col(t));
    }
    return g;
  }

  // Residual form: the expanded Gram form cancels badly near interpolation.
  double loss(const Matrix& a) const {
    double total = 0.0;
    for (Eigen::Index t = 0; t < a.cols(); ++t) {
      const auto& h = data.task(static_cast<std::size_t>(t));
      total += (h.rewards() - h.design() * a.col(t)).squaredNorm();
    }
    return total * inv_n;
  }
};

}  // namespace

double objective(const Matrix& a, const MultiTaskData& data, double lambda) {
  check_shape(a, data);
  check_nonempty(data);
  double loss = 0.0;
  for (std::size_t t = 0; t < data.tasks(); ++t) {
    const auto& h = data.task(t);
    loss += (h.rewards() - h.design() * a.col(static_cast<Eigen::Index>(t))).squaredNorm();
  }
  loss /= static_cast<double>(data.rounds());
  if (lambda == 0.0) return loss;
  return loss + lambda * linalg::nuclear_norm(a);
}

Matrix smooth_gradient(const Matrix& a, const MultiTaskData& data) {
  check_shape(a, data);
  check_nonempty(data);
  Matrix g(a.rows(), a.cols());
  const double scale = 2.0 / static_cast<double>(data.rounds());
  for (std::size_t t = 0; t < data.tasks(); ++t) {
    const auto& h = data.task(t);
    const auto col = static_cast<Eigen::Index>(t);
    g.col(col) = scale * (h.design().transpose() * (h.design() * a.col(col) - h.rewards()));
  }
  return g;
}

double lipschitz_estimate(const MultiTaskData& data) {
  check_nonempty(data);
  double top = 0.0;
  for (const auto& h : data.all()) {
    const auto s = linalg::svd(h.design());
    top = std::max(top, s.singular_values(0));
  }
  return 2.0 / static_cast<double>(data.rounds()) * top * top;
}

double zero_solution_threshold(const MultiTaskData& data) {
  check_nonempty(data);
  Matrix cross(static_cast<Eigen::Index>(data.dim()), static_cast<Eigen::Index>(data.tasks()));
  for (std::size_t t = 0; t < data.tasks(); ++t) {
    const auto& h = data.task(t);
    cross.col(static_cast<Eigen::Index>(t)) = h.design().transpose() * h.rewards();
  }
  return 2.0 / static_cast<double>(data.rounds()) * linalg::svd(cross).singular_values(0);
}

FitResult fit_trace_norm(const MultiTaskData& data, double lambda, const SolverOptions& options) {
  check_nonempty(data);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InputError("regularization parameter must be finite and non-negative");
  }
  if (options.max_iterations < 1 || !(options.objective_tolerance > 0.0)) {
    throw ConfigError("solver needs max_iterations >= 1 and a positive tolerance");
  }
  for (const auto& h : data.all()) {
    linalg::require_finite(h.design(), "design matrix");
    linalg::require_finite(h.rewards(), "reward vector");
  }

  const auto d = static_cast<Eigen::Index>(data.dim());
  const auto tasks = static_cast<Eigen::Index>(data.tasks());
  Matrix x = Matrix::Zero(d, tasks);
  if (options.warm_start) {
    check_shape(*options.warm_start, data);
    linalg::require_finite(*options.warm_start, "warm start");
    x = *options.warm_start;
  }

  const Moments moments(data);
  const auto full_objective = [&](const Matrix& a) {
    return moments.loss(a) + (lambda == 0.0 ? 0.0 : lambda * linalg::nuclear_norm(a));
  };

  FitResult result;
  const double lipschitz = lipschitz_estimate(data);
  double current = full_objective(x);
  result.objective_history.push_back(current);
  if (lipschitz == 0.0) {
    // Every design is zero: the loss is constant and zero minimizes the penalty.
    result.estimate = Matrix::Zero(d, tasks);
    result.objective = full_objective(result.estimate);
    result.objective_history.push_back(result.objective);
    result.converged = true;
    return result;
  }
  const double step = 1.0 / lipschitz;

  Matrix y = x;
  double momentum = 1.0;
  bool just_restarted = false;
  // Past the point where objective values resolve progress, iterate on the
  // optimality certificate instead (gradient-based momentum restarts).
  bool polishing = false;
  const auto certified = [&](const Matrix& a) {
    return kkt_certificate(a, data, lambda).residual() <= *options.kkt_tolerance;
  };
  const auto stop_or_polish = [&] {
    if (options.kkt_tolerance && !certified(x)) {
      polishing = true;
      momentum = 1.0;
      y = x;
      return false;
    }
    result.converged = true;
    return true;
  };

  for (int it = 1; it <= options.max_iterations; ++it) {
    result.iterations = it;
    Matrix next = linalg::svt(y - step * moments.gradient(y), lambda * step);

    if (polishing) {
      const bool restart = ((y - next).array() * (next - x).array()).sum() > 0.0;
      const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      y = next + ((momentum - 1.0) / next_momentum) * (next - x);
      momentum = next_momentum;
      if (restart) {
        momentum = 1.0;
        y = next;
      }
      x = std::move(next);
      if (it % 10 == 0 && certified(x)) {
        result.converged = true;
        break;
      }
      continue;
    }

    const double next_value = full_objective(next);
    if (next_value > current) {
      if (just_restarted) {
        // A plain proximal step from x failed to descend: x is stationary to
        // the precision of the objective.
        if (stop_or_polish()) break;
        continue;
      }
      momentum = 1.0;
      y = x;
      just_restarted = true;
      continue;
    }
    just_restarted = false;

    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    y = next + ((momentum - 1.0) / next_momentum) * (next - x);
    momentum = next_momentum;

    const double change = current - next_value;
    x = std::move(next);
    current = next_value;
    result.objective_history.push_back(current);
    if (change <= options.objective_tolerance * std::max(1.0, std::abs(current))) {
      if (stop_or_polish()) break;
    }
  }
  if (polishing) current = full_objective(x);

  result.estimate = std::move(x);
  result.objective = current;
  return result;
}

double KktReport::residual() const {
  return std::max({aligned_residual, orthogonal_norm - 1.0, 0.0});
}

KktReport kkt_certificate(const Matrix& a, const MultiTaskData& data, double lambda,
                          double rank_threshold) {
  check_shape(a, data);
  const Matrix grad = smooth_gradient(a, data);
  KktReport report;
  if (lambda == 0.0) {
    report.aligned_residual = linalg::svd(grad).singular_values(0);
    return report;
  }

  const Matrix g = -grad / lambda;
  const auto s = linalg::svd(a);
  const int rank = linalg::numerical_rank(s, rank_threshold);
  report.rank = rank;
  const Matrix u = s.u.leftCols(rank);
  const Matrix v = s.v.leftCols(rank);
  const Matrix pu = Matrix::Identity(a.rows(), a.rows()) - u * u.transpose();
  const Matrix pv = Matrix::Identity(a.cols(), a.cols()) - v * v.transpose();
  const Matrix orthogonal = pu * g * pv;
  report.orthogonal_norm = linalg::svd(orthogonal).singular_values(0);
  if (rank > 0) {
    const Matrix aligned = g - orthogonal - u * v.transpose();
    report.aligned_residual = linalg::svd(aligned).singular_values(0);
  }
  return report;
}

double experimental_lambda(double scale, double dims, double log_term, double n) {
  const double linear = dims / n + log_term / n;
  const double root = std::sqrt(dims / n) + std::sqrt(log_term / n);
  return scale * std::max(linear, root);
}

double lambda_schedule(const LambdaRule& rule, std::size_t n, std::size_t d, std::size_t tasks,
                       std::size_t horizon) {
  if (!(rule.delta > 0.0 && rule.delta < 1.0)) throw ConfigError("lambda delta must lie in (0, 1)");
  if (!(rule.scale > 0.0)) throw ConfigError("lambda scale must be positive");
  if (n == 0 || d == 0 || tasks == 0) throw ConfigError("lambda schedule needs n, d, T >= 1");

  const double nn = static_cast<double>(n);
  const double dims = static_cast<double>(d + tasks);
  if (rule.variant == LambdaVariant::experimental) {
    return experimental_lambda(rule.scale, dims, std::log(2.0 / rule.delta), nn);
  }

  if (!(rule.sigma >= 0.0)) throw ConfigError("lambda sigma must be non-negative");
  if (!(rule.sigma_op_max > 0.0)) throw ConfigError("lambda sigma_op_max must be positive");
  const double horizon_n = static_cast<double>(std::max(horizon, n));
  const double noise = rule.sigma * std::sqrt(dims * std::log(2.0 * horizon_n * dims / rule.delta) / nn);
  const double tail =
      rule.scale *
      std::sqrt((dims + std::log(4.0 * horizon_n / rule.delta)) *
                std::pow(std::log(8.0 * horizon_n * dims / rule.delta), 3)) /
      nn;
  return rule.sigma_op_max * std::max(noise, tail);
}

}  // namespace lrb
