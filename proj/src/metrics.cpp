#include "lrb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lrb/errors.hpp"

namespace lrb {

double instantaneous_regret(const DecisionSet& ds, std::size_t chosen, const Vector& w) {
  if (chosen >= ds.size()) throw InputError("chosen arm index out of range");
  const ArmChoice best = best_arm(ds, w);
  const double gap = best.value - ds.arms.row(static_cast<Eigen::Index>(chosen)).dot(w);
  return std::max(gap, 0.0);
}

std::vector<CumulativePoint> cumulative_metrics(const Matrix& rewards, const Matrix& regrets) {
  if (rewards.rows() != regrets.rows() || rewards.cols() != regrets.cols()) {
    throw DimensionError("reward and regret tables differ in shape");
  }
  const double tasks = static_cast<double>(rewards.cols());
  std::vector<CumulativePoint> out;
  out.reserve(static_cast<std::size_t>(rewards.rows()));
  double reward_sum = 0.0;
  double regret_sum = 0.0;
  for (Eigen::Index n = 0; n < rewards.rows(); ++n) {
    for (Eigen::Index t = 0; t < rewards.cols(); ++t) {
      reward_sum += rewards(n, t);
      regret_sum += regrets(n, t);
    }
    out.push_back({reward_sum / tasks, regret_sum / tasks});
  }
  return out;
}

double estimation_error(const Matrix& what, const Matrix& truth) {
  if (what.rows() != truth.rows() || what.cols() != truth.cols()) {
    throw DimensionError("estimation_error operands differ in shape");
  }
  return (what - truth).norm();
}

Matrix noise_matrix(const MultiTaskData& histories, const Matrix& noise, std::size_t n) {
  if (noise.size() == 0) throw DiagnosticUnavailable("no noise record for this run");
  if (static_cast<std::size_t>(noise.rows()) < n ||
      static_cast<std::size_t>(noise.cols()) != histories.tasks()) {
    throw DiagnosticUnavailable("noise record does not cover the requested rounds");
  }
  if (histories.rounds() < n) throw DimensionError("histories shorter than requested round");
  const auto rows = static_cast<Eigen::Index>(n);
  Matrix d(static_cast<Eigen::Index>(histories.dim()), static_cast<Eigen::Index>(histories.tasks()));
  for (std::size_t t = 0; t < histories.tasks(); ++t) {
    const auto col = static_cast<Eigen::Index>(t);
    d.col(col) = histories.task(t).design().topRows(rows).transpose() * noise.col(col).head(rows);
  }
  return d;
}

NoiseEvent dn_event_check(const MultiTaskData& histories, const Matrix& noise,
                          const LambdaRule& rule, std::size_t n, std::size_t horizon) {
  if (n == 0) throw InputError("noise event needs n >= 1");
  const Matrix d = noise_matrix(histories, noise, n);
  NoiseEvent ev;
  ev.scaled_norm = linalg::svd(d).singular_values(0) / static_cast<double>(n);
  ev.lambda = lambda_schedule(rule, n, histories.dim(), histories.tasks(), horizon);
  ev.holds = ev.scaled_norm <= ev.lambda;
  return ev;
}

double rsc_probe(std::span<const Matrix> covariances, const linalg::SvdResult& w_svd, int rank,
                 std::size_t samples, RngStream& rng) {
  if (samples == 0) throw InputError("rsc_probe needs at least one sample");
  const Eigen::Index d = w_svd.u.rows();
  const Eigen::Index tasks = w_svd.v.rows();
  if (covariances.size() != 1 && covariances.size() != static_cast<std::size_t>(tasks)) {
    throw DimensionError("need one covariance block per task or a single shared block");
  }
  for (const auto& c : covariances) {
    if (c.rows() != d || c.cols() != d) throw DimensionError("covariance block has wrong shape");
  }
  const bool degenerate = std::all_of(covariances.begin(), covariances.end(),
                                      [](const Matrix& c) { return c.isZero(0.0); });
  if (degenerate) return 0.0;

  const Matrix u = w_svd.u.leftCols(rank);
  const Matrix v = w_svd.v.leftCols(rank);
  const Matrix pu = Matrix::Identity(d, d) - u * u.transpose();
  const Matrix pv = Matrix::Identity(tasks, tasks) - v * v.transpose();

  const auto gaussian = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
  };
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples; ++s) {
    const Matrix raw = gaussian(d, tasks);
    const Matrix aligned = raw - pu * raw * pv;
    Matrix delta = aligned;
    const Matrix perp = pu * gaussian(d, tasks) * pv;
    const double perp_nuclear = perp.isZero(0.0) ? 0.0 : linalg::nuclear_norm(perp);
    if (perp_nuclear > 0.0) {
      const double fraction = rng.uniform();
      delta += perp * (fraction * 3.0 * linalg::nuclear_norm(aligned) / perp_nuclear);
    }
    double quad = 0.0;
    double energy = 0.0;
    for (Eigen::Index t = 0; t < tasks; ++t) {
      const Matrix& cov = covariances.size() == 1 ? covariances[0]
                                                  : covariances[static_cast<std::size_t>(t)];
      const Vector col = delta.col(t);
      const Vector mapped = cov * col;
      quad += col.dot(mapped);
      energy += col.dot(col);
    }
    if (energy == 0.0) continue;
    best = std::min(best, quad / (2.0 * energy));
  }
  return std::isfinite(best) ? std::max(best, 0.0) : 0.0;
}

std::uint64_t n0_report(std::size_t d, std::size_t tasks, std::size_t rank, double delta,
                        double sigma_op_max, double c_scale) {
  if (d == 0 || tasks == 0 || rank == 0 || !(delta > 0.0 && delta < 1.0) ||
      !(sigma_op_max > 0.0) || !(c_scale > 0.0)) {
    throw ConfigError("n0_report arguments must be positive with delta in (0, 1)");
  }
  const double lead = c_scale * std::pow(sigma_op_max, 4);
  const double rank_log = static_cast<double>(rank) * std::log(static_cast<double>(d));
  const auto required = [&](double n) {
    const double inner = rank_log * std::log(4.0 * static_cast<double>(tasks) * n / delta);
    return lead * inner * inner;
  };

  constexpr std::uint64_t kLimit = 1'000'000'000ULL;
  std::uint64_t n = 1;
  while (n < kLimit) {
    const double need = required(static_cast<double>(n));
    if (static_cast<double>(n) >= need) return n;
    // required() is increasing, so no integer in [n, need) can qualify.
    const double jump = std::ceil(need);
    n = jump >= static_cast<double>(kLimit) ? kLimit : std::max(n + 1, static_cast<std::uint64_t>(jump));
  }
  throw Error("N0 exceeds 1e9 for this configuration");
}

double log_log_slope(std::span<const double> ns, std::span<const double> errors) {
  if (ns.size() != errors.size() || ns.size() < 2) {
    throw DimensionError("slope needs at least two matching points");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(ns[i] > 0.0) || !(errors[i] > 0.0)) throw InputError("log-log slope needs positive data");
    mx += std::log(ns[i]);
    my += std::log(errors[i]);
  }
  mx /= static_cast<double>(ns.size());
  my /= static_cast<double>(ns.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double dx = std::log(ns[i]) - mx;
    sxy += dx * (std::log(errors[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw InputError("slope needs at least two distinct n");
  return sxy / sxx;
}

ErrorCurve random_design_error_curve(const RandomDesignSetting& setting,
                                     std::span<const std::size_t> ns, std::uint64_t seed) {
  if (ns.empty() || !std::is_sorted(ns.begin(), ns.end()) || ns.front() == 0) {
    throw InputError("error curve needs ascending positive sample sizes");
  }
  RngStream w_rng(seed, 0);
  RngStream arm_rng(seed, 1);
  RngStream noise_rng(seed, 2);
  RngStream play_rng(seed, 3);

  const Matrix w =
      generate_task_matrix({setting.d, setting.tasks, setting.rank, 1.0}, w_rng);
  const ArmDistribution arms(ArmKind::gaussian_iid, setting.d, setting.arms);
  const NoiseSpec noise{setting.sigma};
  MultiTaskData data(setting.d, setting.tasks);

  ErrorCurve curve;
  SolverOptions options;
  options.max_iterations = 2000;
  options.objective_tolerance = 1e-10;
  Matrix contexts(static_cast<Eigen::Index>(setting.d), static_cast<Eigen::Index>(setting.tasks));
  std::vector<double> rewards(setting.tasks);
  for (const std::size_t target : ns) {
    while (data.rounds() < target) {
      const auto sets = sample_decision_sets(arms, setting.tasks, arm_rng);
      for (std::size_t t = 0; t < setting.tasks; ++t) {
        const auto col = static_cast<Eigen::Index>(t);
        const Vector x = sets[t].arm(play_rng.uniform_index(sets[t].size()));
        contexts.col(col) = x;
        rewards[t] = reward(x, w.col(col), noise, noise_rng);
      }
      data.append_round(contexts, rewards);
    }
    const double lambda =
        lambda_schedule(setting.lambda, target, setting.d, setting.tasks, ns.back());
    const FitResult fit = fit_trace_norm(data, lambda, options);
    options.warm_start = fit.estimate;
    curve.ns.push_back(static_cast<double>(target));
    curve.errors.push_back(estimation_error(fit.estimate, w));
  }
  if (curve.ns.size() >= 2) curve.slope = log_log_slope(curve.ns, curve.errors);
  return curve;
}

}  // namespace lrb
