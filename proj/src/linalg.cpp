#include "lrb/linalg.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lrb/errors.hpp"

namespace lrb::linalg {
namespace {

// Extends the orthonormal columns of q[:, 0..filled) to a full orthonormal
// set of `q.cols()` columns, drawing candidates from the canonical basis.
void complete_orthonormal(Matrix& q, Eigen::Index filled) {
  const Eigen::Index m = q.rows();
  for (Eigen::Index j = filled; j < q.cols(); ++j) {
    Vector best;
    double best_norm = -1.0;
    for (Eigen::Index e = 0; e < m; ++e) {
      Vector cand = Vector::Unit(m, e);
      // Two passes of Gram-Schmidt keep the result orthogonal to rounding.
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index k = 0; k < j; ++k) {
          cand -= q.col(k).dot(cand) * q.col(k);
        }
      }
      const double nrm = cand.norm();
      if (nrm > best_norm + 1e-12) {
        best_norm = nrm;
        best = std::move(cand);
      }
    }
    q.col(j) = best / best_norm;
  }
}

// Jacobi on a matrix with rows >= cols.
SvdResult jacobi_tall(const Matrix& a, const SvdOptions& options) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  Matrix work = a;
  Matrix v = Matrix::Identity(n, n);

  double off = 0.0;
  bool converged = n < 2;
  for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
    off = 0.0;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = work.col(p).squaredNorm();
        const double beta = work.col(q).squaredNorm();
        const double gamma = work.col(p).dot(work.col(q));
        if (gamma == 0.0 || alpha == 0.0 || beta == 0.0) continue;
        const double ratio = std::abs(gamma) / std::sqrt(alpha * beta);
        off = std::max(off, ratio);
        if (ratio <= options.tolerance) continue;

        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        for (Eigen::Index i = 0; i < m; ++i) {
          const double wp = work(i, p);
          const double wq = work(i, q);
          work(i, p) = c * wp - s * wq;
          work(i, q) = s * wp + c * wq;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double vp = v(i, p);
          const double vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    converged = off <= options.tolerance;
  }
  if (!converged) {
    throw ConvergenceError("jacobi svd did not converge in " + std::to_string(options.max_sweeps) +
                               " sweeps",
                           off);
  }

  Vector norms(n);
  for (Eigen::Index j = 0; j < n; ++j) norms(j) = work.col(j).norm();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return norms(x) > norms(y); });

  SvdResult out;
  out.singular_values.resize(n);
  out.u.resize(m, n);
  out.v.resize(n, n);
  const double smax = n > 0 ? norms(order.front()) : 0.0;
  const double floor = smax * static_cast<double>(m) * std::numeric_limits<double>::epsilon();
  Eigen::Index filled = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    out.singular_values(j) = norms(src);
    out.v.col(j) = v.col(src);
    if (norms(src) > floor && norms(src) > 0.0) {
      out.u.col(j) = work.col(src) / norms(src);
      filled = j + 1;
    }
  }
  complete_orthonormal(out.u, filled);
  return out;
}

void apply_sign_convention(SvdResult& s) {
  for (Eigen::Index j = 0; j < s.u.cols(); ++j) {
    Eigen::Index arg = 0;
    s.u.col(j).cwiseAbs().maxCoeff(&arg);
    if (s.u(arg, j) < 0.0) {
      s.u.col(j) = -s.u.col(j);
      s.v.col(j) = -s.v.col(j);
    }
  }
}

}  // namespace

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) throw InputError(std::string(what) + " contains non-finite entries");
}

SvdResult svd(const Matrix& m, const SvdOptions& options) {
  require_finite(m, "svd input");
  SvdResult out;
  if (m.rows() >= m.cols()) {
    out = jacobi_tall(m, options);
  } else {
    SvdResult t = jacobi_tall(m.transpose(), options);
    out.u = std::move(t.v);
    out.v = std::move(t.u);
    out.singular_values = std::move(t.singular_values);
  }
  apply_sign_convention(out);
  return out;
}

double operator_norm(const Matrix& m, double tol) {
  require_finite(m, "operator_norm input");
  if (!(tol > 0.0)) throw InputError("operator_norm tolerance must be positive");
  if (m.size() == 0) return 0.0;

  const Matrix gram = m.rows() >= m.cols() ? Matrix(m.transpose() * m) : Matrix(m * m.transpose());
  if (gram.diagonal().maxCoeff() == 0.0) return 0.0;

  // Fixed-seed start vector: deterministic, and orthogonal to the top
  // eigenvector only on a null set.
  std::mt19937_64 gen(0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;
  Vector x(gram.rows());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(gen);
  x.normalize();

  constexpr int kMaxIterations = 200000;
  double mu = 0.0;
  double residual = 0.0;
  for (int it = 0; it < kMaxIterations; ++it) {
    Vector y = gram * x;
    const double next_mu = x.dot(y);
    residual = (y - next_mu * x).norm();
    const bool stalled = std::abs(next_mu - mu) <= tol * next_mu;
    mu = next_mu;
    if (mu <= 0.0) return 0.0;
    if (residual <= tol * mu && stalled) return std::sqrt(mu);
    x = y / y.norm();
  }
  throw ConvergenceError("power iteration did not converge", residual / mu);
}

Matrix svt(const Matrix& m, double tau) {
  if (!(tau >= 0.0)) throw InputError("svt threshold must be non-negative");
  require_finite(m, "svt input");
  if (tau == 0.0) return m;
  const SvdResult s = svd(m);
  const Vector shrunk = (s.singular_values.array() - tau).max(0.0).matrix();
  if (shrunk.maxCoeff() <= 0.0) return Matrix::Zero(m.rows(), m.cols());
  return s.u * shrunk.asDiagonal() * s.v.transpose();
}

double nuclear_norm(const Matrix& m) { return svd(m).singular_values.sum(); }

int numerical_rank(const SvdResult& s, double threshold) {
  return static_cast<int>((s.singular_values.array() > threshold).count());
}

int numerical_rank(const Matrix& m, double threshold) { return numerical_rank(svd(m), threshold); }

}  // namespace lrb::linalg
