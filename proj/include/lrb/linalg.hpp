#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace lrb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

/// Singular values at or below this count as zero for rank purposes.
inline constexpr double kRankThreshold = 1e-10;

struct SvdOptions {
  int max_sweeps = 100;
  /// Columns p, q are treated as orthogonal once |<a_p, a_q>| <= tolerance * |a_p| |a_q|.
  double tolerance = 1e-12;
};

/// Thin SVD: m = u * diag(singular_values) * v^T with k = min(rows, cols).
///
/// Singular values are sorted non-increasing. u (rows x k) and v (cols x k)
/// have orthonormal columns; columns belonging to zero singular values are
/// completed to an orthonormal set. Each column of u is signed so that its
/// largest-magnitude entry is non-negative, which makes the output a
/// deterministic function of the input.
struct SvdResult {
  Matrix u;
  Vector singular_values;
  Matrix v;
};

/// One-sided (Hestenes) Jacobi SVD.
///
/// Throws InputError for non-finite input and ConvergenceError when the
/// orthogonality tolerance is not met within max_sweeps.
SvdResult svd(const Matrix& m, const SvdOptions& options = {});

/// Largest singular value by power iteration on the smaller Gram matrix,
/// accurate to relative tolerance `tol`.
double operator_norm(const Matrix& m, double tol = 1e-12);

/// Singular value soft-thresholding, the proximal map of tau * ||.||_*:
///   argmin_A 0.5 ||A - m||_F^2 + tau ||A||_*.
Matrix svt(const Matrix& m, double tau);

double nuclear_norm(const Matrix& m);

/// Number of singular values above `threshold`.
int numerical_rank(const Matrix& m, double threshold = kRankThreshold);
int numerical_rank(const SvdResult& s, double threshold = kRankThreshold);

bool all_finite(const Matrix& m);

/// Throws InputError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);

}  // namespace linalg
}  // namespace lrb
