#pragma once

#include <Eigen/Dense>

namespace pmon {

/// Largest supported target state / observation dimension.
inline constexpr int kMaxDim = 8;

/// Dense matrix with inline storage for up to kMaxDim x kMaxDim entries.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

[[nodiscard]] Matrix symmetrized(const Matrix& m);

[[nodiscard]] bool is_symmetric(const Matrix& m, double tol = 1e-12);

/// Cholesky-style factorization; fails when a pivot drops to `pivot_tol`
/// (relative to the largest diagonal entry, floored at one) or below.
[[nodiscard]] bool is_positive_definite(const Matrix& m, double pivot_tol = 1e-12);

[[nodiscard]] bool is_positive_semidefinite(const Matrix& m, double tol = 1e-12);

/// Extreme eigenvalues of the symmetric part of `m`.
[[nodiscard]] double min_eigenvalue(const Matrix& m);
[[nodiscard]] double max_eigenvalue(const Matrix& m);

/// Largest eigenvalue modulus of a general square matrix.
[[nodiscard]] double spectral_radius(const Matrix& m);

[[nodiscard]] bool all_finite(const Matrix& m);

}  // namespace pmon
