#include "pmon/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace pmon {

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * (1.0 + m.cwiseAbs().maxCoeff());
}

bool is_positive_definite(const Matrix& m, double pivot_tol) {
  if (m.rows() == 0 || !is_symmetric(m) || !all_finite(m)) return false;
  const auto n = m.rows();
  const double scale = std::max(1.0, m.diagonal().cwiseAbs().maxCoeff());
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = m(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > pivot_tol * scale)) return false;
    l(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  return true;
}

bool is_positive_semidefinite(const Matrix& m, double tol) {
  if (m.rows() == 0 || !is_symmetric(m) || !all_finite(m)) return false;
  return min_eigenvalue(m) >= -tol * (1.0 + m.cwiseAbs().maxCoeff());
}

double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double spectral_radius(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace pmon
