#include "gmmdecomp/linalg.hpp"

#include <algorithm>
#include <stdexcept>

namespace gmmdecomp {

bool is_symmetric(const Mat& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

Vec symmetric_eigenvalues(const Mat& a) {
  const Mat sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw std::domain_error("symmetric_eigenvalues: decomposition failed");
  }
  return es.eigenvalues();
}

Mat symmetric_sqrt(const Mat& a, double eigen_floor) {
  const Mat sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  if (es.info() != Eigen::Success) {
    throw std::domain_error("symmetric_sqrt: decomposition failed");
  }
  const double floor = std::max(0.0, eigen_floor);
  const Vec roots = es.eigenvalues().unaryExpr(
      [floor](double l) { return std::sqrt(std::max(l, floor)); });
  Mat r = es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (r + r.transpose());
}

Mat lower_cholesky(const Mat& spd) {
  Eigen::LLT<Mat> llt(0.5 * (spd + spd.transpose()));
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("lower_cholesky: matrix is not positive definite");
  }
  return llt.matrixL();
}

}  // namespace gmmdecomp
