#include "gmmdecomp/eval.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "gmmdecomp/linalg.hpp"

namespace gmmdecomp {

GaussianKernel::GaussianKernel(const Vec& mean, const Mat& sigma) : mean_(mean) {
  const auto n = mean.size();
  if (n == 0 || sigma.rows() != n || sigma.cols() != n) {
    throw std::invalid_argument("gaussian: sigma must be n x n with n = dim(mean)");
  }
  if (!sigma.allFinite() || !is_symmetric(sigma, 1e-12)) {
    throw std::invalid_argument("gaussian: sigma must be symmetric");
  }
  if (!(symmetric_eigenvalues(sigma).minCoeff() > 0.0)) {
    throw std::invalid_argument("gaussian: sigma must be positive definite");
  }
  factor(sigma);
}

GaussianKernel::GaussianKernel(const GaussianComponent& c) : mean_(c.mean()) {
  factor(c.sigma());
}

void GaussianKernel::factor(const Mat& sigma) {
  const auto n = mean_.size();
  const Mat cov = sigma * sigma;
  Eigen::LLT<Mat> llt(0.5 * (cov + cov.transpose()));
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("gaussian: sigma^2 is not positive definite");
  }
  chol_ = llt.matrixL();
  const Mat linv = chol_.triangularView<Eigen::Lower>().solve(Mat::Identity(n, n));
  precision_ = linv.transpose() * linv;
  precision_ = 0.5 * (precision_ + precision_.transpose()).eval();
  // log det(sigma) = log det(L) since det(sigma)^2 = det(L)^2.
  const double log_det_sigma = chol_.diagonal().array().log().sum();
  log_norm_ = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) -
              log_det_sigma;
}

double GaussianKernel::density(const Vec& x) const {
  if (x.size() != mean_.size()) {
    throw std::invalid_argument("gaussian: point dimension mismatch");
  }
  const Vec z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
  return std::exp(log_norm_ - 0.5 * z.squaredNorm());
}

Vec GaussianKernel::densities(const Mat& pts) const {
  const Mat diff = pts.colwise() - mean_;
  const Mat z = chol_.triangularView<Eigen::Lower>().solve(diff);
  const Eigen::ArrayXd q = z.colwise().squaredNorm().transpose().array();
  return (log_norm_ - 0.5 * q).exp().matrix();
}

double gaussian_density(const Vec& mean, const Mat& sigma, const Vec& x) {
  return GaussianKernel(mean, sigma).density(x);
}

double gmm_value(const Gmm& gmm, const Vec& x) {
  double f = 0.0;
  for (const auto& c : gmm) f += c.weight() * GaussianKernel(c).density(x);
  return f;
}

Vec gmm_values(const Gmm& gmm, const Mat& pts) {
  Vec f = Vec::Zero(pts.cols());
  for (const auto& c : gmm) {
    if (c.dim() != pts.rows()) {
      throw std::invalid_argument("gmm: point dimension mismatch");
    }
    f += c.weight() * GaussianKernel(c).densities(pts);
  }
  return f;
}

Signal rasterize(const Gmm& gmm, const Grid& grid) {
  if (gmm.empty()) return Signal::zeros(grid);
  if (gmm.dim() != grid.dim()) {
    throw std::invalid_argument("rasterize: gmm and grid dimensions differ");
  }
  return Signal(grid, gmm_values(gmm, grid.points()));
}

Vec gmm_gradient(const Gmm& gmm, const Vec& x) {
  Vec grad = Vec::Zero(x.size());
  for (const auto& c : gmm) {
    const GaussianKernel k(c);
    const double g = c.weight() * k.density(x);
    grad -= g * (k.precision() * (x - c.mean()));
  }
  return grad;
}

Mat gmm_hessian(const Gmm& gmm, const Vec& x) {
  const auto n = x.size();
  Mat h = Mat::Zero(n, n);
  for (const auto& c : gmm) {
    const GaussianKernel k(c);
    const double g = c.weight() * k.density(x);
    const Vec w = k.precision() * (x - c.mean());
    h += g * (w * w.transpose() - k.precision());
  }
  // w w^T and the precision are symmetric term by term; enforce bitwise.
  return 0.5 * (h + h.transpose());
}

double l2_sq(const Vec& v) { return v.squaredNorm(); }
double l2_sq(const Signal& s) { return l2_sq(s.values()); }

double population_variance(const Vec& v) {
  if (v.size() == 0) return 0.0;
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size());
}

SnrReport snr_of_noise(const Signal& clean, double noise_sigma) {
  if (clean.size() < 2) {
    throw std::invalid_argument("snr: clean signal needs at least two samples");
  }
  if (!(noise_sigma > 0.0)) {
    throw std::invalid_argument("snr: noise sigma must be positive");
  }
  const double var = population_variance(clean.values());
  if (!(var > 0.0)) {
    throw std::domain_error("snr: clean signal has zero variance");
  }
  const double nvar = noise_sigma * noise_sigma;
  return {10.0 * std::log10(var / nvar), var, nvar};
}

double noise_sigma_for_snr(const Signal& clean, double snr_db) {
  if (clean.size() < 2) {
    throw std::invalid_argument("snr: clean signal needs at least two samples");
  }
  const double var = population_variance(clean.values());
  if (!(var > 0.0)) {
    throw std::domain_error("snr: clean signal has zero variance");
  }
  return std::sqrt(var / std::pow(10.0, snr_db / 10.0));
}

SnrReport snr_stop(const Signal& d, const Signal& d_est) {
  if (!d.grid().same_lattice(d_est.grid())) {
    throw std::invalid_argument("snr_stop: signals live on different grids");
  }
  const double var_est = population_variance(d_est.values());
  const double var_res = population_variance(d.values() - d_est.values());
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (!(var_est > 0.0)) return {-inf, var_est, var_res};
  if (!(var_res > 0.0)) return {inf, var_est, var_res};
  return {10.0 * std::log10(var_est / var_res), var_est, var_res};
}

}  // namespace gmmdecomp
