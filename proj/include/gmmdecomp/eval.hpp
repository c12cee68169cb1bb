#pragma once

#include "gmmdecomp/core.hpp"

namespace gmmdecomp {

/// Normalized Gaussian density with mean `mean` and covariance sigma^2,
/// factored once for repeated evaluation. The normalizer is
/// (2 pi)^(-n/2) / det(sigma), obtained from the Cholesky factor of sigma^2.
class GaussianKernel {
 public:
  GaussianKernel(const Vec& mean, const Mat& sigma);
  explicit GaussianKernel(const GaussianComponent& c);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vec& mean() const { return mean_; }
  /// Lower Cholesky factor of sigma^2.
  const Mat& cholesky() const { return chol_; }
  /// sigma^-2
  const Mat& precision() const { return precision_; }
  double log_normalizer() const { return log_norm_; }

  double density(const Vec& x) const;
  /// Densities at the columns of `pts` (dim x count).
  Vec densities(const Mat& pts) const;

 private:
  void factor(const Mat& sigma);

  Vec mean_;
  Mat chol_;
  Mat precision_;
  double log_norm_ = 0.0;
};

double gaussian_density(const Vec& mean, const Mat& sigma, const Vec& x);

/// sum_m a_m g(x_m, sigma_m)(x)
double gmm_value(const Gmm& gmm, const Vec& x);
Vec gmm_values(const Gmm& gmm, const Mat& pts);

Signal rasterize(const Gmm& gmm, const Grid& grid);

Vec gmm_gradient(const Gmm& gmm, const Vec& x);
Mat gmm_hessian(const Gmm& gmm, const Vec& x);

/// Unweighted sum of squared samples.
double l2_sq(const Signal& s);
double l2_sq(const Vec& v);

/// Variance with divisor N.
double population_variance(const Vec& v);

struct SnrReport {
  double snr_db = 0.0;
  double variance_signal = 0.0;
  double variance_residual_or_noise = 0.0;
};

/// 10 log10(Var(clean) / noise_sigma^2). Throws std::domain_error when the
/// clean signal has zero variance.
SnrReport snr_of_noise(const Signal& clean, double noise_sigma);

/// Inverse of snr_of_noise: the noise standard deviation giving `snr_db`.
double noise_sigma_for_snr(const Signal& clean, double snr_db);

/// 10 log10(Var(d_est) / Var(d - d_est)). A zero residual variance yields
/// +infinity; a constant estimate (zero estimate variance) yields -infinity,
/// which takes precedence.
SnrReport snr_stop(const Signal& d, const Signal& d_est);

}  // namespace gmmdecomp
