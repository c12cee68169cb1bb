#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "gmmdecomp/core.hpp"

namespace gmmdecomp::testing {

inline Mat random_rotation(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal;
  Mat a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Mat> qr(a);
  return qr.householderQ();
}

/// Symmetric positive definite matrix with eigenvalues uniform in [lo, hi].
inline Mat random_spd(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  const Mat q = random_rotation(rng, n);
  Vec ev(n);
  for (int i = 0; i < n; ++i) ev[i] = u(rng);
  Mat s = q * ev.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

inline Vec random_vec(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

/// Weights log-uniform in [0.1, 10], means in [-box, box]^n, sigma eigenvalues
/// in [s_lo, s_hi].
inline Gmm random_gmm(std::mt19937_64& rng, int n, int m, double box, double s_lo,
                      double s_hi) {
  std::uniform_real_distribution<double> lw(std::log(0.1), std::log(10.0));
  Gmm g;
  for (int i = 0; i < m; ++i) {
    g.push_back(GaussianComponent(std::exp(lw(rng)), random_vec(rng, n, -box, box),
                                  random_spd(rng, n, s_lo, s_hi)));
  }
  return g;
}

inline double rel_err(const Vec& a, const Vec& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

inline double rel_err(const Mat& a, const Mat& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

}  // namespace gmmdecomp::testing
