#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "gmmdecomp/linalg.hpp"
#include "gmmdecomp/optim.hpp"

namespace gmmdecomp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

BoundsPolicy BoundsPolicy::for_grid(const Grid& grid) {
  BoundsPolicy p;
  const Vec lo = grid.lower();
  const Vec hi = grid.upper();
  Vec extent = hi - lo;
  for (Eigen::Index a = 0; a < extent.size(); ++a) {
    extent[a] = std::max(extent[a], grid.spacing()[a]);
  }
  p.sigma_floor = 0.5 * grid.min_spacing();
  p.mean_lower = lo - 0.1 * extent;
  p.mean_upper = hi + 0.1 * extent;
  p.diag_upper = extent.maxCoeff();
  p.offdiag_bound = extent.maxCoeff();
  return p;
}

BoundsPolicy BoundsPolicy::unbounded(double sigma_floor) {
  BoundsPolicy p;
  p.sigma_floor = sigma_floor;
  return p;
}

Index params_per_component(int dim) {
  const auto n = static_cast<Index>(dim);
  return 1 + n + n * (n + 1) / 2;
}

Index PackedParams::component_count() const {
  if (dim <= 0) return 0;
  return static_cast<Index>(values.size()) / params_per_component(dim);
}

PackedParams pack(const Gmm& gmm, const BoundsPolicy& policy) {
  PackedParams p;
  p.dim = gmm.dim();
  if (gmm.empty()) return p;
  const int n = p.dim;
  const bool mean_bounded = policy.mean_lower.size() == n &&
                            policy.mean_upper.size() == n;
  if ((policy.mean_lower.size() != 0 || policy.mean_upper.size() != 0) &&
      !mean_bounded) {
    throw std::invalid_argument("pack: mean bounds have the wrong dimension");
  }
  const auto per = static_cast<Eigen::Index>(params_per_component(n));
  const auto total = per * static_cast<Eigen::Index>(gmm.size());
  p.values.resize(total);
  p.lower.resize(total);
  p.upper.resize(total);

  Eigen::Index k = 0;
  for (const auto& c : gmm) {
    Mat l;
    try {
      l = lower_cholesky(c.covariance());
    } catch (const std::domain_error& e) {
      throw std::logic_error(std::string("pack: cholesky of a valid component failed: ") +
                             e.what());
    }
    p.values[k] = c.weight();
    p.lower[k] = 0.0;
    p.upper[k] = kInf;
    ++k;
    for (int j = 0; j < n; ++j, ++k) {
      p.values[k] = c.mean()[j];
      p.lower[k] = mean_bounded ? policy.mean_lower[j] : -kInf;
      p.upper[k] = mean_bounded ? policy.mean_upper[j] : kInf;
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= i; ++j, ++k) {
        p.values[k] = l(i, j);
        if (i == j) {
          p.lower[k] = policy.sigma_floor;
          p.upper[k] = policy.diag_upper;
        } else {
          p.lower[k] = -policy.offdiag_bound;
          p.upper[k] = policy.offdiag_bound;
        }
      }
    }
  }
  return p;
}

Gmm unpack(const Vec& values, int dim) {
  if (dim <= 0) throw std::invalid_argument("unpack: dimension must be positive");
  const auto per = static_cast<Eigen::Index>(params_per_component(dim));
  if (values.size() % per != 0) {
    throw std::invalid_argument("unpack: vector length " + std::to_string(values.size()) +
                                " is not a multiple of " + std::to_string(per));
  }
  Gmm gmm;
  for (Eigen::Index k = 0; k < values.size();) {
    const double a = values[k++];
    Vec mean = values.segment(k, dim);
    k += dim;
    Mat l = Mat::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j <= i; ++j) l(i, j) = values[k++];
    }
    gmm.push_back(GaussianComponent(a, std::move(mean),
                                    symmetric_sqrt(l * l.transpose())));
  }
  return gmm;
}

Gmm unpack(const PackedParams& p) { return unpack(p.values, p.dim); }

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::line_search_failure: return "line_search_failure";
  }
  return "unknown";
}

}  // namespace gmmdecomp
