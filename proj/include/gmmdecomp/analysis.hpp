#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gmmdecomp/core.hpp"

namespace gmmdecomp {

/// Numerically certified local maximum of a mixture.
struct Mode {
  Vec location;
  double value = 0.0;
  double gradient_norm = 0.0;
  double min_hessian_eigenvalue = 0.0;
  double max_hessian_eigenvalue = 0.0;
  Index seed_index = 0;  // search-grid node the ascent started from
};

struct ModeSearchSettings {
  /// Gradient tolerance relative to the largest rasterized value.
  double gtol_relative = 1e-10;
  /// Converged points closer than this are merged. Non-positive means
  /// one tenth of the smallest grid spacing.
  double dedupe_radius = 0.0;
  int max_iter = 500;
};

struct ModeSearch {
  std::vector<Mode> modes;
  /// Seeds whose ascent did not reach a certified maximum.
  std::vector<Index> dropped_seeds;
};

/// Ascends from every strict local maximum of the rasterized mixture (over
/// the 3^n nearest nodes) and keeps the certified, deduplicated end points,
/// ordered by seed index.
ModeSearch find_modes(const Gmm& gmm, const Grid& search_grid,
                      const ModeSearchSettings& settings = {});

/// Newton ascent with a gradient-ascent fallback wherever the Hessian is
/// not negative definite. Returns false if no certified maximum was reached.
bool ascend_to_mode(const Gmm& gmm, const Vec& start, double gtol, int max_iter,
                    Mode& out);

/// sqrt(n) * s_max^2 / s_min, s the eigenvalues of sigma (not of sigma^2).
double mode_distance_bound(const GaussianComponent& c);

struct BoundCertificate {
  Mode mode;
  Index component = 0;
  double distance = 0.0;
  double bound = 0.0;
  double ratio = 0.0;
};

/// Component with the smallest distance/bound ratio for `mode`.
BoundCertificate certify_bound(const Gmm& gmm, const Mode& mode);

/// 2n spherical atoms of common sigma and amplitude at +-(sqrt(n) sigma - eps) e_i,
/// ordered +e_1, -e_1, +e_2, ... Requires 0 < eps < sqrt(n) sigma.
Gmm tightness_family(int n, double sigma, double amplitude, double eps);

/// Surface area of the unit sphere in R^n.
double unit_sphere_area(int n);

struct SphereCheck {
  double estimate = 0.0;
  double reference = 0.0;
  double relative_error = 0.0;
};

/// Monte Carlo for the integral of (x.y)^k over the unit sphere against
/// |x|^k C_{k,n}, where C_{k,n} is estimated from an independent sample with
/// x = e_1. k must be even and non-negative, samples >= 1e4.
SphereCheck sphere_moment_check(int k, const Vec& x, Index samples, std::uint64_t seed);

/// Monte Carlo for the integral of (y, A y) over the unit sphere against
/// Tr(A) C_{2,n}, with C_{2,n} estimated independently. A symmetric.
SphereCheck sphere_trace_check(const Mat& a, Index samples, std::uint64_t seed);

/// Atoms u(hm) h^n g(hm, sqrt(D) h I) over the lattice points hm inside
/// [lower, upper]; zero weights are skipped. u must be non-negative.
Gmm quasi_interpolant(const std::function<double(const Vec&)>& u, const Vec& lower,
                      const Vec& upper, double h, double d);

}  // namespace gmmdecomp
