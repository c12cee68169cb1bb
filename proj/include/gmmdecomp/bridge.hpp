#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gmmdecomp/core.hpp"

namespace gmmdecomp {

struct Histogram {
  Signal counts;
  Index dropped = 0;  // points outside the grid box grown by half a cell
};

/// Counts of points assigned to their nearest grid node.
Histogram histogram(const PointCloud& points, const Grid& grid);

/// floor(C max(d, 0)) copies of every node, C = target_count / sum max(d, 0),
/// in flat-index order. Throws std::domain_error without positive mass.
PointCloud signal_to_points(const Signal& d, Index target_count);

/// Draws i.i.d. samples from the mixture normalized to unit weight.
PointCloud sample_gmm(const Gmm& gmm, Index count, std::uint64_t seed);

/// Scales the weights to sum to 1. Throws std::domain_error on zero weight.
Gmm normalize_gmm(const Gmm& gmm);

/// sum_p log sum_m a_m g_m(p); -infinity if some point has zero density.
/// The mixture must be normalized within 1e-9.
double log_likelihood(const PointCloud& points, const Gmm& gmm);

struct EmConfig {
  Index k = 1;
  int max_iter = 1000;
  /// Stop once the mean per-point log-likelihood gains less than this.
  double tol = 1e-9;
  /// Eigenvalue floor for covariances; defaults to 1e-6 * (data extent)^2.
  std::optional<double> cov_floor;
  std::uint64_t seed = 0;
  int restarts = 1;

  void validate() const;
};

struct EmRun {
  Gmm gmm;
  /// Log-likelihood of the initialization followed by every M-step.
  std::vector<double> history;
  Index reseeds = 0;  // components re-drawn after losing all responsibility
};

struct EmResult {
  Gmm gmm;  // normalized
  double log_likelihood = 0.0;
  Index best_restart = 0;
  std::vector<EmRun> runs;
};

/// Full-covariance EM from `restarts` seeded initializations (means at
/// random data points, sample covariance, uniform weights); keeps the run
/// with the largest final log-likelihood.
EmResult em_fit(const PointCloud& points, const EmConfig& config);

}  // namespace gmmdecomp
