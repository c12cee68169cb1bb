#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gmmdecomp/core.hpp"
#include "gmmdecomp/optim.hpp"

namespace gmmdecomp {

struct DecompositionConfig {
  Index tau1 = 10;             // smoothing neighbourhood size
  Index tau2 = 20;             // moment neighbourhood size
  double snr_stop_target = 20.0;  // dB
  Index max_components = 50;
  double stall_threshold = 1e-6;  // relative residual improvement per iteration
  OptimizerSettings optimizer;
  std::uint64_t seed = 0;

  void validate(const Grid& grid) const;
};

enum class StopReason { snr_reached, max_components, stalled };
std::string to_string(StopReason r);

struct IterationRecord {
  Index iteration = 0;        // 1-based outer iteration M
  Index seed_index = 0;       // flat index of x0
  Vec x0;
  Mat sigma0;
  double a0 = 0.0;
  std::optional<GaussianComponent> refined;  // single-atom refinement output
  double residual_before = 0.0;
  double residual_after = 0.0;
  double snr_stop = 0.0;
  Index component_count = 0;  // after pruning
  SolveStatus single_status = SolveStatus::converged;
  SolveStatus joint_status = SolveStatus::converged;
  int single_iterations = 0;
  int joint_iterations = 0;
  int joint_evaluations = 0;
  double wall_time_s = 0.0;
};

struct DecompositionResult {
  Gmm gmm;
  std::vector<IterationRecord> trace;
  StopReason stop_reason = StopReason::stalled;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
};

/// r'(y) = mean of r over the tau1 nodes nearest to y.
Signal smooth_residual(const Signal& r, Index tau1);

/// Maximum sample; ties go to the lowest flat index.
std::pair<Index, Vec> argmax_signal(const Signal& s);

/// Square root of the second-moment matrix (about x0) of the clamped residual
/// restricted to the tau2 nodes nearest x0, with eigenvalues floored at
/// sigma_floor^2. Falls back to sigma_floor * I when no positive mass remains.
Mat local_moment_sigma(const Signal& r, const Vec& x0, Index tau2, double sigma_floor);

/// argmin_{a >= 0} |r - a g(x0, sigma0)|^2 in closed form.
double project_weight(const Signal& r, const Vec& x0, const Mat& sigma0,
                      const Grid& grid);

struct RefinedAtom {
  GaussianComponent component;
  SolveReport report;
};

struct RefinedMixture {
  Gmm gmm;
  SolveReport report;
  Index pruned = 0;
};

/// Local minimizer of |d - frozen - a g(x, sigma)|^2 over the single atom,
/// started at `init`.
RefinedAtom refine_single(const Signal& d, const GaussianComponent& init,
                            const Gmm& frozen, const BoundsPolicy& bounds,
                            const OptimizerSettings& settings);

/// Joint local minimization of |d - sum_m a_m g_m|^2 over every component,
/// then removal of components with weight <= prune_threshold.
RefinedMixture refine_all(const Signal& d, const Gmm& gmm, const BoundsPolicy& bounds,
                         const OptimizerSettings& settings, double prune_threshold);

/// 1e-8 * max(d), or 0 for a non-positive signal.
double prune_threshold_for(const Signal& d);

/// Greedy decomposition of d into a sparse Gaussian mixture.
DecompositionResult decompose(const Signal& d, const DecompositionConfig& config);

}  // namespace gmmdecomp
