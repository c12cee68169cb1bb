#pragma once

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gmmdecomp/core.hpp"

namespace gmmdecomp {

/// Box bounds applied to every packed component.
struct BoundsPolicy {
  double sigma_floor = 0.0;  // lower bound on diagonal Cholesky entries
  double diag_upper = std::numeric_limits<double>::infinity();
  double offdiag_bound = std::numeric_limits<double>::infinity();
  Vec mean_lower;  // empty means unbounded
  Vec mean_upper;

  /// Means in the node bounding box grown by 10% of its extent per axis,
  /// sigma_floor = half the smallest spacing, Cholesky entries bounded by
  /// the largest grid extent.
  static BoundsPolicy for_grid(const Grid& grid);
  static BoundsPolicy unbounded(double sigma_floor);
};

/// Flat parameter vector with per-entry bounds. Per component the layout is
/// [a, x_1..x_n, L_11, L_21, L_22, L_31, ...] with L the lower Cholesky
/// factor of sigma^2 stored row by row.
struct PackedParams {
  int dim = 0;
  Vec values;
  Vec lower;
  Vec upper;

  Index component_count() const;
};

Index params_per_component(int dim);

PackedParams pack(const Gmm& gmm, const BoundsPolicy& policy);
Gmm unpack(const PackedParams& p);
Gmm unpack(const Vec& values, int dim);

struct OptimizerSettings {
  int memory = 10;
  double gtol = 1e-8;
  double ftol = 1e-12;
  int max_iter = 500;
  int max_line_search = 40;
};

enum class SolveStatus { converged, max_iter, line_search_failure };
std::string to_string(SolveStatus s);

struct SolveReport {
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  int evaluations = 0;
  double projected_gradient_norm = 0.0;
  SolveStatus status = SolveStatus::converged;
  /// Objective at x0 followed by every accepted iterate.
  std::vector<double> history;
};

/// f(x), writing the gradient into `grad` (already sized).
using ObjectiveFn = std::function<double(const Vec& x, Vec& grad)>;

struct BoxSolution {
  Vec x;
  SolveReport report;
};

/// Limited-memory BFGS with box constraints: generalized Cauchy point,
/// subspace minimization over the free variables, and a Wolfe line search
/// along the feasible segment. x0 is projected onto the box first.
BoxSolution minimize_box(const ObjectiveFn& f, const Vec& x0, const Vec& lower,
                         const Vec& upper, const OptimizerSettings& settings);

std::pair<PackedParams, SolveReport> minimize_box(const ObjectiveFn& f,
                                                  const PackedParams& p0,
                                                  const OptimizerSettings& settings);

/// |target - frozen - active|_2^2 over the grid and its analytic gradient
/// with respect to the packed active parameters. The frozen part is
/// rasterized once at construction.
class ResidualObjective {
 public:
  ResidualObjective(const Signal& target, const Gmm& frozen);

  int dim() const { return dim_; }
  double operator()(const Vec& packed, Vec& grad) const;
  double value(const Vec& packed) const;

 private:
  int dim_;
  Mat points_;
  Vec base_;
};

std::pair<double, Vec> objective_grad(const Signal& target,
                                      const PackedParams& active,
                                      const Gmm& frozen);

}  // namespace gmmdecomp
