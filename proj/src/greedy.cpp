#include "gmmdecomp/greedy.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gmmdecomp/eval.hpp"
#include "gmmdecomp/linalg.hpp"

namespace gmmdecomp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_neighbourhood(const Grid& grid, Index k, const char* what) {
  if (k == 0 || k > grid.size()) {
    throw std::invalid_argument(std::string(what) + " must be in [1, " +
                                std::to_string(grid.size()) + "], got " +
                                std::to_string(k));
  }
}

// Flat table of the k nearest nodes of every node, row per node.
std::vector<Index> neighbour_table(const Grid& grid, Index k) {
  std::vector<Index> table;
  table.reserve(grid.size() * k);
  for (Index node = 0; node < grid.size(); ++node) {
    const auto nb = k_nearest_node(grid, node, k);
    table.insert(table.end(), nb.begin(), nb.end());
  }
  return table;
}

Vec smooth_with_table(const Vec& r, const std::vector<Index>& table, Index k) {
  Vec out(r.size());
  const double inv = 1.0 / static_cast<double>(k);
  for (Eigen::Index node = 0; node < r.size(); ++node) {
    double s = 0.0;
    const Index base = static_cast<Index>(node) * k;
    for (Index j = 0; j < k; ++j) s += r[static_cast<Eigen::Index>(table[base + j])];
    out[node] = s * inv;
  }
  return out;
}

Mat moment_sigma_over(const Signal& r, const Vec& x0, const std::vector<Index>& nodes,
                      double sigma_floor) {
  const Grid& grid = r.grid();
  const int n = grid.dim();
  Mat moment = Mat::Zero(n, n);
  double mass = 0.0;
  for (Index z : nodes) {
    const double w = std::max(r[z], 0.0);
    if (w == 0.0) continue;
    const Vec dz = grid.point(z) - x0;
    moment += w * (dz * dz.transpose());
    mass += w;
  }
  if (!(mass > 0.0)) return sigma_floor * Mat::Identity(n, n);
  moment /= mass;
  return symmetric_sqrt(moment, sigma_floor * sigma_floor);
}

// Nodes nearest x0; when x0 is itself a node the integer-offset search is
// used so that symmetric neighbours tie exactly.
std::vector<Index> nearest_nodes(const Grid& grid, const Vec& x0, Index k) {
  const Index nearest = k_nearest(grid, x0, 1).front();
  if (grid.point(nearest) == x0) return k_nearest_node(grid, nearest, k);
  return k_nearest(grid, x0, k);
}

}  // namespace

void DecompositionConfig::validate(const Grid& grid) const {
  check_neighbourhood(grid, tau1, "tau1");
  check_neighbourhood(grid, tau2, "tau2");
  if (max_components < 1) {
    throw std::invalid_argument("max_components must be at least 1");
  }
  if (!(stall_threshold >= 0.0)) {
    throw std::invalid_argument("stall_threshold must be non-negative");
  }
  if (std::isnan(snr_stop_target)) {
    throw std::invalid_argument("snr_stop_target must not be NaN");
  }
  if (optimizer.memory < 1 || optimizer.max_iter < 1) {
    throw std::invalid_argument("optimizer settings must be positive");
  }
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::snr_reached: return "snr_reached";
    case StopReason::max_components: return "max_components";
    case StopReason::stalled: return "stalled";
  }
  return "unknown";
}

Signal smooth_residual(const Signal& r, Index tau1) {
  check_neighbourhood(r.grid(), tau1, "tau1");
  const auto table = neighbour_table(r.grid(), tau1);
  return Signal(r.grid(), smooth_with_table(r.values(), table, tau1));
}

std::pair<Index, Vec> argmax_signal(const Signal& s) {
  if (s.size() == 0) throw std::invalid_argument("argmax: empty signal");
  Index best = 0;
  for (Index i = 1; i < s.size(); ++i) {
    if (s[i] > s[best]) best = i;
  }
  return {best, s.grid().point(best)};
}

Mat local_moment_sigma(const Signal& r, const Vec& x0, Index tau2, double sigma_floor) {
  check_neighbourhood(r.grid(), tau2, "tau2");
  if (!(sigma_floor > 0.0)) throw std::invalid_argument("sigma_floor must be positive");
  return moment_sigma_over(r, x0, nearest_nodes(r.grid(), x0, tau2), sigma_floor);
}

double project_weight(const Signal& r, const Vec& x0, const Mat& sigma0,
                      const Grid& grid) {
  if (!grid.same_lattice(r.grid())) {
    throw std::invalid_argument("project_weight: residual lives on another grid");
  }
  const Vec g = GaussianKernel(x0, sigma0).densities(grid.points());
  const double gg = g.squaredNorm();
  if (!(gg > 0.0)) return 0.0;
  return std::max(0.0, r.values().dot(g) / gg);
}

RefinedAtom refine_single(const Signal& d, const GaussianComponent& init,
                          const Gmm& frozen, const BoundsPolicy& bounds,
                          const OptimizerSettings& settings) {
  const ResidualObjective objective(d, frozen);
  const PackedParams p0 = pack(Gmm({init}), bounds);
  auto [p, report] = minimize_box(objective, p0, settings);
  Gmm out = unpack(p);
  return {out[0], std::move(report)};
}

RefinedMixture refine_all(const Signal& d, const Gmm& gmm, const BoundsPolicy& bounds,
                          const OptimizerSettings& settings, double prune_threshold) {
  if (gmm.empty()) throw std::invalid_argument("refine_all: empty mixture");
  const ResidualObjective objective(d, Gmm{});
  const PackedParams p0 = pack(gmm, bounds);
  auto [p, report] = minimize_box(objective, p0, settings);
  RefinedMixture out{Gmm{}, std::move(report), 0};
  for (const auto& c : unpack(p)) {
    if (c.weight() <= prune_threshold) {
      ++out.pruned;
    } else {
      out.gmm.push_back(c);
    }
  }
  return out;
}

double prune_threshold_for(const Signal& d) {
  const double peak = d.values().maxCoeff();
  return peak > 0.0 ? 1e-8 * peak : 0.0;
}

DecompositionResult decompose(const Signal& d, const DecompositionConfig& config) {
  const Grid& grid = d.grid();
  config.validate(grid);
  const auto t_start = Clock::now();

  const BoundsPolicy bounds = BoundsPolicy::for_grid(grid);
  const double prune = prune_threshold_for(d);
  const auto smoothing = neighbour_table(grid, config.tau1);
  const Mat points = grid.points();

  DecompositionResult result;
  result.seed = config.seed;
  Vec residual = d.values();
  double res_sq = l2_sq(residual);

  for (;;) {
    const auto t_iter = Clock::now();
    IterationRecord rec;
    rec.iteration = result.trace.size() + 1;
    rec.residual_before = res_sq;

    const Signal r(grid, residual);
    const Vec smoothed = smooth_with_table(residual, smoothing, config.tau1);
    const auto [seed, x0] = argmax_signal(Signal(grid, smoothed));
    rec.seed_index = seed;
    rec.x0 = x0;
    rec.sigma0 = moment_sigma_over(r, x0, k_nearest_node(grid, seed, config.tau2),
                                   bounds.sigma_floor);
    rec.a0 = project_weight(r, x0, rec.sigma0, grid);

    const GaussianComponent init(rec.a0, x0, rec.sigma0);
    RefinedAtom atom = refine_single(d, init, result.gmm, bounds, config.optimizer);
    rec.refined = atom.component;
    rec.single_status = atom.report.status;
    rec.single_iterations = atom.report.iterations;

    Gmm candidate = result.gmm;
    candidate.push_back(atom.component);
    RefinedMixture joint = refine_all(d, candidate, bounds, config.optimizer, prune);
    rec.joint_status = joint.report.status;
    rec.joint_iterations = joint.report.iterations;
    rec.joint_evaluations = joint.report.evaluations;
    result.gmm = std::move(joint.gmm);

    const Vec estimate = gmm_values(result.gmm, points);
    residual = d.values() - estimate;
    res_sq = l2_sq(residual);
    rec.residual_after = res_sq;
    rec.snr_stop = snr_stop(d, Signal(grid, estimate)).snr_db;
    rec.component_count = result.gmm.size();
    rec.wall_time_s = seconds_since(t_iter);
    result.trace.push_back(rec);

    if (rec.snr_stop >= config.snr_stop_target) {
      result.stop_reason = StopReason::snr_reached;
      break;
    }
    const double before = rec.residual_before;
    if (!(before > 0.0) || before - res_sq < config.stall_threshold * before) {
      result.stop_reason = StopReason::stalled;
      break;
    }
    if (result.gmm.size() >= config.max_components) {
      result.stop_reason = StopReason::max_components;
      break;
    }
  }
  result.wall_time_s = seconds_since(t_start);
  return result;
}

}  // namespace gmmdecomp
