#include "gmmdecomp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "gmmdecomp/eval.hpp"
#include "gmmdecomp/linalg.hpp"
#include "gmmdecomp/rng.hpp"

namespace gmmdecomp {

namespace {

double ipow(double base, Index e) {
  double r = 1.0;
  for (Index i = 0; i < e; ++i) r *= base;
  return r;
}

// Length scale for gradient steps and the Newton step cap.
std::pair<double, double> sigma_range(const Gmm& gmm) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& c : gmm) {
    const Vec ev = symmetric_eigenvalues(c.sigma());
    lo = std::min(lo, ev[0]);
    hi = std::max(hi, ev[ev.size() - 1]);
  }
  return {lo, hi};
}

bool certify(const Gmm& gmm, const Vec& x, double gtol, Mode& out) {
  const Vec g = gmm_gradient(gmm, x);
  const Vec ev = symmetric_eigenvalues(gmm_hessian(gmm, x));
  out.location = x;
  out.value = gmm_value(gmm, x);
  out.gradient_norm = g.norm();
  out.min_hessian_eigenvalue = ev[0];
  out.max_hessian_eigenvalue = ev[ev.size() - 1];
  return out.gradient_norm < gtol && out.min_hessian_eigenvalue < 0.0 &&
         out.max_hessian_eigenvalue <= 1e-8 * std::abs(out.min_hessian_eigenvalue);
}

// Strict maximum over the axis neighbours on the finest axes; a cheap filter
// applied before the full k-nearest comparison.
bool beats_axis_neighbours(const Grid& grid, const Vec& values, Index node) {
  const auto multi = grid.multi_index(node);
  const double v = values[static_cast<Eigen::Index>(node)];
  for (int ax = 0; ax < grid.dim(); ++ax) {
    if (grid.spacing()[ax] != grid.min_spacing()) continue;
    const Index s = grid.stride(ax);
    const Index i = multi[static_cast<Index>(ax)];
    if (i > 0 && !(v > values[static_cast<Eigen::Index>(node - s)])) return false;
    if (i + 1 < grid.counts()[static_cast<Index>(ax)] &&
        !(v > values[static_cast<Eigen::Index>(node + s)])) {
      return false;
    }
  }
  return true;
}

Vec uniform_on_sphere(NormalStream& rng, int n) {
  Vec y(n);
  double norm = 0.0;
  while (!(norm > 0.0)) {
    for (int i = 0; i < n; ++i) y[i] = rng.normal();
    norm = y.norm();
  }
  return y / norm;
}

// Sphere-area-scaled mean of (e_1 . y)^k.
double sphere_constant(int k, int n, Index samples, std::uint64_t seed) {
  NormalStream rng(seed);
  double sum = 0.0;
  for (Index s = 0; s < samples; ++s) {
    sum += ipow(uniform_on_sphere(rng, n)[0], static_cast<Index>(k));
  }
  return unit_sphere_area(n) * sum / static_cast<double>(samples);
}

std::uint64_t companion_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

SphereCheck make_check(double estimate, double reference) {
  return {estimate, reference, std::abs(estimate - reference) / std::abs(reference)};
}

void check_samples(Index samples) {
  if (samples < 10000) {
    throw std::invalid_argument("sphere check needs at least 10000 samples");
  }
}

}  // namespace

bool ascend_to_mode(const Gmm& gmm, const Vec& start, double gtol, int max_iter,
                    Mode& out) {
  if (gmm.empty()) throw std::invalid_argument("ascend_to_mode: empty mixture");
  if (start.size() != gmm.dim()) {
    throw std::invalid_argument("ascend_to_mode: start point dimension mismatch");
  }
  const auto [s_min, s_max] = sigma_range(gmm);
  const double step_cap = 4.0 * s_max;
  const double eps = std::numeric_limits<double>::epsilon();

  Vec x = start;
  double f = gmm_value(gmm, x);
  for (int it = 0; it < max_iter; ++it) {
    const Vec g = gmm_gradient(gmm, x);
    const double gn = g.norm();
    if (gn < gtol) break;

    const Mat h = gmm_hessian(gmm, x);
    const Eigen::LLT<Mat> llt(-h);
    const bool newton = llt.info() == Eigen::Success &&
                        symmetric_eigenvalues(h)[h.rows() - 1] < 0.0;
    Vec p = newton ? Vec(llt.solve(g)) : Vec(g * (s_min / gn));
    if (p.norm() > step_cap) p *= step_cap / p.norm();
    const double slope = g.dot(p);

    bool moved = false;
    double t = 1.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Vec xt = x + t * p;
      const double ft = gmm_value(gmm, xt);
      bool accept = ft >= f + 1e-4 * t * slope;
      // Close to the maximum f stops resolving progress; accept Newton
      // steps that shrink the gradient without losing value to round-off.
      if (!accept && newton && ft >= f - 4.0 * eps * std::abs(f)) {
        accept = gmm_gradient(gmm, xt).norm() < gn;
      }
      if (accept) {
        x = xt;
        f = ft;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return certify(gmm, x, gtol, out);
}

ModeSearch find_modes(const Gmm& gmm, const Grid& search_grid,
                      const ModeSearchSettings& settings) {
  if (gmm.empty()) throw std::invalid_argument("find_modes: empty mixture");
  if (gmm.dim() != search_grid.dim()) {
    throw std::invalid_argument("find_modes: grid dimension mismatch");
  }
  const Vec values = gmm_values(gmm, search_grid.points());
  const double peak = values.maxCoeff();
  ModeSearch out;
  if (!(peak > 0.0)) return out;

  const double gtol = settings.gtol_relative * peak;
  const double radius = settings.dedupe_radius > 0.0 ? settings.dedupe_radius
                                                     : search_grid.min_spacing() / 10.0;
  const Index hood = std::min<Index>(
      static_cast<Index>(std::llround(std::pow(3.0, search_grid.dim()))),
      search_grid.size());

  for (Index node = 0; node < search_grid.size(); ++node) {
    if (!beats_axis_neighbours(search_grid, values, node)) continue;
    const double v = values[static_cast<Eigen::Index>(node)];
    bool strict = true;
    for (Index nb : k_nearest_node(search_grid, node, hood)) {
      if (nb != node && !(v > values[static_cast<Eigen::Index>(nb)])) {
        strict = false;
        break;
      }
    }
    if (!strict) continue;

    Mode mode;
    if (!ascend_to_mode(gmm, search_grid.point(node), gtol, settings.max_iter, mode)) {
      out.dropped_seeds.push_back(node);
      continue;
    }
    mode.seed_index = node;
    const bool duplicate = std::any_of(out.modes.begin(), out.modes.end(), [&](const Mode& m) {
      return (m.location - mode.location).norm() <= radius;
    });
    if (!duplicate) out.modes.push_back(std::move(mode));
  }
  return out;
}

double mode_distance_bound(const GaussianComponent& c) {
  const Vec ev = symmetric_eigenvalues(c.sigma());
  const double s_min = ev[0];
  const double s_max = ev[ev.size() - 1];
  return std::sqrt(static_cast<double>(c.dim())) * s_max * s_max / s_min;
}

BoundCertificate certify_bound(const Gmm& gmm, const Mode& mode) {
  if (gmm.empty()) throw std::invalid_argument("certify_bound: empty mixture");
  if (mode.location.size() != gmm.dim()) {
    throw std::invalid_argument("certify_bound: mode dimension mismatch");
  }
  BoundCertificate best;
  best.mode = mode;
  best.ratio = std::numeric_limits<double>::infinity();
  for (Index m = 0; m < gmm.size(); ++m) {
    const double dist = (mode.location - gmm[m].mean()).norm();
    const double bound = mode_distance_bound(gmm[m]);
    const double ratio = dist / bound;
    if (ratio < best.ratio) {
      best.component = m;
      best.distance = dist;
      best.bound = bound;
      best.ratio = ratio;
    }
  }
  return best;
}

Gmm tightness_family(int n, double sigma, double amplitude, double eps) {
  if (n < 1) throw std::invalid_argument("tightness_family: dimension must be positive");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("tightness_family: sigma must be positive");
  }
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) {
    throw std::invalid_argument("tightness_family: amplitude must be positive");
  }
  const double reach = std::sqrt(static_cast<double>(n)) * sigma;
  if (!(eps > 0.0 && eps < reach)) {
    throw std::invalid_argument("tightness_family: eps must lie in (0, sqrt(n) sigma)");
  }
  const Mat s = sigma * Mat::Identity(n, n);
  Gmm out;
  for (int i = 0; i < n; ++i) {
    for (double sign : {1.0, -1.0}) {
      Vec mean = Vec::Zero(n);
      mean[i] = sign * (reach - eps);
      out.push_back(GaussianComponent(amplitude, mean, s));
    }
  }
  return out;
}

double unit_sphere_area(int n) {
  if (n < 1) throw std::invalid_argument("unit_sphere_area: dimension must be positive");
  const double half = 0.5 * static_cast<double>(n);
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

SphereCheck sphere_moment_check(int k, const Vec& x, Index samples, std::uint64_t seed) {
  if (k < 0 || k % 2 != 0) {
    throw std::invalid_argument("sphere_moment_check: k must be even and non-negative");
  }
  if (x.size() < 1) throw std::invalid_argument("sphere_moment_check: empty x");
  check_samples(samples);
  const int n = static_cast<int>(x.size());
  NormalStream rng(seed);
  double sum = 0.0;
  for (Index s = 0; s < samples; ++s) {
    sum += ipow(x.dot(uniform_on_sphere(rng, n)), static_cast<Index>(k));
  }
  const double estimate = unit_sphere_area(n) * sum / static_cast<double>(samples);
  const double reference = ipow(x.norm(), static_cast<Index>(k)) *
                           sphere_constant(k, n, samples, companion_seed(seed));
  return make_check(estimate, reference);
}

SphereCheck sphere_trace_check(const Mat& a, Index samples, std::uint64_t seed) {
  if (a.rows() < 1 || a.rows() != a.cols() || !is_symmetric(a, 1e-12)) {
    throw std::invalid_argument("sphere_trace_check: A must be square and symmetric");
  }
  check_samples(samples);
  const int n = static_cast<int>(a.rows());
  NormalStream rng(seed);
  double sum = 0.0;
  for (Index s = 0; s < samples; ++s) {
    const Vec y = uniform_on_sphere(rng, n);
    sum += y.dot(a * y);
  }
  const double estimate = unit_sphere_area(n) * sum / static_cast<double>(samples);
  const double reference = a.trace() * sphere_constant(2, n, samples, companion_seed(seed));
  return make_check(estimate, reference);
}

Gmm quasi_interpolant(const std::function<double(const Vec&)>& u, const Vec& lower,
                      const Vec& upper, double h, double d) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw std::invalid_argument("quasi_interpolant: h must be positive");
  }
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw std::invalid_argument("quasi_interpolant: D must be positive");
  }
  if (lower.size() < 1 || lower.size() != upper.size() || !lower.allFinite() ||
      !upper.allFinite() || (upper.array() < lower.array()).any()) {
    throw std::invalid_argument("quasi_interpolant: invalid support box");
  }
  const auto n = static_cast<int>(lower.size());
  std::vector<long long> lo(static_cast<Index>(n)), count(static_cast<Index>(n));
  double total = 1.0;
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<Index>(i);
    lo[ui] = static_cast<long long>(std::ceil(lower[i] / h));
    const auto hi = static_cast<long long>(std::floor(upper[i] / h));
    count[ui] = std::max(0LL, hi - lo[ui] + 1);
    total *= static_cast<double>(count[ui]);
  }
  if (total > 1e7) throw std::invalid_argument("quasi_interpolant: lattice too large");

  const Mat sigma = std::sqrt(d) * h * Mat::Identity(n, n);
  const double cell = std::pow(h, n);
  Gmm out;
  if (total == 0.0) return out;
  std::vector<long long> m(static_cast<Index>(n), 0);
  for (;;) {
    Vec x(n);
    for (int i = 0; i < n; ++i) {
      x[i] = h * static_cast<double>(lo[static_cast<Index>(i)] + m[static_cast<Index>(i)]);
    }
    const double v = u(x);
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("quasi_interpolant: u must be finite and non-negative");
    }
    if (v > 0.0) out.push_back(GaussianComponent(v * cell, x, sigma));

    int ax = n - 1;
    while (ax >= 0 && ++m[static_cast<Index>(ax)] == count[static_cast<Index>(ax)]) {
      m[static_cast<Index>(ax)] = 0;
      --ax;
    }
    if (ax < 0) break;
  }
  return out;
}

}  // namespace gmmdecomp
