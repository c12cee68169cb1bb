// End-to-end acceptance run: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gmmdecomp/analysis.hpp"
#include "gmmdecomp/bridge.hpp"
#include "gmmdecomp/eval.hpp"
#include "gmmdecomp/greedy.hpp"
#include "gmmdecomp/linalg.hpp"
#include "gmmdecomp/optim.hpp"
#include "gmmdecomp/presets.hpp"
#include "gmmdecomp/rng.hpp"
#include "test_support.hpp"

using namespace gmmdecomp;
using gmmdecomp::testing::random_gmm;
using gmmdecomp::testing::random_spd;
using gmmdecomp::testing::rel_err;

namespace {

constexpr std::uint64_t kSeed = 3;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [violated: " << what << "]";
    }
  }
};

struct Run {
  Signal noisy;
  DecompositionResult result;
  double seconds = 0.0;
};

Run run_preset(const Gmm& truth, const Grid& grid) {
  const Signal clean = rasterize(truth, grid);
  Run r{add_white_noise(clean, noise_sigma_for_snr(clean, 20.0), kSeed), {}, 0.0};
  DecompositionConfig cfg;
  cfg.seed = kSeed;
  const auto t0 = Clock::now();
  r.result = decompose(r.noisy, cfg);
  r.seconds = seconds_since(t0);
  return r;
}

// est[perm[i]] is paired with truth[i]; minimizes the summed mean distance.
std::vector<Index> match_means(const Gmm& truth, const Gmm& est) {
  std::vector<Index> perm(est.size());
  std::iota(perm.begin(), perm.end(), Index{0});
  std::vector<Index> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (Index i = 0; i < truth.size(); ++i) cost += (truth[i].mean() - est[perm[i]].mean()).norm();
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

struct Deviation {
  double mean = 0.0;
  double weight = 0.0;
  double cov = 0.0;
};

Deviation max_deviation(const Gmm& truth, const Gmm& est, bool compare_weights = true) {
  const auto perm = match_means(truth, est);
  Deviation d;
  for (Index i = 0; i < truth.size(); ++i) {
    const auto& e = est[perm[i]];
    d.mean = std::max(d.mean, (truth[i].mean() - e.mean()).norm());
    if (compare_weights) d.weight = std::max(d.weight, std::abs(truth[i].weight() - e.weight()));
    d.cov = std::max(d.cov, (truth[i].covariance() - e.covariance()).cwiseAbs().maxCoeff());
  }
  return d;
}

void report(int id, const std::string& title, Outcome& o) {
  std::printf("[%s] %d %s:%s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(),
              o.detail.str().c_str());
  std::fflush(stdout);
}

Outcome reproduction(const Run& r, const Gmm& truth, double mean_tol, double weight_tol,
                     double cov_tol) {
  Outcome o;
  const Gmm& est = r.result.gmm;
  o.detail << " components=" << est.size() << " stop=" << to_string(r.result.stop_reason)
           << " time=" << r.seconds << "s";
  o.require(est.size() == truth.size(), "component count");
  if (est.size() == truth.size()) {
    const Deviation d = max_deviation(truth, est);
    o.detail << " max|dmean|=" << d.mean << " max|dweight|=" << d.weight
             << " max|dSigma^2|=" << d.cov;
    o.require(d.mean <= mean_tol, "means");
    o.require(d.weight <= weight_tol, "weights");
    o.require(d.cov <= cov_tol, "Sigma^2 entries");
  }
  return o;
}

// Box around the means wide enough to hold every mode.
Grid search_grid(const Gmm& g, Index per_axis) {
  const int n = g.dim();
  Vec lo = Vec::Constant(n, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  double reach = 0.0;
  for (const auto& c : g) {
    lo = lo.cwiseMin(c.mean());
    hi = hi.cwiseMax(c.mean());
    reach = std::max(reach, symmetric_eigenvalues(c.sigma()).maxCoeff());
  }
  lo.array() -= 4.0 * reach;
  hi.array() += 4.0 * reach;
  return Grid(lo, (hi - lo) / static_cast<double>(per_axis - 1),
              std::vector<Index>(static_cast<Index>(n), per_axis));
}

Index nodes_per_axis(int n) { return n == 1 ? 2001 : n == 2 ? 161 : 41; }

Vec fd_gradient(const Gmm& g, const Vec& x, double h) {
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    out[i] = (gmm_value(g, xp) - gmm_value(g, xm)) / (2.0 * h);
  }
  return out;
}

Mat fd_hessian(const Gmm& g, const Vec& x, double h) {
  Mat out(x.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    out.col(i) = (gmm_gradient(g, xp) - gmm_gradient(g, xm)) / (2.0 * h);
  }
  return out;
}

}  // namespace

int main() {
  bool all = true;
  const auto finish = [&](int id, const std::string& title, Outcome& o) {
    report(id, title, o);
    all = all && o.pass;
  };

  const Gmm exp1 = presets::experiment1();
  const Gmm exp2 = presets::experiment2();
  const Gmm exp3 = presets::experiment3();
  const Run run3 = run_preset(exp3, presets::grid_2d());
  const Run run2 = run_preset(exp2, presets::grid_2d());
  const Run run1 = run_preset(exp1, presets::grid_1d());

  {
    Outcome o = reproduction(run3, exp3, 0.10, 0.15, 0.10);
    o.require(run3.result.stop_reason == StopReason::snr_reached, "stop reason");
    o.require(run3.seconds < 120.0, "runtime");
    finish(1, "ring input: 8 components recovered", o);
  }
  {
    Outcome o = reproduction(run2, exp2, 0.10, 0.10, 0.30);
    finish(2, "legs input: 4 components recovered", o);
  }
  {
    Outcome o;
    const Gmm& est = run1.result.gmm;
    const double snr = run1.result.trace.back().snr_stop;
    o.detail << " components=" << est.size() << " snr_stop=" << snr;
    o.require(est.size() <= 6, "component count");
    o.require(snr >= 20.0, "snr_stop");
    for (double target : {-8.0, 8.0}) {
      Index best = 0;
      for (Index m = 1; m < est.size(); ++m) {
        if (std::abs(est[m].mean()[0] - target) < std::abs(est[best].mean()[0] - target)) best = m;
      }
      const double mean = est[best].mean()[0];
      const double var = est[best].covariance()(0, 0);
      o.detail << " atom(" << target << ")=" << mean << "/" << var;
      o.require(std::abs(mean - target) <= 0.2, "outer mean");
      o.require(std::abs(var - 1.0) <= 0.2, "outer variance");
    }
    finish(3, "line input: outer atoms recovered", o);
  }
  {
    Outcome o;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(kSeed);
    std::uniform_int_distribution<int> count(1, 6);
    double worst = 0.0;
    Index modes = 0, empty = 0, dropped = 0;
    for (int n = 1; n <= 3; ++n) {
      for (int t = 0; t < 200; ++t) {
        const Gmm g = random_gmm(rng, n, count(rng), 4.0, 0.3, 3.0);
        const ModeSearch s = find_modes(g, search_grid(g, nodes_per_axis(n)));
        if (s.modes.empty()) ++empty;
        dropped += s.dropped_seeds.size();
        for (const Mode& m : s.modes) {
          worst = std::max(worst, certify_bound(g, m).ratio);
          ++modes;
        }
      }
    }
    const double secs = seconds_since(t0);
    o.detail << " modes=" << modes << " max_ratio=" << worst << " dropped_seeds=" << dropped
             << " time=" << secs << "s";
    o.require(worst <= 1.0 + 1e-6, "ratio bound");
    o.require(empty == 0, "every mixture has a located mode");
    o.require(secs < 300.0, "runtime");
    finish(4, "mode distance bound on random mixtures", o);
  }
  {
    Outcome o;
    std::mt19937_64 rng(kSeed + 1);
    std::uniform_real_distribution<double> sig(0.3, 3.0);
    std::uniform_int_distribution<int> count(2, 6);
    double worst = 0.0;
    for (int n = 1; n <= 3; ++n) {
      for (int t = 0; t < 100; ++t) {
        const double s = sig(rng);
        Gmm g;
        for (const auto& c : random_gmm(rng, n, count(rng), 2.0 * s, 1.0, 1.0)) {
          g.push_back(GaussianComponent(c.weight(), c.mean(), s * Mat::Identity(n, n)));
        }
        for (const Mode& m : find_modes(g, search_grid(g, nodes_per_axis(n))).modes) {
          double nearest = std::numeric_limits<double>::infinity();
          for (const auto& c : g) nearest = std::min(nearest, (m.location - c.mean()).norm());
          worst = std::max(worst, nearest / (std::sqrt(double(n)) * s));
        }
      }
    }
    o.detail << " spherical max_ratio=" << worst;
    o.require(worst <= 1.0 + 1e-6, "spherical bound");
    double previous = 0.0;
    for (double eps : {0.1, 0.01, 0.001}) {
      const Gmm f = tightness_family(2, 1.0, 1.0, eps);
      Mode m;
      const bool ok = ascend_to_mode(f, Vec::Zero(2), 1e-12, 100, m);
      const double ratio = certify_bound(f, m).ratio;
      o.detail << " eps=" << eps << ":" << ratio;
      o.require(ok && m.location.norm() < 1e-9, "origin is a mode");
      o.require(m.max_hessian_eigenvalue < 0.0, "negative definite Hessian");
      o.require(ratio > previous, "monotone ratios");
      previous = ratio;
    }
    o.require(previous >= 0.99, "ratio at eps=0.001");
    finish(5, "spherical bound and tightness family", o);
  }
  {
    Outcome o;
    std::mt19937_64 rng(kSeed + 2);
    std::normal_distribution<double> normal;
    double worst_g = 0.0, worst_h = 0.0, worst_o = 0.0;
    for (int n = 1; n <= 3; ++n) {
      const Index per = n == 1 ? 81 : n == 2 ? 25 : 11;
      const Grid grid(Vec::Constant(n, -4.0), Vec::Constant(n, 8.0 / double(per - 1)),
                      std::vector<Index>(static_cast<Index>(n), per));
      for (int t = 0; t < 100; ++t) {
        const Gmm g = random_gmm(rng, n, 1 + t % 4, 3.0, 0.3, 3.0);
        const auto& c = g[static_cast<Index>(t) % g.size()];
        Vec z(n);
        for (int i = 0; i < n; ++i) z[i] = normal(rng);
        const Vec x = c.mean() + c.sigma() * z;
        worst_g = std::max(worst_g, rel_err(gmm_gradient(g, x), fd_gradient(g, x, 1e-5)));
        worst_h = std::max(worst_h, rel_err(gmm_hessian(g, x), fd_hessian(g, x, 1e-5)));

        const Signal d = rasterize(random_gmm(rng, n, 2, 2.0, 0.5, 1.5), grid);
        const PackedParams p = pack(random_gmm(rng, n, 2, 2.0, 0.5, 1.5), BoundsPolicy::unbounded(0.0));
        const Gmm frozen = random_gmm(rng, n, t % 2, 2.0, 0.5, 1.5);
        const auto [f, grad] = objective_grad(d, p, frozen);
        const ResidualObjective obj(d, frozen);
        Vec fd(grad.size());
        for (Eigen::Index i = 0; i < fd.size(); ++i) {
          Vec xp = p.values, xm = p.values;
          const double h = 1e-6 * std::max(1.0, std::abs(p.values[i]));
          xp[i] += h;
          xm[i] -= h;
          fd[i] = (obj.value(xp) - obj.value(xm)) / (2.0 * h);
        }
        worst_o = std::max(worst_o, rel_err(grad, fd));
      }
    }
    o.detail << " gradient=" << worst_g << " hessian=" << worst_h << " objective=" << worst_o;
    o.require(worst_g < 1e-5 && worst_h < 1e-5 && worst_o < 1e-5, "relative error");
    finish(6, "derivatives match finite differences", o);
  }
  {
    Outcome o;
    for (const Run* r : {&run3, &run2, &run1}) {
      const auto& tr = r->result.trace;
      double previous = l2_sq(r->noisy);
      for (const auto& rec : tr) {
        o.require(rec.residual_after <= previous * (1.0 + 1e-9), "non-increasing residual");
        previous = rec.residual_after;
      }
      o.detail << " iterations=" << tr.size();
    }
    finish(7, "residual norm never increases", o);
  }
  {
    Outcome o;
    const auto u = [](const Vec& x) {
      const double c = std::cos(0.5 * std::numbers::pi * x[0]);
      return std::abs(x[0]) <= 1.0 ? c * c : 0.0;
    };
    const Grid probe = make_uniform_grid(Vec::Constant(1, -2.0), Vec::Constant(1, 0.0005), {8001});
    double previous = std::numeric_limits<double>::infinity();
    for (double h : {0.4, 0.2, 0.1, 0.05}) {
      const Gmm g = quasi_interpolant(u, Vec::Constant(1, -1.0), Vec::Constant(1, 1.0), h, 2.0);
      const Vec approx = rasterize(g, probe).values();
      double err = 0.0;
      for (Index i = 0; i < probe.size(); ++i) {
        err = std::max(err, std::abs(approx[static_cast<Eigen::Index>(i)] - u(probe.point(i))));
      }
      o.detail << " h=" << h << ":" << err;
      o.require(err <= previous, "non-increasing error");
      previous = err;
    }
    finish(8, "quasi-interpolant converges in L-infinity", o);
  }
  {
    Outcome o;
    const auto t0 = Clock::now();
    const Index points = signal_to_points(run3.noisy, 100000).size();
    o.detail << " sig2pc=" << points;
    o.require(points >= 90000 && points <= 100000, "sig2pc count");

    const Gmm truth = normalize_gmm(exp3);
    const PointCloud sample = sample_gmm(truth, 100000, kSeed);
    EmConfig cfg;
    cfg.k = 8;
    cfg.restarts = 5;
    cfg.seed = kSeed;
    const EmResult em = em_fit(sample, cfg);
    const double dmean = max_deviation(truth, em.gmm, false).mean;
    o.detail << " em_max|dmean|=" << dmean;
    o.require(dmean <= 0.1, "EM means");
    bool monotone = true;
    for (const EmRun& run : em.runs) {
      for (std::size_t i = 1; i < run.history.size(); ++i) {
        monotone = monotone &&
                   run.history[i] >= run.history[i - 1] - 1e-9 * std::abs(run.history[i - 1]);
      }
    }
    o.require(monotone, "EM log-likelihood non-decreasing");
    const double n = static_cast<double>(sample.size());
    const double ll_em = em.log_likelihood / n;
    const double ll_dec = log_likelihood(sample, normalize_gmm(run3.result.gmm)) / n;
    o.detail << " ll_em=" << ll_em << " ll_decomposition=" << ll_dec
             << " time=" << seconds_since(t0) << "s";
    o.require(std::abs(ll_em - ll_dec) <= 0.05, "per-point log-likelihood gap");
    finish(9, "point-cloud bridges and EM comparison", o);
  }
  {
    Outcome o;
    DecompositionConfig cfg;
    cfg.snr_stop_target = std::numeric_limits<double>::infinity();
    // Interleaved repeats so that machine drift hits both sizes alike.
    double t4 = std::numeric_limits<double>::infinity(), t8 = t4;
    Index m8 = 0;
    int iters4 = 0, iters8 = 0;
    const auto total_iterations = [](const DecompositionResult& r) {
      int total = 0;
      for (const auto& rec : r.trace) total += rec.single_iterations + rec.joint_iterations;
      return total;
    };
    for (int rep = 0; rep < 5; ++rep) {
      cfg.max_components = 4;
      const DecompositionResult a = decompose(run3.noisy, cfg);
      cfg.max_components = 8;
      const DecompositionResult b = decompose(run3.noisy, cfg);
      t4 = std::min(t4, a.wall_time_s);
      t8 = std::min(t8, b.wall_time_s);
      m8 = b.gmm.size();
      iters4 = total_iterations(a);
      iters8 = total_iterations(b);
    }
    o.detail << " M=4:" << t4 << "s M=8:" << t8 << "s ratio=" << t8 / t4
             << " optimizer_iterations=" << iters4 << "->" << iters8;
    o.require(m8 == 8, "cap reached");
    o.require(t8 / t4 <= 5.0, "wall time ratio");
    finish(10, "doubling the component cap stays within 5x time", o);
  }

  return all ? 0 : 1;
}
