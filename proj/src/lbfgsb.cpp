// Limited-memory BFGS with simple bounds, following the compact-matrix
// formulation of Byrd, Lu, Nocedal and Zhu (1995): B = theta I - W M W^T.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gmmdecomp/optim.hpp"

namespace gmmdecomp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

Vec project(const Vec& x, const Vec& lo, const Vec& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

double projected_gradient_norm(const Vec& x, const Vec& g, const Vec& lo,
                               const Vec& hi) {
  return (project(x - g, lo, hi) - x).lpNorm<Eigen::Infinity>();
}

class CorrectionMemory {
 public:
  explicit CorrectionMemory(int capacity) : capacity_(capacity) {}

  bool empty() const { return s_.empty(); }
  double theta() const { return theta_; }
  const Mat& w() const { return w_; }
  const Mat& m() const { return m_; }

  void clear() {
    s_.clear();
    y_.clear();
    theta_ = 1.0;
    w_.resize(0, 0);
    m_.resize(0, 0);
  }

  // Returns false when the pair is skipped (insufficient curvature).
  bool push(const Vec& s, const Vec& y) {
    const double sy = s.dot(y);
    const double yy = y.squaredNorm();
    if (!(sy > kEps * yy) || !(yy > 0.0)) return false;
    s_.push_back(s);
    y_.push_back(y);
    if (static_cast<int>(s_.size()) > capacity_) {
      s_.pop_front();
      y_.pop_front();
    }
    theta_ = yy / sy;
    if (!rebuild()) {
      clear();
      return false;
    }
    return true;
  }

 private:
  bool rebuild() {
    const auto k = static_cast<Eigen::Index>(s_.size());
    const auto n = s_.front().size();
    Mat s(n, k), y(n, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      s.col(i) = s_[static_cast<std::size_t>(i)];
      y.col(i) = y_[static_cast<std::size_t>(i)];
    }
    w_.resize(n, 2 * k);
    w_.leftCols(k) = y;
    w_.rightCols(k) = theta_ * s;

    const Mat sy = s.transpose() * y;
    Mat middle = Mat::Zero(2 * k, 2 * k);
    for (Eigen::Index i = 0; i < k; ++i) {
      middle(i, i) = -sy(i, i);
      for (Eigen::Index j = 0; j < i; ++j) {
        // L_ij = s_i^T y_j for i > j
        middle(k + i, j) = sy(i, j);
        middle(j, k + i) = sy(i, j);
      }
    }
    middle.bottomRightCorner(k, k) = theta_ * (s.transpose() * s);
    Eigen::FullPivLU<Mat> lu(middle);
    if (!lu.isInvertible()) return false;
    m_ = lu.inverse();
    return m_.allFinite();
  }

  int capacity_;
  std::deque<Vec> s_, y_;
  double theta_ = 1.0;
  Mat w_;
  Mat m_;
};

struct CauchyResult {
  Vec xc;
  Vec c;  // W^T (xc - x), accumulated
};

// Generalized Cauchy point: first local minimizer of the quadratic model
// along the projected steepest-descent path.
CauchyResult cauchy_point(const Vec& x, const Vec& g, const Vec& lo,
                          const Vec& hi, const CorrectionMemory& mem) {
  const auto n = x.size();
  const double theta = mem.theta();
  const Mat& w = mem.w();
  const Mat& m = mem.m();
  const auto k2 = w.cols();

  Vec t(n), d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (g[i] < 0.0) {
      t[i] = hi[i] == kInf ? kInf : (x[i] - hi[i]) / g[i];
    } else if (g[i] > 0.0) {
      t[i] = lo[i] == -kInf ? kInf : (x[i] - lo[i]) / g[i];
    } else {
      t[i] = kInf;
    }
    d[i] = t[i] <= 0.0 ? 0.0 : -g[i];
    if (t[i] < 0.0) t[i] = 0.0;
  }

  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t[i] > 0.0 && t[i] < kInf) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return t[a] < t[b] || (t[a] == t[b] && a < b);
  });

  CauchyResult out{x, Vec::Zero(k2)};
  Vec p = k2 > 0 ? Vec(w.transpose() * d) : Vec();
  double fp = -d.squaredNorm();
  if (fp >= 0.0) return out;  // d == 0: x is already the Cauchy point
  double fpp = -theta * fp;
  if (k2 > 0) fpp -= p.dot(m * p);
  const double fpp_org = fpp;
  fpp = std::max(fpp, kEps * std::abs(fpp_org));
  double dt_min = -fp / fpp;
  double t_old = 0.0;

  Index free_left = 0;
  for (Eigen::Index i = 0; i < n; ++i) free_left += d[i] != 0.0 ? 1 : 0;

  std::size_t next = 0;
  while (next < order.size()) {
    const Eigen::Index b = order[next];
    const double dt = t[b] - t_old;
    if (dt_min < dt) break;
    ++next;

    const double gb = g[b];
    out.xc[b] = d[b] > 0.0 ? hi[b] : lo[b];
    const double zb = out.xc[b] - x[b];
    if (k2 > 0) out.c += dt * p;
    fp += dt * fpp + gb * gb + theta * gb * zb;
    fpp -= theta * gb * gb;
    if (k2 > 0) {
      const Vec wb = w.row(b).transpose();
      const Vec mc = m * out.c;
      const Vec mp = m * p;
      fp -= gb * wb.dot(mc);
      fpp -= 2.0 * gb * wb.dot(mp) + gb * gb * wb.dot(m * wb);
      p += gb * wb;
    }
    d[b] = 0.0;
    --free_left;
    t_old = t[b];
    if (free_left == 0) {
      dt_min = 0.0;
      break;
    }
    fpp = std::max(fpp, kEps * std::abs(fpp_org));
    dt_min = -fp / fpp;
  }

  dt_min = std::max(dt_min, 0.0);
  t_old += dt_min;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d[i] != 0.0) out.xc[i] = x[i] + t_old * d[i];
  }
  out.xc = project(out.xc, lo, hi);
  if (k2 > 0) out.c += dt_min * p;
  return out;
}

// Direct primal subspace minimization over the variables free at the
// Cauchy point, truncated to stay inside the box.
Vec subspace_minimum(const Vec& x, const Vec& g, const Vec& lo, const Vec& hi,
                     const CauchyResult& cp, const CorrectionMemory& mem) {
  const auto n = x.size();
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (cp.xc[i] > lo[i] && cp.xc[i] < hi[i]) free.push_back(i);
  }
  if (free.empty()) return cp.xc;

  const double theta = mem.theta();
  const auto nf = static_cast<Eigen::Index>(free.size());
  Vec rhat(nf);
  const Vec wmc = mem.empty() ? Vec::Zero(n) : Vec(mem.w() * (mem.m() * cp.c));
  for (Eigen::Index j = 0; j < nf; ++j) {
    const auto i = free[static_cast<std::size_t>(j)];
    rhat[j] = g[i] + theta * (cp.xc[i] - x[i]) - wmc[i];
  }

  Vec du = -rhat / theta;
  if (!mem.empty()) {
    const auto k2 = mem.w().cols();
    Mat wf(nf, k2);
    for (Eigen::Index j = 0; j < nf; ++j) wf.row(j) = mem.w().row(free[static_cast<std::size_t>(j)]);
    Vec v = mem.m() * (wf.transpose() * rhat);
    const Mat nmat = Mat::Identity(k2, k2) - (mem.m() * (wf.transpose() * wf)) / theta;
    v = nmat.fullPivLu().solve(v);
    du -= (wf * v) / (theta * theta);
  }
  if (!du.allFinite()) return cp.xc;

  double alpha = 1.0;
  for (Eigen::Index j = 0; j < nf; ++j) {
    const auto i = free[static_cast<std::size_t>(j)];
    if (du[j] > 0.0 && hi[i] < kInf) {
      alpha = std::min(alpha, (hi[i] - cp.xc[i]) / du[j]);
    } else if (du[j] < 0.0 && lo[i] > -kInf) {
      alpha = std::min(alpha, (lo[i] - cp.xc[i]) / du[j]);
    }
  }
  alpha = std::max(alpha, 0.0);
  Vec xbar = cp.xc;
  for (Eigen::Index j = 0; j < nf; ++j) {
    const auto i = free[static_cast<std::size_t>(j)];
    xbar[i] += alpha * du[j];
  }
  return project(xbar, lo, hi);
}

double max_feasible_step(const Vec& x, const Vec& d, const Vec& lo, const Vec& hi) {
  double step = 1e10;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (d[i] > 0.0 && hi[i] < kInf) {
      step = std::min(step, (hi[i] - x[i]) / d[i]);
    } else if (d[i] < 0.0 && lo[i] > -kInf) {
      step = std::min(step, (lo[i] - x[i]) / d[i]);
    }
  }
  return std::max(step, 0.0);
}

struct Trial {
  double step = 0.0;
  double f = 0.0;
  double slope = 0.0;
  Vec x;
  Vec g;
};

class LineSearch {
 public:
  LineSearch(const ObjectiveFn& fn, const Vec& x, const Vec& d, const Vec& lo,
             const Vec& hi, double f0, double slope0, int max_evals, int& eval_counter)
      : fn_(fn), x_(x), d_(d), lo_(lo), hi_(hi), f0_(f0), slope0_(slope0),
        max_evals_(max_evals), evals_(eval_counter) {}

  // Strong Wolfe search on [0, step_max]. Returns the accepted trial, or
  // nullopt-equivalent (step == 0) when no sufficient decrease was found.
  Trial run(double step0, double step_max) {
    Trial prev{0.0, f0_, slope0_, x_, Vec()};
    double step = std::min(step0, step_max);
    for (int it = 0; it < max_evals_; ++it) {
      Trial cur = evaluate(step);
      if (!std::isfinite(cur.f) || cur.f > f0_ + kC1 * step * slope0_ ||
          (it > 0 && cur.f >= prev.f)) {
        return zoom(prev, cur);
      }
      remember(cur);
      if (std::abs(cur.slope) <= -kC2 * slope0_) return cur;
      if (cur.slope >= 0.0) return zoom(cur, prev);
      if (step >= step_max) return cur;
      prev = std::move(cur);
      step = std::min(4.0 * step, step_max);
    }
    return best_;
  }

 private:
  static constexpr double kC1 = 1e-4;
  static constexpr double kC2 = 0.9;

  Trial evaluate(double step) {
    Trial t;
    t.step = step;
    t.x = project(x_ + step * d_, lo_, hi_);
    t.g.resize(x_.size());
    t.f = fn_(t.x, t.g);
    t.slope = t.g.dot(d_);
    ++evals_;
    ++used_;
    return t;
  }

  void remember(const Trial& t) {
    if (t.step > 0.0 && std::isfinite(t.f) && t.f < f0_ + kC1 * t.step * slope0_ &&
        (best_.step == 0.0 || t.f < best_.f)) {
      best_ = t;
    }
  }

  // Invariant: lo satisfies sufficient decrease and has the lower value.
  Trial zoom(Trial lo, Trial hi) {
    while (used_ < max_evals_) {
      const double a = lo.step, b = hi.step;
      double step = cubic_min(lo, hi);
      const double span = std::abs(b - a);
      const double left = std::min(a, b), right = std::max(a, b);
      if (!std::isfinite(step) || step < left + 0.1 * span || step > right - 0.1 * span) {
        step = 0.5 * (a + b);
      }
      if (span <= kEps * std::max(1.0, right)) break;
      Trial cur = evaluate(step);
      if (!std::isfinite(cur.f) || cur.f > f0_ + kC1 * step * slope0_ || cur.f >= lo.f) {
        hi = std::move(cur);
      } else {
        remember(cur);
        if (std::abs(cur.slope) <= -kC2 * slope0_) return cur;
        if (cur.slope * (hi.step - lo.step) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    return best_;
  }

  static double cubic_min(const Trial& p, const Trial& q) {
    if (!std::isfinite(q.f) || !std::isfinite(q.slope)) return 0.5 * (p.step + q.step);
    const double d1 = p.slope + q.slope - 3.0 * (p.f - q.f) / (p.step - q.step);
    const double disc = d1 * d1 - p.slope * q.slope;
    if (disc < 0.0) return 0.5 * (p.step + q.step);
    const double sgn = q.step > p.step ? 1.0 : -1.0;
    const double d2 = sgn * std::sqrt(disc);
    return q.step - (q.step - p.step) * (q.slope + d2 - d1) / (q.slope - p.slope + 2.0 * d2);
  }

  const ObjectiveFn& fn_;
  const Vec& x_;
  const Vec& d_;
  const Vec& lo_;
  const Vec& hi_;
  double f0_;
  double slope0_;
  int max_evals_;
  int& evals_;
  int used_ = 0;
  Trial best_;
};

}  // namespace

BoxSolution minimize_box(const ObjectiveFn& fn, const Vec& x0, const Vec& lower,
                         const Vec& upper, const OptimizerSettings& settings) {
  const auto n = x0.size();
  if (lower.size() != n || upper.size() != n) {
    throw std::invalid_argument("minimize_box: bound vectors have the wrong length");
  }
  if ((lower.array() > upper.array()).any()) {
    throw std::invalid_argument("minimize_box: lower bound exceeds upper bound");
  }
  if (settings.memory < 1 || settings.max_iter < 0) {
    throw std::invalid_argument("minimize_box: invalid settings");
  }

  BoxSolution sol;
  SolveReport& rep = sol.report;
  Vec x = project(x0, lower, upper);
  Vec g(n);
  double f = fn(x, g);
  rep.evaluations = 1;
  rep.initial_objective = f;
  rep.history.push_back(f);
  if (!std::isfinite(f) || !g.allFinite()) {
    throw std::domain_error("minimize_box: objective is not finite at the start point");
  }

  CorrectionMemory mem(settings.memory);
  rep.status = SolveStatus::max_iter;
  double pg = projected_gradient_norm(x, g, lower, upper);

  if (n == 0 || pg < settings.gtol) {
    rep.status = SolveStatus::converged;
  } else {
    while (rep.iterations < settings.max_iter) {
      Vec d;
      double slope = 0.0;
      for (int attempt = 0; attempt < 2; ++attempt) {
        const CauchyResult cp = cauchy_point(x, g, lower, upper, mem);
        const Vec xbar = subspace_minimum(x, g, lower, upper, cp, mem);
        d = xbar - x;
        slope = g.dot(d);
        if (slope < 0.0 || mem.empty()) break;
        mem.clear();
      }
      if (!(slope < 0.0)) {
        // No descent direction exists within the box at working precision.
        rep.status = pg < settings.gtol ? SolveStatus::converged
                                        : SolveStatus::line_search_failure;
        break;
      }

      const double step_max = max_feasible_step(x, d, lower, upper);
      const double step0 = mem.empty() ? std::min(1.0 / d.norm(), step_max)
                                       : std::min(1.0, step_max);
      LineSearch ls(fn, x, d, lower, upper, f, slope, settings.max_line_search,
                    rep.evaluations);
      Trial acc = ls.run(step0, step_max);
      if (acc.step == 0.0) {
        if (!mem.empty()) {
          mem.clear();
          continue;
        }
        rep.status = SolveStatus::line_search_failure;
        break;
      }

      ++rep.iterations;
      const double f_old = f;
      mem.push(acc.x - x, acc.g - g);
      x = std::move(acc.x);
      g = std::move(acc.g);
      f = acc.f;
      rep.history.push_back(f);
      pg = projected_gradient_norm(x, g, lower, upper);
      if (pg < settings.gtol) {
        rep.status = SolveStatus::converged;
        break;
      }
      if (f_old - f <= settings.ftol * std::max({1.0, std::abs(f_old), std::abs(f)})) {
        rep.status = SolveStatus::converged;
        break;
      }
    }
  }

  rep.final_objective = f;
  rep.projected_gradient_norm = pg;
  sol.x = std::move(x);
  return sol;
}

std::pair<PackedParams, SolveReport> minimize_box(const ObjectiveFn& f,
                                                  const PackedParams& p0,
                                                  const OptimizerSettings& settings) {
  BoxSolution s = minimize_box(f, p0.values, p0.lower, p0.upper, settings);
  PackedParams out = p0;
  out.values = std::move(s.x);
  return {std::move(out), std::move(s.report)};
}

}  // namespace gmmdecomp
