#include "gmmdecomp/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "gmmdecomp/linalg.hpp"
#include "gmmdecomp/rng.hpp"

namespace gmmdecomp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Neumaier summation; log-likelihoods of 1e5 points are compared at 1e-9.
class CompensatedSum {
 public:
  void add(double v) {
    if (!std::isfinite(v) || !std::isfinite(sum_)) {
      sum_ += v;  // the correction term would turn inf - inf into NaN
      return;
    }
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return std::isfinite(sum_) ? sum_ + comp_ : sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct Component {
  double weight;
  Vec mean;
  Mat cov;
};

// log(weight) + log N(p | mean, cov) for every column of `pts`.
Eigen::ArrayXd log_weighted_density(const Mat& pts, double weight, const Vec& mean,
                                    const Mat& cov) {
  const Mat chol = lower_cholesky(cov);
  const auto n = static_cast<double>(mean.size());
  const double log_norm = std::log(weight) - 0.5 * n * std::log(2.0 * std::numbers::pi) -
                          chol.diagonal().array().log().sum();
  const Mat z = chol.triangularView<Eigen::Lower>().solve(pts.colwise() - mean);
  return log_norm - 0.5 * z.colwise().squaredNorm().transpose().array();
}

// Fills `logp` (N x k) with log(a_m g_m(p)), then overwrites it with the
// responsibilities and `lse` with the per-point log-sum-exp. Returns the
// compensated log-likelihood.
double e_step(const Mat& pts, const std::vector<Component>& comps, Mat& logp,
              Eigen::ArrayXd& lse) {
  logp.resize(pts.cols(), static_cast<Eigen::Index>(comps.size()));
  for (Index m = 0; m < comps.size(); ++m) {
    logp.col(static_cast<Eigen::Index>(m)) =
        log_weighted_density(pts, comps[m].weight, comps[m].mean, comps[m].cov).matrix();
  }
  const Eigen::ArrayXd top = logp.rowwise().maxCoeff().array();
  const Vec shift = (top == kNegInf).select(0.0, top).matrix();
  logp.colwise() -= shift;
  logp = logp.array().exp().matrix();
  const Eigen::ArrayXd sums = logp.rowwise().sum().array();
  lse = shift.array() + sums.log();
  const Vec inv = (sums > 0.0).select(1.0 / sums, 0.0).matrix();
  logp = inv.asDiagonal() * logp;
  CompensatedSum total;
  for (Eigen::Index p = 0; p < lse.size(); ++p) total.add(lse[p]);
  return total.value();
}

// Responsibility-weighted mean and covariance in one pass per moment.
void weighted_moments(const Mat& pts, const Eigen::Ref<const Vec>& resp,
                      double mass, Vec& mean, Mat& cov) {
  mean = pts * resp / mass;
  const auto n = pts.rows();
  cov.setZero(n, n);
  Vec dz(n);
  for (Eigen::Index p = 0; p < pts.cols(); ++p) {
    const double r = resp[p];
    if (r == 0.0) continue;
    dz = pts.col(p) - mean;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) cov(i, j) += r * dz[i] * dz[j];
    }
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= mass;
}

Mat floor_eigenvalues(const Mat& cov, double floor) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (cov + cov.transpose()));
  const Vec ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Index random_index(NormalStream& rng, Index n) {
  return std::min(n - 1, static_cast<Index>(rng.uniform() * static_cast<double>(n)));
}

EmRun run_em(const Mat& pts, const EmConfig& cfg, const Mat& sample_cov, double floor,
             std::uint64_t seed) {
  const auto count = static_cast<Index>(pts.cols());
  const Index k = cfg.k;
  NormalStream rng(seed);

  // Distinct data indices via a partial Fisher-Yates shuffle.
  std::vector<Index> order(count);
  for (Index i = 0; i < count; ++i) order[i] = i;
  std::vector<Component> comps;
  for (Index m = 0; m < k; ++m) {
    std::swap(order[m], order[m + random_index(rng, count - m)]);
    comps.push_back({1.0 / static_cast<double>(k),
                     pts.col(static_cast<Eigen::Index>(order[m])), sample_cov});
  }

  EmRun run;
  Mat logp;
  Eigen::ArrayXd lse;
  const double per_point_tol = cfg.tol * static_cast<double>(count);
  for (int it = 0;; ++it) {
    const double ll = e_step(pts, comps, logp, lse);
    run.history.push_back(ll);
    const auto h = run.history.size();
    if (h > 1 && std::abs(ll - run.history[h - 2]) <= per_point_tol) break;
    if (it >= cfg.max_iter) break;

    for (Index m = 0; m < k; ++m) {
      const auto row = static_cast<Eigen::Index>(m);
      const double mass = logp.col(row).sum();
      if (!(mass > 0.0)) {
        comps[m].mean = pts.col(static_cast<Eigen::Index>(random_index(rng, count)));
        comps[m].cov = sample_cov;
        comps[m].weight = 1.0 / static_cast<double>(k);
        ++run.reseeds;
        continue;
      }
      comps[m].weight = mass / static_cast<double>(count);
      Mat cov;
      weighted_moments(pts, logp.col(row), mass, comps[m].mean, cov);
      comps[m].cov = floor_eigenvalues(cov, floor);
    }
    double wsum = 0.0;
    for (const auto& c : comps) wsum += c.weight;
    for (auto& c : comps) c.weight /= wsum;
  }

  for (const auto& c : comps) {
    run.gmm.push_back(GaussianComponent::from_covariance(c.weight, c.mean, c.cov));
  }
  return run;
}

}  // namespace

Histogram histogram(const PointCloud& points, const Grid& grid) {
  if (points.dim() != grid.dim()) {
    throw std::invalid_argument("histogram: point and grid dimensions differ");
  }
  const Vec lo = grid.lower() - 0.5 * grid.spacing();
  const Vec hi = grid.upper() + 0.5 * grid.spacing();
  Vec counts = Vec::Zero(static_cast<Eigen::Index>(grid.size()));
  Histogram out{Signal::zeros(grid), 0};
  for (Index i = 0; i < points.size(); ++i) {
    const Vec p = points.point(i);
    if ((p.array() < lo.array()).any() || (p.array() > hi.array()).any()) {
      ++out.dropped;
      continue;
    }
    counts[static_cast<Eigen::Index>(k_nearest(grid, p, 1).front())] += 1.0;
  }
  out.counts = Signal(grid, std::move(counts));
  return out;
}

PointCloud signal_to_points(const Signal& d, Index target_count) {
  if (target_count == 0) {
    throw std::invalid_argument("signal_to_points: target count must be positive");
  }
  const Vec mass = d.values().cwiseMax(0.0);
  const double total = mass.sum();
  if (!(total > 0.0)) {
    throw std::domain_error("signal_to_points: signal has no positive mass");
  }
  const double c = static_cast<double>(target_count) / total;
  std::vector<Index> copies(d.size());
  Index emitted = 0;
  for (Index i = 0; i < d.size(); ++i) {
    copies[i] = static_cast<Index>(std::floor(c * mass[static_cast<Eigen::Index>(i)]));
    emitted += copies[i];
  }
  const Grid& grid = d.grid();
  Mat pts(grid.dim(), static_cast<Eigen::Index>(emitted));
  Eigen::Index col = 0;
  for (Index i = 0; i < d.size(); ++i) {
    if (copies[i] == 0) continue;
    const Vec node = grid.point(i);
    for (Index j = 0; j < copies[i]; ++j) pts.col(col++) = node;
  }
  return PointCloud(grid.dim(), std::move(pts));
}

PointCloud sample_gmm(const Gmm& gmm, Index count, std::uint64_t seed) {
  const Gmm g = normalize_gmm(gmm);
  const int n = g.dim();
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& c : g) cumulative.push_back(acc += c.weight());

  NormalStream rng(seed);
  Mat pts(n, static_cast<Eigen::Index>(count));
  Vec z(n);
  for (Eigen::Index s = 0; s < pts.cols(); ++s) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto m = std::min<Index>(static_cast<Index>(it - cumulative.begin()), g.size() - 1);
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    pts.col(s) = g[m].mean() + g[m].sigma() * z;
  }
  return PointCloud(n, std::move(pts));
}

Gmm normalize_gmm(const Gmm& gmm) {
  const double total = gmm.total_weight();
  if (!(total > 0.0)) throw std::domain_error("normalize_gmm: zero total weight");
  Gmm out;
  for (const auto& c : gmm) out.push_back(c.with_weight(c.weight() / total));
  return out;
}

double log_likelihood(const PointCloud& points, const Gmm& gmm) {
  if (gmm.empty()) throw std::invalid_argument("log_likelihood: empty mixture");
  if (gmm.dim() != points.dim()) {
    throw std::invalid_argument("log_likelihood: dimension mismatch");
  }
  if (std::abs(gmm.total_weight() - 1.0) > 1e-9) {
    throw std::invalid_argument("log_likelihood: mixture is not normalized");
  }
  std::vector<Component> comps;
  for (const auto& c : gmm) comps.push_back({c.weight(), c.mean(), c.covariance()});
  Mat logp;
  Eigen::ArrayXd lse;
  return e_step(points.points(), comps, logp, lse);
}

void EmConfig::validate() const {
  if (k < 1) throw std::invalid_argument("em: k must be at least 1");
  if (max_iter < 0) throw std::invalid_argument("em: max_iter must be non-negative");
  if (!(tol >= 0.0)) throw std::invalid_argument("em: tolerance must be non-negative");
  if (cov_floor && !(*cov_floor > 0.0)) {
    throw std::invalid_argument("em: covariance floor must be positive");
  }
  if (restarts < 1) throw std::invalid_argument("em: restarts must be at least 1");
}

EmResult em_fit(const PointCloud& points, const EmConfig& config) {
  config.validate();
  if (points.size() < config.k) {
    throw std::invalid_argument("em: need at least k = " + std::to_string(config.k) +
                                " points, got " + std::to_string(points.size()));
  }
  const Mat& pts = points.points();
  const double extent =
      (pts.rowwise().maxCoeff() - pts.rowwise().minCoeff()).maxCoeff();
  const double floor =
      config.cov_floor ? *config.cov_floor : 1e-6 * std::max(extent * extent, 1e-300);

  const Vec mean = pts.rowwise().mean();
  const Mat centred = pts.colwise() - mean;
  const Mat sample_cov = floor_eigenvalues(
      centred * centred.transpose() / static_cast<double>(pts.cols()), floor);

  EmResult out;
  NormalStream seeds(config.seed);
  out.log_likelihood = kNegInf;
  for (int r = 0; r < config.restarts; ++r) {
    out.runs.push_back(run_em(pts, config, sample_cov, floor, seeds.raw()));
    const double ll = out.runs.back().history.back();
    if (r == 0 || ll > out.log_likelihood) {
      out.log_likelihood = ll;
      out.best_restart = static_cast<Index>(r);
    }
  }
  out.gmm = out.runs[out.best_restart].gmm;
  return out;
}

}  // namespace gmmdecomp
