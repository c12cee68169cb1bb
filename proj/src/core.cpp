#include "gmmdecomp/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

#include "gmmdecomp/linalg.hpp"

namespace gmmdecomp {

Grid::Grid(Vec origin, Vec spacing, std::vector<Index> counts)
    : origin_(std::move(origin)), spacing_(std::move(spacing)),
      counts_(std::move(counts)) {
  const auto n = counts_.size();
  if (n == 0) throw std::invalid_argument("grid: dimension must be positive");
  if (static_cast<Index>(origin_.size()) != n ||
      static_cast<Index>(spacing_.size()) != n) {
    throw std::invalid_argument("grid: origin/spacing/counts length mismatch");
  }
  for (Index i = 0; i < n; ++i) {
    const auto ei = static_cast<Eigen::Index>(i);
    if (!(spacing_[ei] > 0.0) || !std::isfinite(spacing_[ei])) {
      throw std::invalid_argument("grid: spacing must be positive on axis " +
                                  std::to_string(i));
    }
    if (!std::isfinite(origin_[ei])) {
      throw std::invalid_argument("grid: origin must be finite");
    }
    if (counts_[i] == 0) {
      throw std::invalid_argument("grid: count must be positive on axis " +
                                  std::to_string(i));
    }
  }
  strides_.assign(n, 1);
  for (Index i = n - 1; i > 0; --i) strides_[i - 1] = strides_[i] * counts_[i];
  size_ = strides_[0] * counts_[0];
}

std::vector<Index> Grid::multi_index(Index flat) const {
  if (flat >= size_) throw std::out_of_range("grid: flat index out of range");
  std::vector<Index> m(counts_.size());
  for (Index a = 0; a < counts_.size(); ++a) {
    m[a] = flat / strides_[a];
    flat %= strides_[a];
  }
  return m;
}

Index Grid::flat_index(std::span<const Index> multi) const {
  if (multi.size() != counts_.size()) {
    throw std::invalid_argument("grid: multi-index has wrong length");
  }
  Index flat = 0;
  for (Index a = 0; a < counts_.size(); ++a) {
    if (multi[a] >= counts_[a]) {
      throw std::out_of_range("grid: multi-index out of range");
    }
    flat += multi[a] * strides_[a];
  }
  return flat;
}

Vec Grid::point(Index flat) const {
  const auto m = multi_index(flat);
  Vec p(dim());
  for (int a = 0; a < dim(); ++a) p[a] = coordinate(a, m[static_cast<Index>(a)]);
  return p;
}

Mat Grid::points() const {
  Mat p(dim(), static_cast<Eigen::Index>(size_));
  for (Index flat = 0; flat < size_; ++flat) {
    Index rem = flat;
    for (int a = 0; a < dim(); ++a) {
      const Index i = rem / strides_[static_cast<Index>(a)];
      rem %= strides_[static_cast<Index>(a)];
      p(a, static_cast<Eigen::Index>(flat)) = coordinate(a, i);
    }
  }
  return p;
}

Vec Grid::upper() const {
  Vec u(dim());
  for (int a = 0; a < dim(); ++a) {
    u[a] = coordinate(a, counts_[static_cast<Index>(a)] - 1);
  }
  return u;
}

bool Grid::same_lattice(const Grid& other) const {
  return counts_ == other.counts_ && origin_ == other.origin_ &&
         spacing_ == other.spacing_;
}

Grid make_uniform_grid(const Vec& origin, const Vec& spacing,
                       const std::vector<Index>& counts) {
  return Grid(origin, spacing, counts);
}

Signal::Signal(Grid grid, Vec values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (static_cast<Index>(values_.size()) != grid_.size()) {
    throw std::invalid_argument("signal: value count " +
                                std::to_string(values_.size()) +
                                " does not match grid size " +
                                std::to_string(grid_.size()));
  }
  if (!values_.allFinite()) {
    throw std::invalid_argument("signal: values must be finite");
  }
}

Signal Signal::zeros(const Grid& grid) {
  return Signal(grid, Vec::Zero(static_cast<Eigen::Index>(grid.size())));
}

GaussianComponent::GaussianComponent(double weight, Vec mean, Mat sigma)
    : weight_(weight), mean_(std::move(mean)), sigma_(std::move(sigma)) {
  if (!(weight_ >= 0.0) || !std::isfinite(weight_)) {
    throw std::invalid_argument("component: weight must be finite and >= 0");
  }
  const auto n = mean_.size();
  if (n == 0) throw std::invalid_argument("component: empty mean");
  if (!mean_.allFinite()) throw std::invalid_argument("component: non-finite mean");
  if (sigma_.rows() != n || sigma_.cols() != n) {
    throw std::invalid_argument("component: sigma must be n x n");
  }
  if (!sigma_.allFinite() || !is_symmetric(sigma_, 1e-12)) {
    throw std::invalid_argument("component: sigma must be symmetric");
  }
  // Exact symmetrization after the tolerance check keeps downstream
  // eigen/cholesky routines on a truly symmetric matrix.
  sigma_ = 0.5 * (sigma_ + sigma_.transpose()).eval();
  if (!(symmetric_eigenvalues(sigma_).minCoeff() > 0.0)) {
    throw std::invalid_argument("component: sigma must be positive definite");
  }
}

GaussianComponent GaussianComponent::from_covariance(double weight, Vec mean,
                                                     const Mat& covariance) {
  if (covariance.rows() != covariance.cols() ||
      covariance.rows() != mean.size()) {
    throw std::invalid_argument("component: covariance must be n x n");
  }
  if (!is_symmetric(covariance, 1e-12)) {
    throw std::invalid_argument("component: covariance must be symmetric");
  }
  return GaussianComponent(weight, std::move(mean), symmetric_sqrt(covariance));
}

GaussianComponent GaussianComponent::with_weight(double weight) const {
  GaussianComponent c = *this;
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw std::invalid_argument("component: weight must be finite and >= 0");
  }
  c.weight_ = weight;
  return c;
}

Gmm::Gmm(std::vector<GaussianComponent> c) : components(std::move(c)) {
  for (const auto& comp : components) {
    if (comp.dim() != components.front().dim()) {
      throw std::invalid_argument("gmm: components of mixed dimension");
    }
  }
}

double Gmm::total_weight() const {
  double s = 0.0;
  for (const auto& c : components) s += c.weight();
  return s;
}

void Gmm::push_back(GaussianComponent c) {
  if (!empty() && c.dim() != dim()) {
    throw std::invalid_argument("gmm: component dimension mismatch");
  }
  components.push_back(std::move(c));
}

PointCloud::PointCloud(int dim, Mat points) : dim_(dim), points_(std::move(points)) {
  if (dim_ <= 0) throw std::invalid_argument("point cloud: dimension must be positive");
  if (points_.rows() != dim_) {
    throw std::invalid_argument("point cloud: row count must equal dimension");
  }
  if (!points_.allFinite()) {
    throw std::invalid_argument("point cloud: coordinates must be finite");
  }
}

namespace {

// Exact k-nearest search restricted to an index window that grows until the
// k-th distance is certified smaller than anything outside the window.
// `offset(axis, i)` returns the signed coordinate difference of lattice
// index i from the query along `axis`; `center(axis)` is the query's
// fractional index.
std::vector<Index> windowed_k_nearest(
    const Grid& grid, Index k,
    const std::function<double(int, Index)>& offset,
    const std::function<double(int)>& center) {
  if (k == 0 || k > grid.size()) {
    throw std::invalid_argument("k_nearest: k must be in [1, grid size], got " +
                                std::to_string(k));
  }
  const int n = grid.dim();
  const double hmax = grid.spacing().maxCoeff();
  double radius =
      hmax * (std::ceil(std::pow(static_cast<double>(k), 1.0 / n)) * 0.5 + 1.0);

  std::vector<std::pair<double, Index>> cand;
  std::vector<Index> lo(static_cast<Index>(n)), hi(static_cast<Index>(n)),
      cur(static_cast<Index>(n));
  for (;;) {
    bool covers_all = true;
    for (int a = 0; a < n; ++a) {
      const auto ua = static_cast<Index>(a);
      const double c = center(a);
      const double w = radius / grid.spacing()[a];
      const double lo_f = std::floor(c - w) - 1.0;
      const double hi_f = std::ceil(c + w) + 1.0;
      const double last = static_cast<double>(grid.counts()[ua] - 1);
      lo[ua] = lo_f <= 0.0 ? 0 : static_cast<Index>(std::min(lo_f, last));
      hi[ua] = hi_f >= last ? grid.counts()[ua] - 1
                            : static_cast<Index>(std::max(hi_f, 0.0));
      if (lo[ua] != 0 || hi[ua] != grid.counts()[ua] - 1) covers_all = false;
    }

    cand.clear();
    cur = lo;
    for (;;) {
      double d2 = 0.0;
      Index flat = 0;
      for (int a = 0; a < n; ++a) {
        const double o = offset(a, cur[static_cast<Index>(a)]);
        d2 += o * o;
        flat += cur[static_cast<Index>(a)] * grid.stride(a);
      }
      cand.emplace_back(d2, flat);
      int a = n - 1;
      while (a >= 0 && cur[static_cast<Index>(a)] == hi[static_cast<Index>(a)]) {
        cur[static_cast<Index>(a)] = lo[static_cast<Index>(a)];
        --a;
      }
      if (a < 0) break;
      ++cur[static_cast<Index>(a)];
    }

    if (cand.size() >= k) {
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k),
                        cand.end());
      if (covers_all || cand[k - 1].first < radius * radius) {
        std::vector<Index> out(k);
        for (Index i = 0; i < k; ++i) out[i] = cand[i].second;
        return out;
      }
    } else if (covers_all) {
      throw std::logic_error("k_nearest: window covers grid but too few nodes");
    }
    radius *= 2.0;
  }
}

}  // namespace

std::vector<Index> k_nearest(const Grid& grid, const Vec& y, Index k) {
  if (y.size() != grid.dim()) {
    throw std::invalid_argument("k_nearest: query dimension mismatch");
  }
  if (!y.allFinite()) throw std::invalid_argument("k_nearest: non-finite query");
  return windowed_k_nearest(
      grid, k,
      [&](int a, Index i) { return grid.coordinate(a, i) - y[a]; },
      [&](int a) { return (y[a] - grid.origin()[a]) / grid.spacing()[a]; });
}

std::vector<Index> k_nearest_node(const Grid& grid, Index node, Index k) {
  const auto m = grid.multi_index(node);
  return windowed_k_nearest(
      grid, k,
      [&](int a, Index i) {
        const auto di = static_cast<double>(static_cast<long long>(i) -
                                            static_cast<long long>(m[static_cast<Index>(a)]));
        return di * grid.spacing()[a];
      },
      [&](int a) { return static_cast<double>(m[static_cast<Index>(a)]); });
}

}  // namespace gmmdecomp
