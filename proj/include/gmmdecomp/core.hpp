#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace gmmdecomp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = std::size_t;

/// Axis-aligned uniform lattice. Node (i_1, ..., i_n) sits at
/// origin + i * spacing (elementwise). Flat indices are row-major with
/// axis 0 slowest.
class Grid {
 public:
  Grid(Vec origin, Vec spacing, std::vector<Index> counts);

  int dim() const { return static_cast<int>(counts_.size()); }
  Index size() const { return size_; }
  const std::vector<Index>& counts() const { return counts_; }
  const Vec& origin() const { return origin_; }
  const Vec& spacing() const { return spacing_; }
  Index stride(int axis) const { return strides_[static_cast<Index>(axis)]; }

  double coordinate(int axis, Index i) const {
    return origin_[axis] + static_cast<double>(i) * spacing_[axis];
  }

  std::vector<Index> multi_index(Index flat) const;
  Index flat_index(std::span<const Index> multi) const;
  Vec point(Index flat) const;

  /// All node coordinates as a dim x size matrix, one column per node.
  Mat points() const;

  Vec lower() const { return origin_; }
  Vec upper() const;
  double min_spacing() const { return spacing_.minCoeff(); }
  double cell_volume() const { return spacing_.prod(); }

  bool same_lattice(const Grid& other) const;

 private:
  Vec origin_;
  Vec spacing_;
  std::vector<Index> counts_;
  std::vector<Index> strides_;
  Index size_ = 0;
};

Grid make_uniform_grid(const Vec& origin, const Vec& spacing,
                       const std::vector<Index>& counts);

/// Dense samples on a grid. Values are finite but may be negative
/// (noisy inputs).
class Signal {
 public:
  Signal(Grid grid, Vec values);
  static Signal zeros(const Grid& grid);

  const Grid& grid() const { return grid_; }
  const Vec& values() const { return values_; }
  Index size() const { return static_cast<Index>(values_.size()); }
  double operator[](Index i) const { return values_[static_cast<Eigen::Index>(i)]; }

 private:
  Grid grid_;
  Vec values_;
};

/// Weighted Gaussian atom a * g(mean, sigma) where sigma is the symmetric
/// positive definite square root of the covariance.
class GaussianComponent {
 public:
  GaussianComponent(double weight, Vec mean, Mat sigma);
  static GaussianComponent from_covariance(double weight, Vec mean,
                                           const Mat& covariance);

  int dim() const { return static_cast<int>(mean_.size()); }
  double weight() const { return weight_; }
  const Vec& mean() const { return mean_; }
  const Mat& sigma() const { return sigma_; }
  Mat covariance() const { return sigma_ * sigma_; }

  GaussianComponent with_weight(double weight) const;

 private:
  double weight_;
  Vec mean_;
  Mat sigma_;
};

/// Ordered, not necessarily normalized, mixture. Empty is the zero function.
struct Gmm {
  std::vector<GaussianComponent> components;

  Gmm() = default;
  explicit Gmm(std::vector<GaussianComponent> c);

  bool empty() const { return components.empty(); }
  Index size() const { return components.size(); }
  /// Dimension of the components; 0 for an empty mixture.
  int dim() const { return empty() ? 0 : components.front().dim(); }
  double total_weight() const;

  const GaussianComponent& operator[](Index i) const { return components[i]; }
  auto begin() const { return components.begin(); }
  auto end() const { return components.end(); }
  void push_back(GaussianComponent c);
};

/// Points stored column-wise (dim x count).
class PointCloud {
 public:
  PointCloud(int dim, Mat points);
  explicit PointCloud(int dim) : PointCloud(dim, Mat(dim, 0)) {}

  int dim() const { return dim_; }
  Index size() const { return static_cast<Index>(points_.cols()); }
  const Mat& points() const { return points_; }
  Vec point(Index i) const { return points_.col(static_cast<Eigen::Index>(i)); }

 private:
  int dim_;
  Mat points_;
};

/// The k nodes nearest to y in Euclidean distance, sorted by
/// (distance, flat index). Exact; ties go to the lower flat index.
std::vector<Index> k_nearest(const Grid& grid, const Vec& y, Index k);

/// k_nearest for a query that is itself a grid node. Distances are formed
/// from integer index offsets so symmetric neighbours tie exactly.
std::vector<Index> k_nearest_node(const Grid& grid, Index node, Index k);

}  // namespace gmmdecomp
