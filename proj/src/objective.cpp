#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "gmmdecomp/eval.hpp"
#include "gmmdecomp/optim.hpp"

namespace gmmdecomp {

namespace {

struct AtomView {
  double weight;
  Vec mean;
  Mat chol;  // lower
};

AtomView read_atom(const Vec& packed, Eigen::Index offset, int n) {
  AtomView v{packed[offset], packed.segment(offset + 1, n), Mat::Zero(n, n)};
  Eigen::Index k = offset + 1 + n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) v.chol(i, j) = packed[k++];
  }
  return v;
}

double log_normalizer(const Mat& chol) {
  const auto n = static_cast<double>(chol.rows());
  return -0.5 * n * std::log(2.0 * std::numbers::pi) -
         chol.diagonal().array().abs().log().sum();
}

}  // namespace

ResidualObjective::ResidualObjective(const Signal& target, const Gmm& frozen)
    : dim_(target.grid().dim()), points_(target.grid().points()),
      base_(target.values()) {
  if (!frozen.empty()) {
    if (frozen.dim() != dim_) {
      throw std::invalid_argument("objective: frozen gmm dimension mismatch");
    }
    base_ -= gmm_values(frozen, points_);
  }
}

double ResidualObjective::value(const Vec& packed) const {
  const auto per = static_cast<Eigen::Index>(params_per_component(dim_));
  if (packed.size() % per != 0) {
    throw std::invalid_argument("objective: packed length mismatch");
  }
  Vec r = base_;
  for (Eigen::Index off = 0; off < packed.size(); off += per) {
    const AtomView atom = read_atom(packed, off, dim_);
    const Mat z = atom.chol.triangularView<Eigen::Lower>().solve(
        points_.colwise() - atom.mean);
    const Eigen::ArrayXd q = z.colwise().squaredNorm().transpose().array();
    r -= atom.weight * (log_normalizer(atom.chol) - 0.5 * q).exp().matrix();
  }
  return r.squaredNorm();
}

double ResidualObjective::operator()(const Vec& packed, Vec& grad) const {
  const int n = dim_;
  const auto per = static_cast<Eigen::Index>(params_per_component(n));
  if (packed.size() % per != 0) {
    throw std::invalid_argument("objective: packed length mismatch");
  }
  const auto count = packed.size() / per;
  grad.setZero(packed.size());

  std::vector<AtomView> atoms;
  std::vector<Mat> zs;
  std::vector<Vec> gs;
  atoms.reserve(static_cast<std::size_t>(count));
  zs.reserve(static_cast<std::size_t>(count));
  gs.reserve(static_cast<std::size_t>(count));

  Vec r = base_;
  for (Eigen::Index m = 0; m < count; ++m) {
    atoms.push_back(read_atom(packed, m * per, n));
    const AtomView& atom = atoms.back();
    zs.push_back(atom.chol.triangularView<Eigen::Lower>().solve(
        points_.colwise() - atom.mean));
    const Eigen::ArrayXd q = zs.back().colwise().squaredNorm().transpose().array();
    gs.push_back((log_normalizer(atom.chol) - 0.5 * q).exp().matrix());
    r -= atom.weight * gs.back();
  }
  const double f = r.squaredNorm();

  for (Eigen::Index m = 0; m < count; ++m) {
    const auto um = static_cast<std::size_t>(m);
    const AtomView& atom = atoms[um];
    const Mat& z = zs[um];
    const Vec u = r.cwiseProduct(gs[um]);
    const double su = u.sum();
    // w = sigma^-2 (x - mean) = L^-T z
    const Mat w = atom.chol.transpose().triangularView<Eigen::Upper>().solve(z);
    const Mat wu = w * u.asDiagonal();
    const Mat gl = wu * z.transpose();

    Eigen::Index k = m * per;
    grad[k++] = -2.0 * su;
    grad.segment(k, n) = -2.0 * atom.weight * (w * u);
    k += n;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= i; ++j) {
        double dij = gl(i, j);
        if (i == j) dij -= su / atom.chol(i, i);
        grad[k++] = -2.0 * atom.weight * dij;
      }
    }
  }
  return f;
}

std::pair<double, Vec> objective_grad(const Signal& target,
                                      const PackedParams& active,
                                      const Gmm& frozen) {
  if (active.values.size() != 0 && active.dim != target.grid().dim()) {
    throw std::invalid_argument("objective: active parameters have wrong dimension");
  }
  const ResidualObjective obj(target, frozen);
  Vec grad(active.values.size());
  const double f = obj(active.values, grad);
  return {f, std::move(grad)};
}

}  // namespace gmmdecomp
