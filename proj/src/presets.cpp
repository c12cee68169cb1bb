#include "gmmdecomp/presets.hpp"

#include <stdexcept>

namespace gmmdecomp::presets {

namespace {

GaussianComponent atom1d(double a, double mean, double variance) {
  return GaussianComponent::from_covariance(a, Vec::Constant(1, mean),
                                            Mat::Constant(1, 1, variance));
}

GaussianComponent atom2d(double a, double mx, double my, double c11, double c12,
                         double c22) {
  Mat cov(2, 2);
  cov << c11, c12, c12, c22;
  return GaussianComponent::from_covariance(a, Vec{{mx, my}}, cov);
}

}  // namespace

Grid grid_1d() {
  return Grid(Vec::Constant(1, -10.0), Vec::Constant(1, 20.0 / 1000.0), {1001});
}

Grid grid_2d() {
  return Grid(Vec::Constant(2, -10.0), Vec::Constant(2, 20.0 / 65.0), {65, 65});
}

Gmm experiment1() {
  return Gmm({atom1d(1, 0, 1), atom1d(8, 0, 4), atom1d(1, -2, 1), atom1d(1, 2, 1),
              atom1d(1, -8, 1), atom1d(1, 8, 1)});
}

Gmm experiment2() {
  return Gmm({atom2d(2, -1.5, -2.5981, 0.7969, 1.272, 2.2656),
              atom2d(2, -1.5, 2.5981, 0.7969, -1.272, 2.2656),
              atom2d(2, 3.0, 0.0, 3.0, 0.0, 0.0625),
              atom2d(1, -1.75, -3.0311, 1.0, 0.0, 1.0)});
}

Gmm experiment3() {
  return Gmm({atom2d(5, -5, 5, 1, 0, 1), atom2d(1, 5, -5, 1, 0, 1),
              atom2d(3, 5, 5, 1, 0, 1), atom2d(4, -5, -5, 1, 0, 1),
              atom2d(5, -2, 0, 1, 0, 1), atom2d(5, 0, -2, 1, 0, 1),
              atom2d(5, 2, 0, 1, 0, 1), atom2d(5, 0, 2, 1, 0, 1)});
}

Preset by_name(const std::string& name) {
  if (name == "exp1") return {name, experiment1(), grid_1d()};
  if (name == "exp2") return {name, experiment2(), grid_2d()};
  if (name == "exp3") return {name, experiment3(), grid_2d()};
  throw std::invalid_argument("unknown preset '" + name + "' (expected exp1, exp2, exp3)");
}

std::vector<std::string> names() { return {"exp1", "exp2", "exp3"}; }

}  // namespace gmmdecomp::presets
