#pragma once

#include <string>
#include <vector>

#include "gmmdecomp/core.hpp"

namespace gmmdecomp::presets {

/// 1001 nodes y_k = -10 + 20k/1000.
Grid grid_1d();
/// 65 x 65 nodes (-10 + 20k/65, -10 + 20l/65), k, l = 0..64.
Grid grid_2d();

/// Six 1D atoms: a wide a=8 atom at 0 plus unit atoms at 0, +-2, +-8.
Gmm experiment1();
/// Three elongated "legs" pointing at the origin plus a faint spherical
/// atom next to the first leg.
Gmm experiment2();
/// Four a=5 unit atoms on a ring of radius 2 and four corner atoms.
Gmm experiment3();

struct Preset {
  std::string name;
  Gmm gmm;
  Grid grid;
};

/// Looks up "exp1", "exp2" or "exp3"; throws std::invalid_argument otherwise.
Preset by_name(const std::string& name);
std::vector<std::string> names();

}  // namespace gmmdecomp::presets
