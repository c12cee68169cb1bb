#include "gmmdecomp/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gmmdecomp {

double NormalStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double NormalStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Signal add_white_noise(const Signal& clean, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("noise sigma must be finite and non-negative");
  }
  if (sigma == 0.0) return clean;
  NormalStream rng(seed);
  Vec v = clean.values();
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += sigma * rng.normal();
  return Signal(clean.grid(), std::move(v));
}

}  // namespace gmmdecomp
