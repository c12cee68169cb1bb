#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "gmmdecomp/core.hpp"

namespace gmmdecomp {

/// Reproducible standard-normal stream: std::mt19937_64 (fully specified by
/// the C++ standard) mapped to 53-bit uniforms, then Box-Muller pairs.
/// Unlike std::normal_distribution, the output does not depend on the
/// standard library implementation.
class NormalStream {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64+u53+box-muller/v1";

  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();
  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// clean + i.i.d. N(0, sigma^2) noise drawn from NormalStream(seed).
Signal add_white_noise(const Signal& clean, double sigma, std::uint64_t seed);

}  // namespace gmmdecomp
