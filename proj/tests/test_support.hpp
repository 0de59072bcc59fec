#pragma once

#include <random>

#include "headpose/features.hpp"
#include "headpose/rotation.hpp"
#include "test_files.hpp"

namespace headpose::testing {

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 axis(g(rng), g(rng), g(rng));
  const double angle = std::uniform_real_distribution<double>(0.0, 3.14)(rng);
  return rotation_exp(axis.normalized() * angle);
}

}  // namespace headpose::testing
