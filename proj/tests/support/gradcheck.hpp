#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rt2v/trainer.hpp"

namespace oracle {

struct GradCheckCase {
  std::vector<rt2v::RawExample> batch;
  rt2v::HeadSet heads;
  double temperature = 0.5;
};

/// A seeded random batch over small dims with non-identity heads.
GradCheckCase random_gradcheck_case(std::uint64_t seed);

struct GradCheckResult {
  double max_relative_error = 0.0;  // entry-wise, see gradcheck.cpp
  std::size_t entries = 0;
};

/// Compares rt2v::gradients against central finite differences of
/// rt2v::batch_loss over every weight of the three heads.
GradCheckResult gradient_check(const GradCheckCase& c, double h = 1e-5);

}  // namespace oracle
