// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lipread/tensor.hpp"

namespace lipread {

struct GradCheckEntry {
  std::string name;
  GradReport report;
  double tolerance = 0.0;

  bool passed() const { return report.max_relative_error <= tolerance; }
};

/// Finite-difference check of every differentiable op on small random
/// instances, plus an end-to-end pass through the shrunken lipnet. Each
/// entry holds the worst coordinate over all of the op's arguments.
std::vector<GradCheckEntry> run_gradient_suite(std::uint64_t seed = 0);

}  // namespace lipread
