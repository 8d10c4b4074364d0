#pragma once

#include <functional>
#include <vector>

#include "hyconex/tape.hpp"

namespace hcx {

struct FdCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t skipped = 0;  // coordinates where a perturbed evaluation was non-finite
};

/// Records `fn` on a tape with `point` bound as variables and returns a 1x1 loss.
using TapeFunction = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

/// Compares reverse-mode gradients of `fn` against central differences with step `h`.
/// The relative error of one coordinate is |a - n| / max(|a|, |n|, floor).
FdCheckResult finite_diff_check(const TapeFunction& fn, const std::vector<Matrix>& point, double h = 1e-4,
                                double floor = 1e-6);

}  // namespace hcx
