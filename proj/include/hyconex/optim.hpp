#pragma once

#include <cstdint>
#include <vector>

#include "hyconex/params.hpp"

namespace hcx {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Moment buffers mirror the shapes of the parameter set
/// the optimiser was created for.
class Adam {
 public:
  explicit Adam(const ParamSet& params, AdamConfig config = {});

  /// Applies one update in place. Throws DivergenceError naming the first
  /// parameter whose gradient is non-finite; nothing is modified in that case.
  void step(ParamSet& params, const std::vector<Matrix>& grads, double lr);

  [[nodiscard]] std::uint64_t steps() const { return step_; }
  [[nodiscard]] const std::vector<Matrix>& first_moments() const { return m_; }
  [[nodiscard]] const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::uint64_t step_ = 0;
};

/// eta(t) = eta_min + (eta_max - eta_min) (1 + cos(pi t / T)) / 2, clamped to eta_min past T.
struct CosineSchedule {
  double eta_max = 1e-3;
  double eta_min = 0.0;
  std::uint64_t total_steps = 1;

  [[nodiscard]] double operator()(std::uint64_t t) const;
};

}  // namespace hcx
