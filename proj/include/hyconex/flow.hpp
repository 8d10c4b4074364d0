#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hyconex/params.hpp"

namespace hcx {

struct FlowConfig {
  int dim = 0;
  int num_classes = 0;
  int hidden = 16;
  int layers = 8;
  int blocks = 4;
  double log_scale_bound = 10.0;

  friend bool operator==(const FlowConfig&, const FlowConfig&) = default;
};

/// Class-conditional masked autoregressive flow.
///
/// Each layer maps data to noise as z_i = (x_i - mu_i) * exp(-a_i), where mu_i and
/// the log-scale a_i depend only on the variables before i in that layer's order
/// and on the one-hot class. Even layers use the natural variable order, odd
/// layers the reversed one. The conditioner is a masked MLP with one input layer
/// and `blocks` hidden layers of width `hidden`; the one-hot class enters every
/// layer through an unmasked linear term. Log-scales are squashed to
/// bound * tanh(raw / bound).
class MafFlow {
 public:
  MafFlow() = default;
  /// Random conditioner weights; output layers start at zero so the flow is the identity.
  MafFlow(FlowConfig config, std::uint64_t init_seed);
  /// Every parameter zero.
  static MafFlow identity(FlowConfig config);

  [[nodiscard]] const FlowConfig& config() const { return config_; }
  [[nodiscard]] ParamSet& params() { return params_; }
  [[nodiscard]] const ParamSet& params() const { return params_; }

  /// Variable order of layer `l` (position -> variable).
  [[nodiscard]] std::vector<int> order(int layer) const;
  [[nodiscard]] const Matrix& input_mask(int layer) const { return masks_.at(static_cast<std::size_t>(layer)).input; }
  [[nodiscard]] const Matrix& hidden_mask(int layer) const { return masks_.at(static_cast<std::size_t>(layer)).hidden; }
  [[nodiscard]] const Matrix& output_mask(int layer) const { return masks_.at(static_cast<std::size_t>(layer)).output; }

  struct InverseResult {
    Matrix z;
    Vector log_det;  // log |det dz/dx| per row
  };

  /// Data -> noise in one pass per layer.
  [[nodiscard]] InverseResult inverse(const Matrix& x, std::span<const int> labels) const;
  /// Noise -> data; each layer needs `dim` sequential conditioner passes.
  [[nodiscard]] Matrix forward(const Matrix& z, std::span<const int> labels) const;
  /// log p(x | y) under a standard normal base density.
  [[nodiscard]] Vector log_prob(const Matrix& x, std::span<const int> labels) const;

  /// Differentiable log p(x | y), shape (B, 1). `bound` comes from params().bind().
  ad::Var log_prob(const std::vector<ad::Var>& bound, ad::Var x, std::span<const int> labels) const;

 private:
  struct LayerMasks {
    Matrix input;   // hidden x dim
    Matrix hidden;  // hidden x hidden
    Matrix output;  // 2 dim x hidden
  };

  void build_masks();
  [[nodiscard]] std::size_t layer_base(int layer) const;
  [[nodiscard]] Matrix one_hot(std::span<const int> labels) const;
  /// Conditioner outputs (mu, log-scale) for one layer.
  [[nodiscard]] std::pair<Matrix, Matrix> conditioner(int layer, const Matrix& x, const Matrix& context) const;

  FlowConfig config_;
  ParamSet params_;
  std::vector<LayerMasks> masks_;
};

struct FlowFitConfig {
  int epochs = 100;
  int batch_size = 128;
  double lr = 1e-3;
  double lr_min = 0.0;
  std::uint64_t seed = 0;
};

struct FlowFitResult {
  double final_nll = 0.0;
  std::vector<double> epoch_nll;
  std::uint64_t steps = 0;
};

/// Per-epoch hook that may perturb the training matrix (dequantisation noise).
using Augment = std::function<void(Matrix& x, std::uint64_t epoch)>;

/// Minimises mean negative log-likelihood with Adam and a cosine schedule.
/// Throws DivergenceError with the step index when the loss becomes non-finite.
FlowFitResult fit_flow(MafFlow& flow, const Matrix& x, const std::vector<int>& labels, const FlowFitConfig& config,
                       const Augment& augment = {});

/// Median train log densities under a frozen flow.
struct DensityThresholds {
  double global = 0.0;
  std::vector<double> per_class;

  [[nodiscard]] double for_class(int c) const { return per_class.at(static_cast<std::size_t>(c)); }
  friend bool operator==(const DensityThresholds&, const DensityThresholds&) = default;
};

double median(std::vector<double> values);
DensityThresholds thresholds_from_log_densities(const Vector& log_density, const std::vector<int>& labels,
                                                int num_classes);
DensityThresholds density_thresholds(const MafFlow& flow, const Matrix& x, const std::vector<int>& labels);

}  // namespace hcx
