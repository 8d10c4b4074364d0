#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "hyconex/params.hpp"

namespace hcx {

struct HyperNetConfig {
  int input_dim = 0;
  int num_classes = 0;
  int hidden = 256;
  int blocks = 4;
  double dropout = 0.25;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  double head_init_scale = 1e-2;

  /// Width of one flattened K x (D+1) weight matrix.
  [[nodiscard]] int output_dim() const { return num_classes * (input_dim + 1); }
  friend bool operator==(const HyperNetConfig&, const HyperNetConfig&) = default;
};

enum class NetMode { Train, Eval };

/// Per-call settings of a forward pass. In training mode the dropout masks are
/// a pure function of (seed, step, pass, layer).
struct ForwardContext {
  NetMode mode = NetMode::Eval;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint32_t pass = 0;
  bool update_running_stats = true;
  /// Train mode only: false normalises with the running statistics instead of
  /// the batch moments (dropout stays active).
  bool batch_stats = true;
};

/// Local explanation of a single input: the predicted class's row of W
/// (bias first) and the full matrix.
struct FeatureImportance {
  int predicted_class = 0;
  RowVector row;
  Matrix weights;  // K x (D+1)
};

/// Residual MLP mapping x in R^D to a flattened K x (D+1) local linear classifier.
///
/// Layout: input projection D -> H, then `blocks` pre-activation residual blocks
/// h + fc2(dropout(relu(fc1(bn(h))))), then a linear head H -> K (D+1).
class HyperNet {
 public:
  HyperNet() = default;
  HyperNet(HyperNetConfig config, std::uint64_t init_seed);
  HyperNet(const HyperNet& other);
  HyperNet& operator=(const HyperNet& other);

  [[nodiscard]] const HyperNetConfig& config() const { return config_; }
  [[nodiscard]] ParamSet& params() { return params_; }
  [[nodiscard]] const ParamSet& params() const { return params_; }
  /// Batch-norm running statistics (not trained by gradient).
  [[nodiscard]] ParamSet& buffers() { return buffers_; }
  [[nodiscard]] const ParamSet& buffers() const { return buffers_; }

  /// Records a forward pass on `tape`. `bound` must come from params().bind()
  /// on the same tape. Training mode may update the running statistics.
  ad::Var forward(const std::vector<ad::Var>& bound, ad::Var x, const ForwardContext& ctx);
  /// Evaluation-mode forward; never mutates the network.
  ad::Var forward(const std::vector<ad::Var>& bound, ad::Var x) const;

  /// B x K(D+1) weights in evaluation mode.
  [[nodiscard]] Matrix weights(const Matrix& x) const;
  [[nodiscard]] Matrix logits(const Matrix& x) const;
  [[nodiscard]] Matrix predict_proba(const Matrix& x) const;
  [[nodiscard]] std::vector<int> predict(const Matrix& x) const;
  [[nodiscard]] FeatureImportance feature_importance(const RowVector& x) const;

  /// Number of forward passes recorded since construction (any mode).
  [[nodiscard]] std::uint64_t forward_calls() const { return calls_.load(); }

 private:
  ad::Var run(const std::vector<ad::Var>& bound, ad::Var x, const ForwardContext& ctx, ParamSet* running) const;

  HyperNetConfig config_;
  ParamSet params_;
  ParamSet buffers_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

/// Keep-mask for inverted dropout with `rate`, keyed by (seed, step, layer).
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::uint64_t seed, std::uint64_t step,
                    std::uint64_t layer);

}  // namespace hcx
