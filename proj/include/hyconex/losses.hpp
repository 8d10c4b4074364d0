#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hyconex/config.hpp"
#include "hyconex/flow.hpp"
#include "hyconex/hypernet.hpp"
#include "hyconex/kmeans.hpp"

namespace hcx {

struct Alphas {
  double ce = 0.0;
  double proximity = 0.0;
  double plausibility = 0.0;

  friend bool operator==(const Alphas&, const Alphas&) = default;
};

/// alpha_i(t) = target_i * min(t / R, 1).
struct TradeoffSchedule {
  Alphas target{0.8, 0.1, 0.1};
  std::uint64_t ramp_steps = 1;

  [[nodiscard]] Alphas at(std::uint64_t step) const;
};

/// x' = x - W_m restricted to the D weight coordinates of row m (the bias is not a translation).
ad::Var counterfactual_candidate(ad::Var x, ad::Var weights, std::span<const int> targets);
/// x' = W_m, the literal pre-training reading.
ad::Var literal_candidate(ad::Var weights, std::span<const int> targets, Eigen::Index dim);

/// max(delta - log p_F(x' | m), 0) per row, shape (B, 1).
ad::Var plausibility_loss(const MafFlow& flow, const std::vector<ad::Var>& flow_bound, ad::Var x_cf,
                          std::span<const int> targets, std::span<const double> delta);

/// Frozen flow plus thresholds for the plausibility term.
struct FlowTerm {
  const MafFlow* flow = nullptr;
  const DensityThresholds* thresholds = nullptr;
  bool per_class = true;

  [[nodiscard]] double delta(int target) const;
};

/// Everything needed to record one loss evaluation.
struct LossContext {
  HyperNet* net = nullptr;
  std::vector<ad::Var> net_bound;
  ForwardContext primary;  // pass for x
  ForwardContext shifted;  // pass for the counterfactual candidates
  FlowTerm flow;
  std::vector<ad::Var> flow_bound;
};

/// Scalar summaries of the recorded terms (batch means of per-sample totals).
struct LossTerms {
  ad::Var total;
  double ce = 0.0;
  double cf_ce = 0.0;
  double proximity = 0.0;
  double plausibility = 0.0;
};

/// Per-row alpha1 CE(f(x'; H(x')), m) + alpha2 mse(x, x') + alpha3 L_F(x', m), shape (B, 1).
/// Terms switched off in `toggles` are not recorded at all.
ad::Var conex_loss(LossContext& ctx, ad::Var x, ad::Var weights, std::span<const int> targets, const Alphas& alpha,
                   const LossToggles& toggles, LossTerms* terms = nullptr);

/// CE(f(x), y) + sum over m != y of conex_loss, averaged over the batch.
LossTerms hyconex_loss(LossContext& ctx, ad::Var x, std::span<const int> labels, const Alphas& alpha,
                       const LossToggles& toggles);

/// CE(f(x), y) + alpha sum over m != y of ||x' - r_m||, with r_m the centre of
/// class m nearest to x. alpha = 0 records plain cross-entropy.
LossTerms pretrain_loss(LossContext& ctx, ad::Var x, std::span<const int> labels, const ClusterIndex& clusters,
                        double alpha, bool literal);

/// Targets for alternative offset o: m_b = (y_b + o) mod K.
std::vector<int> alternative_targets(std::span<const int> labels, int offset, int num_classes);

struct ValidationMetrics {
  double accuracy = 0.0;
  double validity = 0.0;
  double mean_l2 = 0.0;
  double p_plaus = 0.0;
};

/// -infinity when a gate fails, else w_p P.Plaus - w_l2 mean L2.
double early_stop_score(const ValidationMetrics& m, double pretrain_accuracy, const TrainConfig& config);

}  // namespace hcx
