#pragma once

#include <cstdint>

#include <json.hpp>

#include "hyconex/flow.hpp"
#include "hyconex/hypernet.hpp"
#include "hyconex/preprocessor.hpp"

namespace hcx {

/// Which terms of the counterfactual objective are active. All off gives the
/// plain cross-entropy classifier.
struct LossToggles {
  bool counterfactual_ce = true;
  bool proximity = true;
  bool plausibility = true;

  [[nodiscard]] bool any() const { return counterfactual_ce || proximity || plausibility; }
  friend bool operator==(const LossToggles&, const LossToggles&) = default;
};

struct TrainConfig {
  std::uint64_t seed = 0;

  // networks
  int hidden = 256;
  int blocks = 4;
  double dropout = 0.25;
  int flow_hidden = 16;
  int flow_layers = 8;
  int flow_blocks = 4;

  // data
  Scaling scaling = Scaling::Standard;
  double noise_sigma = 0.05;
  double validation_fraction = 0.2;
  int clusters_per_class = 5;

  // optimisation
  int batch_size = 128;
  double lr = 1e-3;
  double lr_min = 0.0;

  // phase 1
  int pretrain_epochs = 40;
  double pretrain_alpha = 0.8;
  bool pretrain_literal = false;  // x' = W_m instead of x - W_m

  // phase 2
  int flow_epochs = 100;
  double flow_lr = 1e-3;

  // phase 3
  int epochs = 150;
  int ramp_epochs = 20;
  int patience = 15;
  double alpha_ce = 0.8;
  double alpha_proximity = 0.1;
  double alpha_plausibility = 0.1;
  bool per_class_threshold = true;
  LossToggles toggles;

  // early stopping
  double accuracy_slack = 0.02;
  double validity_gate = 0.95;
  double stop_plausibility_weight = 1.0;
  double stop_l2_weight = 0.1;

  [[nodiscard]] HyperNetConfig hypernet(int input_dim, int num_classes) const;
  [[nodiscard]] FlowConfig flow(int input_dim, int num_classes) const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Sets the early-stopping weights and gates to match the active loss terms
/// (no plausibility reward without the flow term, and so on).
void align_stop_rule(TrainConfig& config);

void to_json(nlohmann::json& j, const LossToggles& t);
void from_json(const nlohmann::json& j, LossToggles& t);
void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys throw DataError.
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace hcx
