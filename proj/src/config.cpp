#include "hyconex/config.hpp"

#include <string>

#include "hyconex/error.hpp"

namespace hcx {

HyperNetConfig TrainConfig::hypernet(int input_dim, int num_classes) const {
  HyperNetConfig h;
  h.input_dim = input_dim;
  h.num_classes = num_classes;
  h.hidden = hidden;
  h.blocks = blocks;
  h.dropout = dropout;
  return h;
}

FlowConfig TrainConfig::flow(int input_dim, int num_classes) const {
  FlowConfig f;
  f.dim = input_dim;
  f.num_classes = num_classes;
  f.hidden = flow_hidden;
  f.layers = flow_layers;
  f.blocks = flow_blocks;
  return f;
}

void align_stop_rule(TrainConfig& config) {
  if (!config.toggles.plausibility) config.stop_plausibility_weight = 0.0;
  if (!config.toggles.proximity) config.stop_l2_weight = 0.0;
  if (!config.toggles.counterfactual_ce) config.validity_gate = 0.0;
}

void to_json(nlohmann::json& j, const LossToggles& t) {
  j = {{"counterfactual_ce", t.counterfactual_ce}, {"proximity", t.proximity}, {"plausibility", t.plausibility}};
}

void from_json(const nlohmann::json& j, LossToggles& t) {
  for (const auto& [key, value] : j.items()) {
    if (key == "counterfactual_ce") t.counterfactual_ce = value.get<bool>();
    else if (key == "proximity") t.proximity = value.get<bool>();
    else if (key == "plausibility") t.plausibility = value.get<bool>();
    else throw DataError("unknown toggle '" + key + "'");
  }
}

#define HCX_CONFIG_FIELDS(X)                                                                                      \
  X(seed) X(hidden) X(blocks) X(dropout) X(flow_hidden) X(flow_layers) X(flow_blocks) X(scaling) X(noise_sigma)              \
  X(validation_fraction) X(clusters_per_class) X(batch_size) X(lr) X(lr_min) X(pretrain_epochs) X(pretrain_alpha) \
  X(pretrain_literal) X(flow_epochs) X(flow_lr) X(epochs) X(ramp_epochs) X(patience) X(alpha_ce)                  \
  X(alpha_proximity) X(alpha_plausibility) X(per_class_threshold) X(toggles) X(accuracy_slack) X(validity_gate)   \
  X(stop_plausibility_weight) X(stop_l2_weight)

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json::object();
#define X(name) j[#name] = c.name;
  HCX_CONFIG_FIELDS(X)
#undef X
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw DataError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    try {
#define X(name)                              \
  if (key == #name) {                        \
    value.get_to(c.name);                    \
    known = true;                            \
  }
      HCX_CONFIG_FIELDS(X)
#undef X
    } catch (const nlohmann::json::exception& e) {
      throw DataError("config key '" + key + "': " + e.what());
    }
    if (!known) throw DataError("unknown config key '" + key + "'");
  }
  if (c.batch_size < 1) throw DataError("config: batch_size must be positive");
  if (c.validation_fraction <= 0.0 || c.validation_fraction >= 1.0) {
    throw DataError("config: validation_fraction must lie in (0, 1)");
  }
  if (c.clusters_per_class < 1) throw DataError("config: clusters_per_class must be positive");
}

#undef HCX_CONFIG_FIELDS

}  // namespace hcx
