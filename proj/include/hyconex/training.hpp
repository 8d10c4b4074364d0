#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyconex/config.hpp"
#include "hyconex/dataset.hpp"
#include "hyconex/flow.hpp"
#include "hyconex/hypernet.hpp"
#include "hyconex/kmeans.hpp"
#include "hyconex/losses.hpp"
#include "hyconex/preprocessor.hpp"

namespace hcx {

/// Receives every training-log record as it is produced.
using LogSink = std::function<void(const nlohmann::json& record)>;

struct TrainResult {
  HyperNet net;
  MafFlow flow;
  DensityThresholds thresholds;
  ClusterIndex clusters;
  std::vector<nlohmann::json> log;
  double pretrain_accuracy = 0.0;
  int best_epoch = -1;        // phase-3 epoch of the returned snapshot, -1 if phase 3 did not run
  bool gates_passed = false;  // false when the snapshot is the max-validity fallback
  ValidationMetrics best_metrics;
  std::string flow_digest;
};

/// Validation accuracy, validity, mean L2 and P.Plaus (global threshold) of the current model.
ValidationMetrics validation_metrics(const HyperNet& net, const MafFlow& flow, const DensityThresholds& thresholds,
                                     const Dataset& val);

/// Pre-trains the hypernetwork with the cluster-guided loss, fits the flow on
/// its predicted labels, freezes it, then trains with the counterfactual
/// objective under a linear alpha ramp and early stopping.
///
/// `prep` supplies dequantisation noise for categorical blocks; pass null to skip it.
/// Throws DivergenceError naming the phase and step on non-finite losses.
TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& val_set,
                  const Preprocessor* prep = nullptr, const LogSink& sink = {});

}  // namespace hcx
