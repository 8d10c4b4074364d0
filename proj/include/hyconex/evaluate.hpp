#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hyconex/metrics.hpp"
#include "hyconex/model.hpp"

namespace hcx {

struct EvalOptions {
  bool outlier_scores = true;  // LOF and isolation forest against the model's reference rows
  int lof_k = 20;
  int iso_trees = 100;
  std::uint64_t iso_seed = 0;
};

struct Evaluation {
  ClassifReport classif;
  CFReport cf;
  CounterfactualBatch batch;
};

/// Classification metrics plus counterfactual metrics for every test row. The
/// reported time covers generate_all over the whole set only.
Evaluation evaluate(const Model& model, const Dataset& test, const EvalOptions& options = {});

struct AblationRow {
  std::string name;
  LossToggles toggles;
  bool ok = false;
  std::string error;  // set when training failed
  Evaluation eval;
  FitResult fit;
};

/// Base, Base+CE, Base+CE+Flow, Base+CE+Dist, Full.
std::vector<std::pair<std::string, LossToggles>> ablation_configurations();

using AblationProgress = std::function<void(const AblationRow&)>;

/// Trains one model per loss configuration with a shared seed. A failing row is
/// recorded and the remaining rows still run.
std::vector<AblationRow> ablation_matrix(const TrainConfig& config, const RawDataset& train, const RawDataset& test,
                                         const EvalOptions& options = {}, const AblationProgress& progress = {});

}  // namespace hcx
