#pragma once

#include <vector>

#include <json.hpp>

#include "hyconex/config.hpp"
#include "hyconex/counterfact.hpp"
#include "hyconex/flow.hpp"
#include "hyconex/hypernet.hpp"
#include "hyconex/kmeans.hpp"
#include "hyconex/preprocessor.hpp"
#include "hyconex/training.hpp"

namespace hcx {

/// Everything needed to serve and evaluate a trained classifier.
struct Model {
  Preprocessor prep;
  HyperNet net;
  MafFlow flow;
  DensityThresholds thresholds;
  ClusterIndex clusters;
  Matrix reference;  // encoded training rows used to fit LOF and the isolation forest
  TrainConfig config;

  [[nodiscard]] const Schema& schema() const { return prep.schema(); }
  [[nodiscard]] CounterfactualBatch generate(const Matrix& encoded, const GenerateOptions& options = {}) const;
  /// Encodes one raw row, generates all counterfactuals and decodes them.
  [[nodiscard]] CounterfactualSet explain(const RawRow& row) const;
};

/// At most this many encoded training rows are kept as the outlier-score reference.
inline constexpr Eigen::Index kReferenceRows = 2000;

struct FitResult {
  Model model;
  std::vector<nlohmann::json> log;
  ValidationMetrics validation;
  double pretrain_accuracy = 0.0;
  int best_epoch = -1;
  bool gates_passed = false;
};

/// Splits off a stratified validation set, fits the preprocessor on the rest and trains.
FitResult fit_model(const RawDataset& data, const TrainConfig& config, const LogSink& sink = {});

}  // namespace hcx
