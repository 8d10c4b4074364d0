#include "hyconex/model.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "hyconex/rng.hpp"
#include "hyconex/sampling.hpp"

namespace hcx {

CounterfactualBatch Model::generate(const Matrix& encoded, const GenerateOptions& options) const {
  return generate_all(net, &flow, encoded, prep.groups(), options);
}

CounterfactualSet Model::explain(const RawRow& row) const {
  const Matrix x = prep.transform(row);
  auto sets = to_sets(generate(x), prep);
  return std::move(sets.front());
}

FitResult fit_model(const RawDataset& data, const TrainConfig& config, const LogSink& sink) {
  auto [fit_raw, val_raw] = split_train_test(data, config.validation_fraction, hash_key(config.seed, 0xda7aULL));
  FitResult out;
  out.model.config = config;
  out.model.prep = Preprocessor::fit(fit_raw, config.noise_sigma, config.scaling);
  const Dataset fit_set = out.model.prep.encode(fit_raw);
  const Dataset val_set = out.model.prep.encode(val_raw);
  TrainResult r = train(config, fit_set, val_set, &out.model.prep, sink);
  out.model.net = std::move(r.net);
  out.model.flow = std::move(r.flow);
  out.model.thresholds = std::move(r.thresholds);
  out.model.clusters = std::move(r.clusters);
  if (fit_set.x.rows() <= kReferenceRows) {
    out.model.reference = fit_set.x;
  } else {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(fit_set.x.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::mt19937_64 gen(hash_key(config.seed, 0x4ef0ULL));
    std::shuffle(idx.begin(), idx.end(), gen);
    idx.resize(static_cast<std::size_t>(kReferenceRows));
    std::sort(idx.begin(), idx.end());
    out.model.reference.resize(kReferenceRows, fit_set.x.cols());
    for (Eigen::Index i = 0; i < kReferenceRows; ++i) out.model.reference.row(i) = fit_set.x.row(idx[static_cast<std::size_t>(i)]);
  }
  out.log = std::move(r.log);
  out.validation = r.best_metrics;
  out.pretrain_accuracy = r.pretrain_accuracy;
  out.best_epoch = r.best_epoch;
  out.gates_passed = r.gates_passed;
  return out;
}

}  // namespace hcx
