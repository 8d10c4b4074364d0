#include "hyconex/evaluate.hpp"

#include <memory>

#include "hyconex/error.hpp"

namespace hcx {

Evaluation evaluate(const Model& model, const Dataset& test, const EvalOptions& options) {
  Evaluation ev;
  const int k = model.schema().num_classes();
  ev.classif = classif_report(model.net.predict_proba(test.x), test.y, k);
  const double seconds = timed([&] { ev.batch = model.generate(test.x); });
  std::unique_ptr<LofIndex> lof;
  std::unique_ptr<IsoForest> iso;
  if (options.outlier_scores && model.reference.rows() > options.lof_k) {
    lof = std::make_unique<LofIndex>(model.reference, options.lof_k);
    iso = std::make_unique<IsoForest>(model.reference, options.iso_seed, options.iso_trees);
  }
  ev.cf = cf_report(ev.batch, test.groups, model.thresholds.global, lof.get(), iso.get(), seconds);
  return ev;
}

std::vector<std::pair<std::string, LossToggles>> ablation_configurations() {
  return {{"Base", {false, false, false}},
          {"Base+CE", {true, false, false}},
          {"Base+CE+Flow", {true, false, true}},
          {"Base+CE+Dist", {true, true, false}},
          {"Full", {true, true, true}}};
}

std::vector<AblationRow> ablation_matrix(const TrainConfig& config, const RawDataset& train, const RawDataset& test,
                                         const EvalOptions& options, const AblationProgress& progress) {
  std::vector<AblationRow> rows;
  for (const auto& [name, toggles] : ablation_configurations()) {
    AblationRow row;
    row.name = name;
    row.toggles = toggles;
    TrainConfig c = config;
    c.toggles = toggles;
    try {
      row.fit = fit_model(train, c);
      row.eval = evaluate(row.fit.model, row.fit.model.prep.encode(test), options);
      row.ok = true;
    } catch (const Error& e) {
      row.error = e.what();
    }
    if (progress) progress(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace hcx
