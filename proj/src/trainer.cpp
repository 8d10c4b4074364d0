#include "hyconex/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "hyconex/counterfact.hpp"
#include "hyconex/digest.hpp"
#include "hyconex/error.hpp"
#include "hyconex/fpenv.hpp"
#include "hyconex/metrics.hpp"
#include "hyconex/optim.hpp"
#include "hyconex/rng.hpp"

namespace hcx {

namespace {

enum Phase : std::uint64_t { kPretrain = 1, kFlow = 2, kJoint = 3 };

struct EpochTotals {
  double loss = 0.0;
  double ce = 0.0;
  double cf_ce = 0.0;
  double proximity = 0.0;
  double plausibility = 0.0;
};

using BatchLoss = std::function<LossTerms(LossContext&, ad::Var x, std::span<const int> y)>;

std::size_t steps_per_epoch(std::size_t n, int batch_size) {
  const auto b = static_cast<std::size_t>(batch_size);
  std::size_t steps = (n + b - 1) / b;
  if (steps > 1 && n % b == 1) --steps;  // a single-row tail batch is folded away
  return steps;
}

bool has_categorical(const GroupIndex& groups) {
  return std::any_of(groups.begin(), groups.end(), [](const FeatureGroup& g) { return g.kind == ColumnKind::Categorical; });
}

nlohmann::json null_if_inf(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

// One shuffled pass over the training set.
EpochTotals run_epoch(HyperNet& net, Adam& adam, const CosineSchedule& lr, std::uint64_t& step, const Matrix& x,
                      const std::vector<int>& y, const TrainConfig& config, Phase phase, int epoch,
                      const LossContext& base, const BatchLoss& loss_fn, const char* phase_name) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto b = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps = steps_per_epoch(n, config.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 gen(hash_key(config.seed, phase, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), gen);
  EpochTotals totals;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t begin = s * b;
    const std::size_t end = s + 1 == steps ? n : begin + b;
    Matrix xb(static_cast<Eigen::Index>(end - begin), x.cols());
    std::vector<int> yb(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      xb.row(static_cast<Eigen::Index>(i - begin)) = x.row(static_cast<Eigen::Index>(order[i]));
      yb[i - begin] = y[order[i]];
    }
    ad::Tape tape;
    LossContext ctx = base;
    ctx.net = &net;
    ctx.net_bound = net.params().bind(tape, true);
    if (ctx.flow.flow != nullptr) ctx.flow_bound = ctx.flow.flow->params().bind(tape, false);
    ctx.primary = ForwardContext{NetMode::Train, config.seed, step, 0, true};
    ctx.shifted = ForwardContext{NetMode::Train, config.seed, step, 1, false, false};
    const LossTerms terms = loss_fn(ctx, tape.constant(std::move(xb)), yb);
    const double value = terms.total.scalar();
    if (!std::isfinite(value)) {
      throw DivergenceError(std::string(phase_name) + " diverged at step " + std::to_string(step));
    }
    tape.backward(terms.total);
    try {
      adam.step(net.params(), collect_grads(tape, ctx.net_bound), lr(adam.steps()));
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(phase_name) + " diverged at step " + std::to_string(step) + ": " + e.what());
    }
    ++step;
    const double w = static_cast<double>(end - begin) / static_cast<double>(n);
    totals.loss += w * value;
    totals.ce += w * terms.ce;
    totals.cf_ce += w * terms.cf_ce;
    totals.proximity += w * terms.proximity;
    totals.plausibility += w * terms.plausibility;
  }
  return totals;
}

Matrix noisy_copy(const Matrix& x, const Preprocessor* prep, bool categorical, std::uint64_t key) {
  Matrix out = x;
  if (prep != nullptr && categorical && prep->noise_sigma() > 0.0) prep->add_dequantization_noise(out, key);
  return out;
}

}  // namespace

ValidationMetrics validation_metrics(const HyperNet& net, const MafFlow& flow, const DensityThresholds& thresholds,
                                     const Dataset& val) {
  ValidationMetrics m;
  if (val.size() == 0) return m;
  const CounterfactualBatch batch = generate_all(net, &flow, val.x, val.groups);
  m.accuracy = accuracy(batch.predicted, val.y);
  m.validity = coverage_validity(batch).validity;
  double l2 = 0.0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    l2 += proximity(batch.x.row(batch.source[e]), batch.cf.row(static_cast<Eigen::Index>(e)), val.groups).l2;
  }
  m.mean_l2 = l2 / static_cast<double>(batch.size());
  m.p_plaus = plausibility(batch.log_density, thresholds.global).p_plaus;
  return m;
}

TrainResult train(const TrainConfig& user_config, const Dataset& train_set, const Dataset& val_set,
                  const Preprocessor* prep, const LogSink& sink) {
  const FlushDenormals ftz;
  TrainConfig config = user_config;
  align_stop_rule(config);
  const int d = train_set.schema.encoded_dim();
  const int k = train_set.schema.num_classes();
  if (train_set.x.cols() != d || val_set.x.cols() != d) throw ShapeError("train: encoded width does not match schema");
  if (train_set.size() < 2) throw DataError("train: need at least two training rows");
  const bool categorical = has_categorical(train_set.groups);

  TrainResult result;
  auto emit = [&](nlohmann::json record) {
    if (sink) sink(record);
    result.log.push_back(std::move(record));
  };

  // phase 1: cluster-guided pre-training
  result.clusters = kmeans_per_class(train_set, config.clusters_per_class, hash_key(config.seed, kPretrain));
  HyperNet net(config.hypernet(d, k), hash_key(config.seed, 0x4e7ULL));
  const double pre_alpha = config.toggles.any() ? config.pretrain_alpha : 0.0;
  const std::size_t per_epoch = steps_per_epoch(train_set.size(), config.batch_size);
  std::uint64_t step = 0;
  {
    Adam adam(net.params());
    const CosineSchedule lr{config.lr, config.lr_min, per_epoch * static_cast<std::uint64_t>(std::max(1, config.pretrain_epochs))};
    const BatchLoss loss = [&](LossContext& ctx, ad::Var x, std::span<const int> y) {
      return pretrain_loss(ctx, x, y, result.clusters, pre_alpha, config.pretrain_literal);
    };
    for (int epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
      const Matrix x = noisy_copy(train_set.x, prep, categorical, hash_key(config.seed, kPretrain, 0x0150ULL + epoch));
      const double rate = lr(adam.steps());
      const EpochTotals t =
          run_epoch(net, adam, lr, step, x, train_set.y, config, kPretrain, epoch, LossContext{}, loss, "pre-training");
      const double val_acc = val_set.size() == 0 ? 0.0 : accuracy(net.predict(val_set.x), val_set.y);
      emit({{"phase", "pretrain"}, {"epoch", epoch}, {"loss", t.loss}, {"ce", t.ce},
            {"cluster_distance", t.proximity}, {"val_accuracy", val_acc}, {"lr", rate}});
    }
  }
  result.pretrain_accuracy = val_set.size() == 0 ? 0.0 : accuracy(net.predict(val_set.x), val_set.y);

  // phase 2: flow on the classifier's own labels, then freeze
  const std::vector<int> predicted = net.predict(train_set.x);
  MafFlow flow(config.flow(d, k), hash_key(config.seed, kFlow));
  FlowFitConfig fit;
  fit.epochs = config.flow_epochs;
  fit.batch_size = config.batch_size;
  fit.lr = config.flow_lr;
  fit.lr_min = config.lr_min;
  fit.seed = hash_key(config.seed, kFlow, 1);
  Augment augment;
  if (prep != nullptr && categorical) {
    augment = [&](Matrix& x, std::uint64_t epoch) { prep->add_dequantization_noise(x, hash_key(config.seed, kFlow, 0x0150ULL + epoch)); };
  }
  FlowFitResult flow_fit;
  try {
    flow_fit = fit_flow(flow, train_set.x, predicted, fit, augment);
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string("flow fitting: ") + e.what());
  }
  result.thresholds = density_thresholds(flow, train_set.x, predicted);
  result.flow_digest = digest(flow.params());
  emit({{"phase", "flow"}, {"epochs", config.flow_epochs}, {"final_nll", flow_fit.final_nll},
        {"epoch_nll", flow_fit.epoch_nll}, {"threshold_global", result.thresholds.global},
        {"threshold_per_class", result.thresholds.per_class}, {"pretrain_accuracy", result.pretrain_accuracy}});

  // phase 3: counterfactual objective with alpha ramp and early stopping
  if (config.epochs > 0) {
    Adam adam(net.params());
    const CosineSchedule lr{config.lr, config.lr_min, per_epoch * static_cast<std::uint64_t>(config.epochs)};
    TradeoffSchedule ramp{{config.alpha_ce, config.alpha_proximity, config.alpha_plausibility},
                          per_epoch * static_cast<std::uint64_t>(std::max(0, config.ramp_epochs))};
    LossContext base;
    base.flow = FlowTerm{&flow, &result.thresholds, config.per_class_threshold};
    std::uint64_t joint_step = 0;
    const BatchLoss loss = [&](LossContext& ctx, ad::Var x, std::span<const int> y) {
      return hyconex_loss(ctx, x, y, ramp.at(joint_step++), config.toggles);
    };
    double best_score = -std::numeric_limits<double>::infinity();
    double best_validity = -1.0;
    HyperNet fallback = net;
    ValidationMetrics fallback_metrics;
    int fallback_epoch = -1;
    int since = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      const Matrix x = noisy_copy(train_set.x, prep, categorical, hash_key(config.seed, kJoint, 0x0150ULL + epoch));
      const double rate = lr(adam.steps());
      const Alphas alpha = ramp.at(joint_step);
      const EpochTotals t =
          run_epoch(net, adam, lr, step, x, train_set.y, config, kJoint, epoch, base, loss, "training");
      const ValidationMetrics vm = validation_metrics(net, flow, result.thresholds, val_set);
      const double score = early_stop_score(vm, result.pretrain_accuracy, config);
      const bool armed = epoch + 1 >= config.ramp_epochs;
      emit({{"phase", "train"}, {"epoch", epoch}, {"loss", t.loss}, {"ce", t.ce}, {"cf_ce", t.cf_ce},
            {"proximity", t.proximity}, {"plausibility", t.plausibility}, {"val_accuracy", vm.accuracy},
            {"validity", vm.validity}, {"p_plaus", vm.p_plaus}, {"mean_l2", vm.mean_l2}, {"score", null_if_inf(score)},
            {"lr", rate}, {"alpha", {alpha.ce, alpha.proximity, alpha.plausibility}}});
      if (!armed) continue;
      if (vm.validity >= best_validity) {
        best_validity = vm.validity;
        fallback = net;
        fallback_metrics = vm;
        fallback_epoch = epoch;
      }
      if (std::isfinite(score) && score >= best_score) {
        best_score = score;
        result.net = net;
        result.best_metrics = vm;
        result.best_epoch = epoch;
        result.gates_passed = true;
        since = 0;
      } else if (++since >= config.patience) {
        break;
      }
    }
    if (!result.gates_passed) {
      result.net = fallback_epoch >= 0 ? fallback : net;
      result.best_metrics = fallback_epoch >= 0 ? fallback_metrics : validation_metrics(net, flow, result.thresholds, val_set);
      result.best_epoch = fallback_epoch;
    }
  } else {
    result.net = net;
    result.best_metrics = validation_metrics(net, flow, result.thresholds, val_set);
  }

  if (digest(flow.params()) != result.flow_digest) throw Error("flow parameters changed after freezing");
  result.flow = std::move(flow);
  emit({{"phase", "done"}, {"best_epoch", result.best_epoch}, {"gates_passed", result.gates_passed},
        {"val_accuracy", result.best_metrics.accuracy}, {"validity", result.best_metrics.validity},
        {"p_plaus", result.best_metrics.p_plaus}, {"mean_l2", result.best_metrics.mean_l2},
        {"flow_digest", result.flow_digest}});
  return result;
}

}  // namespace hcx
