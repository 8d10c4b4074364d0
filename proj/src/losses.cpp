#include "hyconex/losses.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "hyconex/error.hpp"

namespace hcx {

namespace {

// Row indices 0..B-1 repeated once per alternative class, with matching targets.
struct Expanded {
  std::vector<int> rows;
  std::vector<int> targets;
};

Expanded expand_alternatives(std::span<const int> labels, int num_classes) {
  Expanded e;
  const int b = static_cast<int>(labels.size());
  for (int o = 1; o < num_classes; ++o) {
    const auto t = alternative_targets(labels, o, num_classes);
    for (int i = 0; i < b; ++i) e.rows.push_back(i);
    e.targets.insert(e.targets.end(), t.begin(), t.end());
  }
  return e;
}

double sum_value(ad::Var v) { return v.value().sum(); }

}  // namespace

Alphas TradeoffSchedule::at(std::uint64_t step) const {
  const double r = ramp_steps == 0 ? 1.0 : std::min(1.0, static_cast<double>(step) / static_cast<double>(ramp_steps));
  return {target.ce * r, target.proximity * r, target.plausibility * r};
}

std::vector<int> alternative_targets(std::span<const int> labels, int offset, int num_classes) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = (labels[i] + offset) % num_classes;
  return out;
}

ad::Var counterfactual_candidate(ad::Var x, ad::Var weights, std::span<const int> targets) {
  const Eigen::Index d = x.cols();
  return x - ad::gather_blocks(weights, targets, d + 1, 1, d);
}

ad::Var literal_candidate(ad::Var weights, std::span<const int> targets, Eigen::Index dim) {
  return ad::gather_blocks(weights, targets, dim + 1, 1, dim);
}

double FlowTerm::delta(int target) const {
  if (thresholds == nullptr) throw Error("plausibility term needs density thresholds");
  return per_class ? thresholds->for_class(target) : thresholds->global;
}

ad::Var plausibility_loss(const MafFlow& flow, const std::vector<ad::Var>& flow_bound, ad::Var x_cf,
                          std::span<const int> targets, std::span<const double> delta) {
  if (delta.size() != targets.size()) throw ShapeError("plausibility_loss: one threshold per row required");
  const ad::Var log_p = flow.log_prob(flow_bound, x_cf, targets);
  Matrix d(static_cast<Eigen::Index>(delta.size()), 1);
  for (std::size_t i = 0; i < delta.size(); ++i) d(static_cast<Eigen::Index>(i), 0) = delta[i];
  return ad::hinge(x_cf.tape()->constant(std::move(d)) - log_p);
}

ad::Var conex_loss(LossContext& ctx, ad::Var x, ad::Var weights, std::span<const int> targets, const Alphas& alpha,
                   const LossToggles& toggles, LossTerms* terms) {
  ad::Tape& tape = *x.tape();
  const ad::Var x_cf = counterfactual_candidate(x, weights, targets);
  ad::Var out;
  auto accumulate = [&out](ad::Var v) { out = out.valid() ? out + v : v; };
  if (toggles.counterfactual_ce) {
    const ad::Var w_cf = ctx.net->forward(ctx.net_bound, x_cf, ctx.shifted);
    const ad::Var ce = ad::softmax_cross_entropy(ad::local_logits(w_cf, x_cf), targets);
    if (terms != nullptr) terms->cf_ce += sum_value(ce);
    accumulate(alpha.ce * ce);
  }
  if (toggles.proximity) {
    const ad::Var prox = ad::mean_square_rows(x_cf - x);
    if (terms != nullptr) terms->proximity += sum_value(prox);
    accumulate(alpha.proximity * prox);
  }
  if (toggles.plausibility) {
    if (ctx.flow.flow == nullptr) throw Error("plausibility term needs a fitted flow");
    std::vector<double> delta(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) delta[i] = ctx.flow.delta(targets[i]);
    const ad::Var lf = plausibility_loss(*ctx.flow.flow, ctx.flow_bound, x_cf, targets, delta);
    if (terms != nullptr) terms->plausibility += sum_value(lf);
    accumulate(alpha.plausibility * lf);
  }
  if (!out.valid()) out = tape.constant(Matrix::Zero(x.rows(), 1));
  return out;
}

LossTerms hyconex_loss(LossContext& ctx, ad::Var x, std::span<const int> labels, const Alphas& alpha,
                       const LossToggles& toggles) {
  const auto b = static_cast<double>(labels.size());
  const ad::Var w = ctx.net->forward(ctx.net_bound, x, ctx.primary);
  const ad::Var ce = ad::softmax_cross_entropy(ad::local_logits(w, x), labels);
  LossTerms terms;
  terms.ce = ce.value().mean();
  terms.total = ad::mean(ce);
  const int k = ctx.net->config().num_classes;
  if (toggles.any()) {
    const Expanded e = expand_alternatives(labels, k);
    const ad::Var xr = ad::select_rows(x, e.rows);
    const ad::Var wr = ad::select_rows(w, e.rows);
    const ad::Var conex = conex_loss(ctx, xr, wr, e.targets, alpha, toggles, &terms);
    terms.total = terms.total + (1.0 / b) * ad::sum(conex);
    terms.cf_ce /= b;
    terms.proximity /= b;
    terms.plausibility /= b;
  }
  return terms;
}

LossTerms pretrain_loss(LossContext& ctx, ad::Var x, std::span<const int> labels, const ClusterIndex& clusters,
                        double alpha, bool literal) {
  const auto b = static_cast<double>(labels.size());
  const ad::Var w = ctx.net->forward(ctx.net_bound, x, ctx.primary);
  const ad::Var ce = ad::softmax_cross_entropy(ad::local_logits(w, x), labels);
  LossTerms terms;
  terms.ce = ce.value().mean();
  terms.total = ad::mean(ce);
  if (alpha == 0.0) return terms;
  const int k = ctx.net->config().num_classes;
  const Expanded e = expand_alternatives(labels, k);
  const ad::Var wr = ad::select_rows(w, e.rows);
  const ad::Var xr = ad::select_rows(x, e.rows);
  const ad::Var x_cf = literal ? literal_candidate(wr, e.targets, x.cols()) : counterfactual_candidate(xr, wr, e.targets);
  Matrix centres(static_cast<Eigen::Index>(e.rows.size()), x.cols());
  for (std::size_t i = 0; i < e.rows.size(); ++i) {
    centres.row(static_cast<Eigen::Index>(i)) = clusters.nearest(x.value().row(e.rows[i]), e.targets[i]);
  }
  const ad::Var dist = ad::norm_rows(x_cf - x.tape()->constant(std::move(centres)));
  terms.proximity = dist.value().sum() / b;
  terms.total = terms.total + (alpha / b) * ad::sum(dist);
  return terms;
}

double early_stop_score(const ValidationMetrics& m, double pretrain_accuracy, const TrainConfig& config) {
  if (m.accuracy < pretrain_accuracy - config.accuracy_slack) return -std::numeric_limits<double>::infinity();
  if (m.validity < config.validity_gate) return -std::numeric_limits<double>::infinity();
  return config.stop_plausibility_weight * m.p_plaus - config.stop_l2_weight * m.mean_l2;
}

}  // namespace hcx
