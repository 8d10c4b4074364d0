#pragma once

// Randomised scalar functions for finite-difference checks. Each case returns
// the function together with the point at which to check it.

#include <random>

#include "hyconex/config.hpp"
#include "hyconex/fdcheck.hpp"
#include "hyconex/losses.hpp"
#include "support.hpp"

namespace fdcase {

using hcx::Matrix;
namespace ad = hcx::ad;

struct Case {
  hcx::TapeFunction fn;
  std::vector<Matrix> point;
};

// Central differences are meaningless where h straddles a kink. Points whose
// kink inputs sit within this margin of zero are redrawn.
inline constexpr double kKinkMargin = 1e-3;

// Step for the composite losses (network, flow, hinge and distances stacked).
// Their third derivatives are large enough that the h^2 truncation term of a
// 1e-4 step alone reaches the 1e-4 tolerance on a few seeds; 1e-5 keeps the
// truncation term two orders below it while cancellation stays negligible.
inline constexpr double kCompositeStep = 1e-5;

// A network touching every supported op: affine, masked affine, elementwise
// arithmetic, relu/tanh/sigmoid/exp, both batch-norm modes, dropout with a
// fixed mask, fused CE, softmax, logsumexp, the row norms, hinge, reductions,
// concatenation, row/column selection, block gathers and local logits.
inline Case every_op(std::uint64_t seed) {
  constexpr Eigen::Index B = 5, D = 3, H = 4, K = 3;
  for (std::uint64_t attempt = 0;; ++attempt) {
    const std::uint64_t s = seed * 7919 + attempt;
    std::vector<Matrix> point{
        fixture::gaussian(B, D, s + 1),            // x
        fixture::gaussian(H, D, s + 2, 0.7),       // W1
        fixture::gaussian(1, H, s + 3, 0.3),       // b1
        (fixture::gaussian(1, H, s + 4, 0.3).array() + 1.0).matrix(),  // gamma
        fixture::gaussian(1, H, s + 5, 0.3),       // beta
        fixture::gaussian(H, D, s + 6, 0.7),       // Wm
        fixture::gaussian(K, H, s + 7, 0.7),       // W2
        fixture::gaussian(1, K, s + 8, 0.3),       // b2
        fixture::gaussian(K * (D + 1), D, s + 9, 0.5),  // Wh
    };
    Matrix mask = (fixture::gaussian(H, D, s + 10).array() > 0.0).cast<double>();
    Matrix keep = (fixture::gaussian(B, H, s + 11).array() > -0.7).cast<double>();
    Matrix run_mean = fixture::gaussian(1, H, s + 12, 0.2);
    Matrix run_var = fixture::gaussian(1, H, s + 13, 0.2).array().abs() + 0.5;
    Matrix shift = fixture::gaussian(B, K, s + 14);
    std::vector<int> labels(B);
    for (Eigen::Index i = 0; i < B; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>((s + i) % K);
    const std::vector<int> picks{4, 0, 2, 2};
    const std::vector<int> blocks{1, 0, 2, 1, 0};

    auto kinks = std::make_shared<std::vector<Matrix>>();
    hcx::TapeFunction fn = [=](ad::Tape& t, const std::vector<ad::Var>& v) {
      const ad::Var x = v[0];
      ad::Var h = ad::affine(x, v[1], v[2]);
      const ad::Var bn = ad::batch_norm_train(h, v[3], v[4], 1e-5);
      const ad::Var bn_eval = ad::batch_norm_eval(h, v[3], v[4], run_mean.row(0), run_var.row(0), 1e-5);
      h = ad::tanh(bn) + ad::sigmoid(ad::masked_affine(x, v[5], mask)) - 0.5 * bn_eval;
      kinks->push_back(h.value());
      const ad::Var r = ad::dropout(ad::relu(h), keep, 0.25);
      const ad::Var z = ad::affine(r, v[6], v[7]);
      const ad::Var ce = ad::mean(ad::softmax_cross_entropy(z, labels));
      const ad::Var sm = ad::softmax(z);
      const ad::Var lse = ad::mean(ad::logsumexp(z));
      const ad::Var gap = z - t.constant(shift);
      kinks->push_back(gap.value());
      const ad::Var hinge = ad::sum(ad::hinge(gap));
      const ad::Var sel = ad::select_rows(h, picks);
      const ad::Var cols = ad::select_cols(h, 1, 2);
      kinks->push_back(cols.value());
      const std::vector<ad::Var> cat_c{z, x};
      const std::vector<ad::Var> cat_r{sel, h};
      const ad::Var w = ad::affine(x, v[8]);
      const ad::Var ll = ad::local_logits(w, x);
      const ad::Var g = ad::gather_blocks(w, blocks, D + 1, 1, D);
      return ce + 0.3 * ad::sum(sm * sm) + 0.5 * lse + 0.2 * hinge +
             0.1 * ad::mean(ad::mean_square_rows(sel)) + 0.1 * ad::sum(ad::l1_rows(cols)) +
             0.1 * ad::mean(ad::norm_rows(ad::concat_cols(cat_c))) +
             0.05 * ad::sum(ad::sum_rows(ad::concat_rows(cat_r))) +
             0.01 * ad::sum(ad::exp(0.3 * z)) + 0.1 * ad::mean(ad::squared_norm_rows(ll)) +
             0.2 * ad::sum(ad::add_scalar(g, 1.0) * x);
    };
    {
      ad::Tape probe(ad::Tape::Mode::Inference);
      std::vector<ad::Var> vars;
      for (const auto& p : point) vars.push_back(probe.variable(p));
      (void)fn(probe, vars);
    }
    bool clear = true;
    for (const auto& k : *kinks) clear = clear && k.cwiseAbs().minCoeff() > kKinkMargin;
    if (!clear) continue;
    hcx::TapeFunction quiet = [fn, kinks](ad::Tape& t, const std::vector<ad::Var>& v) {
      kinks->clear();
      return fn(t, v);
    };
    return {quiet, point};
  }
}

// Random two-layer relu network with a cross-entropy head.
inline Case two_layer(std::uint64_t seed) {
  constexpr Eigen::Index B = 6, D = 4, H = 5, K = 3;
  for (std::uint64_t attempt = 0;; ++attempt) {
    const std::uint64_t s = seed * 104729 + attempt;
    std::vector<Matrix> point{fixture::gaussian(B, D, s + 1), fixture::gaussian(H, D, s + 2, 0.6),
                              fixture::gaussian(1, H, s + 3, 0.2), fixture::gaussian(K, H, s + 4, 0.6),
                              fixture::gaussian(1, K, s + 5, 0.2)};
    std::vector<int> labels{0, 1, 2, 0, 1, 2};
    const Matrix pre = (point[0] * point[1].transpose()).rowwise() + point[2].row(0);
    if (pre.cwiseAbs().minCoeff() <= kKinkMargin) continue;
    hcx::TapeFunction fn = [labels](ad::Tape&, const std::vector<ad::Var>& v) {
      const ad::Var z = ad::affine(ad::relu(ad::affine(v[0], v[1], v[2])), v[3], v[4]);
      return ad::mean(ad::softmax_cross_entropy(z, labels));
    };
    return {fn, point};
  }
}

// Full training objective on a 4-sample, D=2, K=2 batch, differentiated with
// respect to the inputs and every hypernetwork parameter. Dropout masks are
// keyed by the fixed context so every evaluation sees the same mask.
struct HyconexCase {
  Case c;
  std::shared_ptr<hcx::HyperNet> net;
  std::shared_ptr<hcx::MafFlow> flow;
  std::shared_ptr<hcx::DensityThresholds> thresholds;
};

inline HyconexCase hyconex(std::uint64_t seed, bool pretrain = false) {
  HyconexCase out;
  out.net = std::make_shared<hcx::HyperNet>(fixture::small_net(2, 2, seed));
  fixture::randomize(out.net->params(), seed + 17, 0.4);
  out.flow = std::make_shared<hcx::MafFlow>(fixture::random_flow(2, 2, seed + 5, 2, 6, 1, 0.2));
  const Matrix x = fixture::gaussian(4, 2, seed + 3);
  const std::vector<int> y{0, 1, 1, 0};
  // Thresholds above every candidate density keep the hinge active.
  out.thresholds = std::make_shared<hcx::DensityThresholds>(hcx::DensityThresholds{5.0, {5.0, 6.0}});
  hcx::ClusterIndex clusters;
  clusters.centers = {fixture::gaussian(2, 2, seed + 8), fixture::gaussian(3, 2, seed + 9)};

  std::vector<Matrix> point{x};
  for (const auto& p : out.net->params().values()) point.push_back(p);
  auto net = out.net;
  auto flow = out.flow;
  auto thr = out.thresholds;
  out.c.point = point;
  out.c.fn = [=](ad::Tape& t, const std::vector<ad::Var>& v) {
    hcx::LossContext ctx;
    ctx.net = net.get();
    ctx.net_bound.assign(v.begin() + 1, v.end());
    ctx.primary = hcx::ForwardContext{hcx::NetMode::Train, seed, 3, 0, false};
    ctx.shifted = hcx::ForwardContext{hcx::NetMode::Train, seed, 3, 1, false, false};
    ctx.flow = hcx::FlowTerm{flow.get(), thr.get(), true};
    ctx.flow_bound = flow->params().bind(t, false);
    if (pretrain) return hcx::pretrain_loss(ctx, v[0], y, clusters, 0.8, false).total;
    return hcx::hyconex_loss(ctx, v[0], y, hcx::Alphas{0.8, 0.1, 0.1}, hcx::LossToggles{}).total;
  };
  return out;
}

// log p_F(x|y) summed over a batch, w.r.t. the inputs and all flow parameters.
inline Case flow_log_prob(std::uint64_t seed) {
  auto flow = std::make_shared<hcx::MafFlow>(fixture::random_flow(3, 2, seed, 2, 6, 2, 0.3));
  std::vector<Matrix> point{fixture::gaussian(4, 3, seed + 1)};
  for (const auto& p : flow->params().values()) point.push_back(p);
  const std::vector<int> y{1, 0, 0, 1};
  hcx::TapeFunction fn = [flow, y](ad::Tape&, const std::vector<ad::Var>& v) {
    const std::vector<ad::Var> bound(v.begin() + 1, v.end());
    return ad::sum(flow->log_prob(bound, v[0], y));
  };
  return {fn, point};
}

}  // namespace fdcase
