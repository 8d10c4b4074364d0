#include "hyconex/hypernet.hpp"

#include <cmath>
#include <random>
#include <string>

#include "hyconex/error.hpp"
#include "hyconex/rng.hpp"

namespace hcx {

namespace {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(gen);
  return m;
}

std::string block_name(int b, const char* part) { return "block" + std::to_string(b) + "." + part; }

// Parameter order: in.weight, in.bias, then per block 6 entries, then head.weight, head.bias.
constexpr std::size_t kPerBlock = 6;

}  // namespace

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::uint64_t seed, std::uint64_t step,
                    std::uint64_t layer) {
  Matrix mask(rows, cols);
  const std::uint64_t key = hash_key(seed, step, layer);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = uniform_from_key(key + static_cast<std::uint64_t>(i)) < rate ? 0.0 : 1.0;
  }
  return mask;
}

HyperNet::HyperNet(HyperNetConfig config, std::uint64_t init_seed) : config_(config) {
  if (config_.input_dim < 1 || config_.num_classes < 2) throw ShapeError("hypernetwork needs D >= 1 and K >= 2");
  std::mt19937_64 gen(mix64(init_seed));
  const int d = config_.input_dim;
  const int h = config_.hidden;
  params_.add("in.weight", uniform(h, d, 1.0 / std::sqrt(d), gen));
  params_.add("in.bias", uniform(1, h, 1.0 / std::sqrt(d), gen));
  for (int b = 0; b < config_.blocks; ++b) {
    params_.add(block_name(b, "bn.gamma"), Matrix::Ones(1, h));
    params_.add(block_name(b, "bn.beta"), Matrix::Zero(1, h));
    params_.add(block_name(b, "fc1.weight"), uniform(h, h, 1.0 / std::sqrt(h), gen));
    params_.add(block_name(b, "fc1.bias"), uniform(1, h, 1.0 / std::sqrt(h), gen));
    params_.add(block_name(b, "fc2.weight"), uniform(h, h, 1.0 / std::sqrt(h), gen));
    params_.add(block_name(b, "fc2.bias"), uniform(1, h, 1.0 / std::sqrt(h), gen));
    buffers_.add(block_name(b, "bn.running_mean"), Matrix::Zero(1, h));
    buffers_.add(block_name(b, "bn.running_var"), Matrix::Ones(1, h));
  }
  std::normal_distribution<double> small(0.0, config_.head_init_scale);
  Matrix head(config_.output_dim(), h);
  for (Eigen::Index i = 0; i < head.size(); ++i) head.data()[i] = small(gen);
  params_.add("head.weight", std::move(head));
  params_.add("head.bias", Matrix::Zero(1, config_.output_dim()));
}

HyperNet::HyperNet(const HyperNet& other)
    : config_(other.config_), params_(other.params_), buffers_(other.buffers_), calls_(other.calls_.load()) {}

HyperNet& HyperNet::operator=(const HyperNet& other) {
  if (this != &other) {
    config_ = other.config_;
    params_ = other.params_;
    buffers_ = other.buffers_;
    calls_.store(other.calls_.load());
  }
  return *this;
}

ad::Var HyperNet::forward(const std::vector<ad::Var>& bound, ad::Var x, const ForwardContext& ctx) {
  const bool update = ctx.mode == NetMode::Train && ctx.batch_stats && ctx.update_running_stats;
  return run(bound, x, ctx, update ? &buffers_ : nullptr);
}

ad::Var HyperNet::forward(const std::vector<ad::Var>& bound, ad::Var x) const {
  return run(bound, x, ForwardContext{}, nullptr);
}

ad::Var HyperNet::run(const std::vector<ad::Var>& bound, ad::Var x, const ForwardContext& ctx,
                      ParamSet* running) const {
  if (bound.size() != params_.size()) throw ShapeError("hypernetwork: bound parameter list has the wrong size");
  if (x.cols() != config_.input_dim) {
    throw ShapeError("hypernetwork expects " + std::to_string(config_.input_dim) + " input features, got " +
                     std::to_string(x.cols()));
  }
  calls_.fetch_add(1);
  const bool train = ctx.mode == NetMode::Train;
  ad::Var h = ad::affine(x, bound[0], bound[1]);
  for (int b = 0; b < config_.blocks; ++b) {
    const std::size_t base = 2 + kPerBlock * static_cast<std::size_t>(b);
    ad::Var n;
    if (train && ctx.batch_stats) {
      ad::BatchStats stats;
      n = ad::batch_norm_train(h, bound[base], bound[base + 1], config_.bn_eps, &stats);
      if (running != nullptr) {
        const double rows = static_cast<double>(h.rows());
        const RowVector unbiased = rows > 1.0 ? RowVector(stats.var * (rows / (rows - 1.0))) : stats.var;
        Matrix& rm = (*running)[2 * static_cast<std::size_t>(b)];
        Matrix& rv = (*running)[2 * static_cast<std::size_t>(b) + 1];
        rm = (1.0 - config_.bn_momentum) * rm + config_.bn_momentum * stats.mean;
        rv = (1.0 - config_.bn_momentum) * rv + config_.bn_momentum * unbiased;
      }
    } else {
      n = ad::batch_norm_eval(h, bound[base], bound[base + 1], buffers_[2 * static_cast<std::size_t>(b)].row(0),
                              buffers_[2 * static_cast<std::size_t>(b) + 1].row(0), config_.bn_eps);
    }
    ad::Var u = ad::relu(ad::affine(n, bound[base + 2], bound[base + 3]));
    if (train && config_.dropout > 0.0) {
      const std::uint64_t layer = (static_cast<std::uint64_t>(ctx.pass) << 16) | static_cast<std::uint64_t>(b);
      u = ad::dropout(u, dropout_mask(u.rows(), u.cols(), config_.dropout, ctx.seed, ctx.step, layer), config_.dropout);
    }
    h = h + ad::affine(u, bound[base + 4], bound[base + 5]);
  }
  const std::size_t head = 2 + kPerBlock * static_cast<std::size_t>(config_.blocks);
  return ad::affine(h, bound[head], bound[head + 1]);
}

Matrix HyperNet::weights(const Matrix& x) const {
  ad::Tape tape(ad::Tape::Mode::Inference);
  const auto bound = params_.bind(tape, false);
  return forward(bound, tape.constant(x)).value();
}

Matrix HyperNet::logits(const Matrix& x) const { return local_logits(weights(x), x); }

Matrix HyperNet::predict_proba(const Matrix& x) const { return softmax_rows(logits(x)); }

std::vector<int> HyperNet::predict(const Matrix& x) const {
  const Matrix z = logits(x);
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(argmax(z.row(i)));
  return out;
}

FeatureImportance HyperNet::feature_importance(const RowVector& x) const {
  const Matrix xm = x;
  const Matrix w = weights(xm);
  const int d = config_.input_dim;
  FeatureImportance out;
  out.weights = Eigen::Map<const Matrix>(w.data(), config_.num_classes, d + 1);
  out.predicted_class = static_cast<int>(argmax(local_logits(w, xm).row(0)));
  out.row = out.weights.row(out.predicted_class);
  return out;
}

}  // namespace hcx
