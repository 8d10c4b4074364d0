#include "hyconex/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "hyconex/error.hpp"
#include "hyconex/optim.hpp"
#include "hyconex/rng.hpp"

namespace hcx {

namespace {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(gen);
  return m;
}

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

MafFlow::MafFlow(FlowConfig config, std::uint64_t init_seed) : config_(config) {
  if (config_.dim < 1 || config_.num_classes < 1) throw ShapeError("flow needs dim >= 1 and at least one class");
  std::mt19937_64 gen(mix64(init_seed));
  const int d = config_.dim, h = config_.hidden, k = config_.num_classes;
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(d + k));
  const double h_bound = 1.0 / std::sqrt(static_cast<double>(h + k));
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    params_.add(p + "in.weight", uniform(h, d, in_bound, gen));
    params_.add(p + "in.context", uniform(h, k, in_bound, gen));
    params_.add(p + "in.bias", uniform(1, h, in_bound, gen));
    for (int b = 0; b < config_.blocks; ++b) {
      const std::string q = p + "hidden" + std::to_string(b) + ".";
      params_.add(q + "weight", uniform(h, h, h_bound, gen));
      params_.add(q + "context", uniform(h, k, h_bound, gen));
      params_.add(q + "bias", uniform(1, h, h_bound, gen));
    }
    params_.add(p + "out.weight", Matrix::Zero(2 * d, h));
    params_.add(p + "out.context", Matrix::Zero(2 * d, k));
    params_.add(p + "out.bias", Matrix::Zero(1, 2 * d));
  }
  build_masks();
}

MafFlow MafFlow::identity(FlowConfig config) {
  MafFlow f(config, 0);
  for (auto& v : f.params_.values()) v.setZero();
  return f;
}

std::vector<int> MafFlow::order(int layer) const {
  std::vector<int> o(static_cast<std::size_t>(config_.dim));
  std::iota(o.begin(), o.end(), 0);
  if (layer % 2 == 1) std::reverse(o.begin(), o.end());
  return o;
}

void MafFlow::build_masks() {
  const int d = config_.dim, h = config_.hidden;
  masks_.clear();
  std::vector<int> hidden_degree(static_cast<std::size_t>(h));
  for (int u = 0; u < h; ++u) hidden_degree[static_cast<std::size_t>(u)] = u % std::max(1, d - 1) + 1;
  for (int l = 0; l < config_.layers; ++l) {
    std::vector<int> input_degree(static_cast<std::size_t>(d));
    const auto ord = order(l);
    for (int pos = 0; pos < d; ++pos) input_degree[static_cast<std::size_t>(ord[static_cast<std::size_t>(pos)])] = pos + 1;
    LayerMasks m;
    m.input.resize(h, d);
    m.hidden.resize(h, h);
    m.output.resize(2 * d, h);
    for (int u = 0; u < h; ++u) {
      for (int v = 0; v < d; ++v) {
        m.input(u, v) = hidden_degree[static_cast<std::size_t>(u)] >= input_degree[static_cast<std::size_t>(v)] ? 1.0 : 0.0;
      }
      for (int w = 0; w < h; ++w) {
        m.hidden(u, w) = hidden_degree[static_cast<std::size_t>(u)] >= hidden_degree[static_cast<std::size_t>(w)] ? 1.0 : 0.0;
      }
    }
    for (int v = 0; v < d; ++v) {
      for (int u = 0; u < h; ++u) {
        const double on = input_degree[static_cast<std::size_t>(v)] > hidden_degree[static_cast<std::size_t>(u)] ? 1.0 : 0.0;
        m.output(v, u) = on;
        m.output(d + v, u) = on;
      }
    }
    masks_.push_back(std::move(m));
  }
}

std::size_t MafFlow::layer_base(int layer) const {
  return static_cast<std::size_t>(layer) * (6 + 3 * static_cast<std::size_t>(config_.blocks));
}

Matrix MafFlow::one_hot(std::span<const int> labels) const {
  Matrix c = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), config_.num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= config_.num_classes) throw ShapeError("flow: class label out of range");
    c(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return c;
}

std::pair<Matrix, Matrix> MafFlow::conditioner(int layer, const Matrix& x, const Matrix& context) const {
  const std::size_t base = layer_base(layer);
  const LayerMasks& m = masks_[static_cast<std::size_t>(layer)];
  auto dense = [&](const Matrix& in, std::size_t p, const Matrix& mask) {
    Matrix out = in * params_[p].cwiseProduct(mask).transpose() + context * params_[p + 1].transpose();
    out.rowwise() += params_[p + 2].row(0);
    return out;
  };
  Matrix h = dense(x, base, m.input).cwiseMax(0.0);
  for (int b = 0; b < config_.blocks; ++b) h = dense(h, base + 3 + 3 * static_cast<std::size_t>(b), m.hidden).cwiseMax(0.0);
  const Matrix out = dense(h, base + 3 + 3 * static_cast<std::size_t>(config_.blocks), m.output);
  const double bound = config_.log_scale_bound;
  Matrix mu = out.leftCols(config_.dim);
  Matrix a = (bound * (out.rightCols(config_.dim).array() / bound).tanh()).matrix();
  return {std::move(mu), std::move(a)};
}

MafFlow::InverseResult MafFlow::inverse(const Matrix& x, std::span<const int> labels) const {
  if (x.cols() != config_.dim) throw ShapeError("flow: input has the wrong dimension");
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw ShapeError("flow: one label per row required");
  const Matrix context = one_hot(labels);
  InverseResult r{x, Vector::Zero(x.rows())};
  for (int l = 0; l < config_.layers; ++l) {
    auto [mu, a] = conditioner(l, r.z, context);
    r.z = ((r.z - mu).array() * (-a.array()).exp()).matrix();
    r.log_det -= a.rowwise().sum();
    if (!r.z.allFinite()) throw Error("flow layer " + std::to_string(l) + " produced non-finite values");
  }
  return r;
}

Matrix MafFlow::forward(const Matrix& z, std::span<const int> labels) const {
  if (z.cols() != config_.dim) throw ShapeError("flow: input has the wrong dimension");
  if (static_cast<Eigen::Index>(labels.size()) != z.rows()) throw ShapeError("flow: one label per row required");
  const Matrix context = one_hot(labels);
  Matrix cur = z;
  for (int l = config_.layers - 1; l >= 0; --l) {
    const auto ord = order(l);
    Matrix x = Matrix::Zero(cur.rows(), cur.cols());
    for (int v : ord) {
      auto [mu, a] = conditioner(l, x, context);
      x.col(v) = (cur.col(v).array() * a.col(v).array().exp() + mu.col(v).array()).matrix();
    }
    if (!x.allFinite()) throw Error("flow layer " + std::to_string(l) + " produced non-finite values");
    cur = std::move(x);
  }
  return cur;
}

Vector MafFlow::log_prob(const Matrix& x, std::span<const int> labels) const {
  const InverseResult r = inverse(x, labels);
  const double base = static_cast<double>(config_.dim) * kHalfLog2Pi;
  return (-0.5 * r.z.rowwise().squaredNorm()).array() - base + r.log_det.array();
}

ad::Var MafFlow::log_prob(const std::vector<ad::Var>& bound, ad::Var x, std::span<const int> labels) const {
  if (bound.size() != params_.size()) throw ShapeError("flow: bound parameter list has the wrong size");
  if (x.cols() != config_.dim) throw ShapeError("flow: input has the wrong dimension");
  ad::Tape& tape = *x.tape();
  const ad::Var context = tape.constant(one_hot(labels));
  const double lim = config_.log_scale_bound;
  ad::Var z = x;
  ad::Var log_det;
  for (int l = 0; l < config_.layers; ++l) {
    const std::size_t base = layer_base(l);
    const LayerMasks& m = masks_[static_cast<std::size_t>(l)];
    auto dense = [&](ad::Var in, std::size_t p, const Matrix& mask) {
      return ad::masked_affine(in, bound[p], mask, bound[p + 2]) + ad::affine(context, bound[p + 1]);
    };
    ad::Var h = ad::relu(dense(z, base, m.input));
    for (int b = 0; b < config_.blocks; ++b) h = ad::relu(dense(h, base + 3 + 3 * static_cast<std::size_t>(b), m.hidden));
    const ad::Var out = dense(h, base + 3 + 3 * static_cast<std::size_t>(config_.blocks), m.output);
    const ad::Var mu = ad::select_cols(out, 0, config_.dim);
    const ad::Var a = lim * ad::tanh(ad::select_cols(out, config_.dim, config_.dim) * (1.0 / lim));
    z = (z - mu) * ad::exp(-a);
    const ad::Var layer_det = -ad::sum_rows(a);
    log_det = log_det.valid() ? log_det + layer_det : layer_det;
  }
  const ad::Var base_density =
      ad::add_scalar(-0.5 * ad::squared_norm_rows(z), -static_cast<double>(config_.dim) * kHalfLog2Pi);
  return log_det.valid() ? base_density + log_det : base_density;
}

FlowFitResult fit_flow(MafFlow& flow, const Matrix& x, const std::vector<int>& labels, const FlowFitConfig& config,
                       const Augment& augment) {
  FlowFitResult result;
  if (config.epochs <= 0 || x.rows() == 0) return result;
  const auto n = static_cast<std::size_t>(x.rows());
  const std::size_t batch = std::max<std::size_t>(1, static_cast<std::size_t>(config.batch_size));
  const std::size_t per_epoch = (n + batch - 1) / batch;
  const CosineSchedule lr{config.lr, config.lr_min, per_epoch * static_cast<std::uint64_t>(config.epochs)};
  Adam adam(flow.params());
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Matrix data = x;
    if (augment) augment(data, static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 gen(hash_key(config.seed, static_cast<std::uint64_t>(epoch), 0xf10eULL));
    std::shuffle(order.begin(), order.end(), gen);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      Matrix xb(static_cast<Eigen::Index>(stop - start), x.cols());
      std::vector<int> yb;
      for (std::size_t i = start; i < stop; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = data.row(static_cast<Eigen::Index>(order[i]));
        yb.push_back(labels[order[i]]);
      }
      ad::Tape tape;
      const auto bound = flow.params().bind(tape, true);
      const ad::Var loss = -ad::mean(flow.log_prob(bound, tape.constant(std::move(xb)), yb));
      if (!std::isfinite(loss.scalar())) {
        throw DivergenceError("flow fit diverged at step " + std::to_string(result.steps));
      }
      tape.backward(loss);
      try {
        adam.step(flow.params(), collect_grads(tape, bound), lr(result.steps));
      } catch (const DivergenceError& e) {
        throw DivergenceError("flow fit diverged at step " + std::to_string(result.steps) + ": " + e.what());
      }
      ++result.steps;
      total += loss.scalar() * static_cast<double>(stop - start);
    }
    result.epoch_nll.push_back(total / static_cast<double>(n));
  }
  result.final_nll = result.epoch_nll.back();
  return result;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

DensityThresholds thresholds_from_log_densities(const Vector& log_density, const std::vector<int>& labels,
                                                int num_classes) {
  DensityThresholds t;
  t.global = median(std::vector<double>(log_density.data(), log_density.data() + log_density.size()));
  for (int c = 0; c < num_classes; ++c) {
    std::vector<double> vals;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) vals.push_back(log_density(static_cast<Eigen::Index>(i)));
    }
    t.per_class.push_back(vals.empty() ? t.global : median(std::move(vals)));
  }
  return t;
}

DensityThresholds density_thresholds(const MafFlow& flow, const Matrix& x, const std::vector<int>& labels) {
  return thresholds_from_log_densities(flow.log_prob(x, labels), labels, flow.config().num_classes);
}

}  // namespace hcx
