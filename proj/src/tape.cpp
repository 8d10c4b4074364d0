#include "hyconex/tape.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "hyconex/error.hpp"

namespace hcx::ad {

namespace {

constexpr std::array<std::string_view, static_cast<std::size_t>(OpKind::kCount)> kOpNames = {
    "leaf",        "affine",      "masked_affine", "add",
    "sub",         "mul",         "scale",         "add_scalar",
    "relu",        "tanh",        "sigmoid",       "exp",
    "batch_norm_train", "batch_norm_eval", "dropout", "softmax_cross_entropy",
    "softmax",     "logsumexp",   "squared_norm_rows", "mean_square_rows",
    "l1_rows",     "norm_rows",   "hinge",         "mean",
    "sum",         "sum_rows",    "concat_cols",   "concat_rows",
    "select_rows", "select_cols", "gather_blocks", "local_logits",
};

Tape& tape_of(Var v) {
  if (!v.valid()) throw ShapeError("operation on an empty Var");
  return *v.tape();
}

Tape& common_tape(Var a, Var b) {
  Tape& t = tape_of(a);
  if (&tape_of(b) != &t) throw ShapeError("operands recorded on different tapes");
  return t;
}

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << 'x' << m.cols();
  return os.str();
}

void require_same_shape(std::string_view op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

}  // namespace

std::string_view op_name(OpKind kind) {
  const auto i = static_cast<std::size_t>(kind);
  return i < kOpNames.size() ? kOpNames[i] : std::string_view("unsupported");
}

bool is_supported(OpKind kind) { return static_cast<std::size_t>(kind) < kOpNames.size(); }

const Matrix& Var::value() const {
  if (!valid()) throw ShapeError("value() of an empty Var");
  return tape_->value(*this);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("scalar() of a " + shape_str(v) + " value");
  return v(0, 0);
}

Var Tape::constant(Matrix value) { return record(OpKind::Leaf, std::move(value), {}, nullptr); }

Var Tape::variable(Matrix value) {
  Var v = record(OpKind::Leaf, std::move(value), {}, nullptr);
  nodes_.back().requires_grad = true;
  return v;
}

Var Tape::scalar_constant(double v) { return constant(Matrix::Constant(1, 1, v)); }

const Matrix& Tape::value(Var v) const {
  if (v.tape() != this) throw ShapeError("Var belongs to another tape");
  return nodes_[static_cast<std::size_t>(v.id())].value;
}

Matrix Tape::grad(Var v) const {
  if (v.tape() != this) throw ShapeError("Var belongs to another tape");
  const Node& n = nodes_[static_cast<std::size_t>(v.id())];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

OpKind Tape::kind(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].kind; }

bool Tape::requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].requires_grad; }

Var Tape::record(OpKind kind, Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  return record(kind, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(OpKind kind, Matrix value, std::span<const Var> inputs, Backward backward) {
  if (!is_supported(kind)) {
    throw ShapeError("unsupported op kind " + std::to_string(static_cast<int>(kind)));
  }
  bool needs = false;
  for (const Var& in : inputs) {
    if (!in.valid()) continue;
    if (in.tape() != this) throw ShapeError(std::string(op_name(kind)) + ": input from another tape");
    needs = needs || nodes_[static_cast<std::size_t>(in.id())].requires_grad;
  }
  Node node;
  node.kind = kind;
  node.value = std::move(value);
  node.requires_grad = needs;
  if (needs && mode_ == Mode::Record) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  if (mode_ != Mode::Record) throw ShapeError("backward() on an inference tape");
  if (loss.tape() != this) throw ShapeError("loss belongs to another tape");
  if (value(loss).size() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_str(value(loss)));
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[static_cast<std::size_t>(loss.id())].grad = Matrix::Ones(1, 1);
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0 || !n.backward) continue;
    // The closure may append to other nodes' gradients but never to its own.
    const Matrix g = n.grad;
    n.backward(*this, i, g);
  }
}

// --- linear ----------------------------------------------------------------

Var affine(Var x, Var weight, Var bias) {
  Tape& t = common_tape(x, weight);
  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();
  if (xv.cols() != wv.cols()) {
    throw ShapeError("affine: input " + shape_str(xv) + " vs weight " + shape_str(wv));
  }
  Matrix y(xv.rows(), wv.rows());
  y.noalias() = xv * wv.transpose();
  if (bias.valid()) {
    const Matrix& bv = bias.value();
    if (bv.rows() != 1 || bv.cols() != wv.rows()) {
      throw ShapeError("affine: bias " + shape_str(bv) + " for weight " + shape_str(wv));
    }
    y.rowwise() += bv.row(0);
  }
  const int xi = x.id(), wi = weight.id(), bi = bias.valid() ? bias.id() : -1;
  return t.record(OpKind::Affine, std::move(y), {x, weight, bias},
                  [xi, wi, bi](Tape& tp, int, const Matrix& g) {
                    if (tp.needs_grad(xi)) tp.accumulate(xi, g * tp.value_at(wi));
                    if (tp.needs_grad(wi)) tp.accumulate(wi, g.transpose() * tp.value_at(xi));
                    if (bi >= 0 && tp.needs_grad(bi)) tp.accumulate(bi, g.colwise().sum());
                  });
}

Var masked_affine(Var x, Var weight, const Matrix& mask, Var bias) {
  Tape& t = common_tape(x, weight);
  require_same_shape("masked_affine", weight.value(), mask);
  const Matrix& xv = x.value();
  Matrix w_eff = weight.value().cwiseProduct(mask);
  if (xv.cols() != w_eff.cols()) {
    throw ShapeError("masked_affine: input " + shape_str(xv) + " vs weight " + shape_str(w_eff));
  }
  Matrix y(xv.rows(), w_eff.rows());
  y.noalias() = xv * w_eff.transpose();
  if (bias.valid()) {
    const Matrix& bv = bias.value();
    if (bv.rows() != 1 || bv.cols() != w_eff.rows()) {
      throw ShapeError("masked_affine: bias " + shape_str(bv));
    }
    y.rowwise() += bv.row(0);
  }
  const int xi = x.id(), wi = weight.id(), bi = bias.valid() ? bias.id() : -1;
  return t.record(OpKind::MaskedAffine, std::move(y), {x, weight, bias},
                  [xi, wi, bi, mask, w_eff = std::move(w_eff)](Tape& tp, int, const Matrix& g) {
                    if (tp.needs_grad(xi)) tp.accumulate(xi, g * w_eff);
                    if (tp.needs_grad(wi)) {
                      Matrix gw = g.transpose() * tp.value_at(xi);
                      tp.accumulate(wi, gw.cwiseProduct(mask));
                    }
                    if (bi >= 0 && tp.needs_grad(bi)) tp.accumulate(bi, g.colwise().sum());
                  });
}

// --- elementwise -----------------------------------------------------------

Var add(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape("add", a.value(), b.value());
  const int ai = a.id(), bi = b.id();
  return t.record(OpKind::Add, a.value() + b.value(), {a, b}, [ai, bi](Tape& tp, int, const Matrix& g) {
    tp.accumulate(ai, g);
    tp.accumulate(bi, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape("sub", a.value(), b.value());
  const int ai = a.id(), bi = b.id();
  return t.record(OpKind::Sub, a.value() - b.value(), {a, b}, [ai, bi](Tape& tp, int, const Matrix& g) {
    tp.accumulate(ai, g);
    if (tp.needs_grad(bi)) tp.accumulate(bi, -g);
  });
}

Var mul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape("mul", a.value(), b.value());
  const int ai = a.id(), bi = b.id();
  return t.record(OpKind::Mul, a.value().cwiseProduct(b.value()), {a, b},
                  [ai, bi](Tape& tp, int, const Matrix& g) {
                    if (tp.needs_grad(ai)) tp.accumulate(ai, g.cwiseProduct(tp.value_at(bi)));
                    if (tp.needs_grad(bi)) tp.accumulate(bi, g.cwiseProduct(tp.value_at(ai)));
                  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  const int ai = a.id();
  return t.record(OpKind::Scale, a.value() * s, {a},
                  [ai, s](Tape& tp, int, const Matrix& g) { tp.accumulate(ai, g * s); });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a);
  const int ai = a.id();
  return t.record(OpKind::AddScalar, (a.value().array() + s).matrix(), {a},
                  [ai](Tape& tp, int, const Matrix& g) { tp.accumulate(ai, g); });
}

Var relu(Var x) {
  Tape& t = tape_of(x);
  const int xi = x.id();
  return t.record(OpKind::Relu, x.value().cwiseMax(0.0), {x}, [xi](Tape& tp, int, const Matrix& g) {
    tp.accumulate(xi, (tp.value_at(xi).array() > 0.0).select(g.array(), 0.0).matrix());
  });
}


Var tanh(Var x) {
  Tape& t = tape_of(x);
  const int xi = x.id();
  return t.record(OpKind::Tanh, x.value().array().tanh().matrix(), {x},
                  [xi](Tape& tp, int self, const Matrix& g) {
                    const auto y = tp.value_at(self).array();
                    tp.accumulate(xi, (g.array() * (1.0 - y * y)).matrix());
                  });
}

Var sigmoid(Var x) {
  Tape& t = tape_of(x);
  const int xi = x.id();
  Matrix y = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
  return t.record(OpKind::Sigmoid, std::move(y), {x}, [xi](Tape& tp, int self, const Matrix& g) {
    const auto s = tp.value_at(self).array();
    tp.accumulate(xi, (g.array() * s * (1.0 - s)).matrix());
  });
}

Var exp(Var x) {
  Tape& t = tape_of(x);
  const int xi = x.id();
  return t.record(OpKind::Exp, x.value().array().exp().matrix(), {x},
                  [xi](Tape& tp, int self, const Matrix& g) {
                    tp.accumulate(xi, g.cwiseProduct(tp.value_at(self)));
                  });
}

// --- normalisation and regularisation ----------------------------------------

Var batch_norm_train(Var x, Var gamma, Var beta, double eps, BatchStats* stats) {
  Tape& t = common_tape(x, gamma);
  const Matrix& xv = x.value();
  const Eigen::Index n = xv.rows();
  if (n < 1) throw ShapeError("batch_norm_train: empty batch");
  if (gamma.value().rows() != 1 || gamma.value().cols() != xv.cols()) {
    throw ShapeError("batch_norm_train: gamma " + shape_str(gamma.value()) + " for input " + shape_str(xv));
  }
  require_same_shape("batch_norm_train", gamma.value(), beta.value());
  const RowVector mu = xv.colwise().mean();
  Matrix centered = xv.rowwise() - mu;
  const RowVector var = centered.array().square().colwise().mean().matrix();
  const RowVector inv_std = (var.array() + eps).rsqrt().matrix();
  Matrix xhat = centered.array().rowwise() * inv_std.array();
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  if (stats != nullptr) {
    stats->mean = mu;
    stats->var = var;
  }
  const int xi = x.id(), gi = gamma.id(), bi = beta.id();
  return t.record(OpKind::BatchNormTrain, std::move(y), {x, gamma, beta},
                  [xi, gi, bi, xhat = std::move(xhat), inv_std](Tape& tp, int, const Matrix& g) {
                    if (tp.needs_grad(bi)) tp.accumulate(bi, g.colwise().sum());
                    if (tp.needs_grad(gi)) tp.accumulate(gi, g.cwiseProduct(xhat).colwise().sum());
                    if (tp.needs_grad(xi)) {
                      const auto rows = static_cast<double>(g.rows());
                      const Matrix dxhat = g.array().rowwise() * tp.value_at(gi).row(0).array();
                      const RowVector sum_d = dxhat.colwise().sum();
                      const RowVector sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
                      Matrix dx = (rows * dxhat.array()).rowwise() - sum_d.array();
                      dx.array() -= xhat.array().rowwise() * sum_dx.array();
                      dx.array().rowwise() *= (inv_std.array() / rows);
                      tp.accumulate(xi, dx);
                    }
                  });
}

Var batch_norm_eval(Var x, Var gamma, Var beta, const RowVector& mean, const RowVector& var, double eps) {
  Tape& t = common_tape(x, gamma);
  const Matrix& xv = x.value();
  if (mean.size() != xv.cols() || var.size() != xv.cols()) {
    throw ShapeError("batch_norm_eval: running statistics do not match input " + shape_str(xv));
  }
  const RowVector inv_std = (var.array() + eps).rsqrt().matrix();
  Matrix xhat = (xv.rowwise() - mean).array().rowwise() * inv_std.array();
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  const int xi = x.id(), gi = gamma.id(), bi = beta.id();
  return t.record(OpKind::BatchNormEval, std::move(y), {x, gamma, beta},
                  [xi, gi, bi, xhat = std::move(xhat), inv_std](Tape& tp, int, const Matrix& g) {
                    if (tp.needs_grad(bi)) tp.accumulate(bi, g.colwise().sum());
                    if (tp.needs_grad(gi)) tp.accumulate(gi, g.cwiseProduct(xhat).colwise().sum());
                    if (tp.needs_grad(xi)) {
                      const RowVector s = tp.value_at(gi).row(0).cwiseProduct(inv_std);
                      tp.accumulate(xi, (g.array().rowwise() * s.array()).matrix());
                    }
                  });
}

Var dropout(Var x, const Matrix& keep_mask, double rate) {
  Tape& t = tape_of(x);
  require_same_shape("dropout", x.value(), keep_mask);
  if (rate < 0.0 || rate >= 1.0) throw ShapeError("dropout: rate must lie in [0, 1)");
  Matrix m = keep_mask / (1.0 - rate);
  Matrix y = x.value().cwiseProduct(m);
  const int xi = x.id();
  return t.record(OpKind::Dropout, std::move(y), {x}, [xi, m = std::move(m)](Tape& tp, int, const Matrix& g) {
    tp.accumulate(xi, g.cwiseProduct(m));
  });
}

// --- classification --------------------------------------------------------

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  Tape& t = tape_of(logits);
  const Matrix& z = logits.value();
  if (static_cast<Eigen::Index>(labels.size()) != z.rows()) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     shape_str(z) + " logits");
  }
  Matrix p = softmax_rows(z);
  const Vector lse = logsumexp_rows(z);
  Matrix loss(z.rows(), 1);
  std::vector<int> y(labels.begin(), labels.end());
  for (Eigen::Index b = 0; b < z.rows(); ++b) {
    if (y[static_cast<std::size_t>(b)] < 0 || y[static_cast<std::size_t>(b)] >= z.cols()) {
      throw ShapeError("softmax_cross_entropy: label out of range");
    }
    loss(b, 0) = lse(b) - z(b, y[static_cast<std::size_t>(b)]);
  }
  const int zi = logits.id();
  return t.record(OpKind::SoftmaxCrossEntropy, std::move(loss), {logits},
                  [zi, p = std::move(p), y = std::move(y)](Tape& tp, int, const Matrix& g) {
                    Matrix d = p;
                    for (Eigen::Index b = 0; b < d.rows(); ++b) {
                      d(b, y[static_cast<std::size_t>(b)]) -= 1.0;
                      d.row(b) *= g(b, 0);
                    }
                    tp.accumulate(zi, d);
                  });
}

Var softmax(Var logits) {
  Tape& t = tape_of(logits);
  const int zi = logits.id();
  return t.record(OpKind::Softmax, softmax_rows(logits.value()), {logits},
                  [zi](Tape& tp, int self, const Matrix& g) {
                    const Matrix& p = tp.value_at(self);
                    const Vector inner = g.cwiseProduct(p).rowwise().sum();
                    tp.accumulate(zi, ((g.colwise() - inner).array() * p.array()).matrix());
                  });
}

Var logsumexp(Var logits) {
  Tape& t = tape_of(logits);
  const int zi = logits.id();
  Matrix out = logsumexp_rows(logits.value());
  return t.record(OpKind::LogSumExp, std::move(out), {logits}, [zi](Tape& tp, int, const Matrix& g) {
    Matrix p = softmax_rows(tp.value_at(zi));
    p.array().colwise() *= g.col(0).array();
    tp.accumulate(zi, p);
  });
}

// --- reductions and distances ----------------------------------------------

Var squared_norm_rows(Var x) {
  Tape& t = tape_of(x);
  const int xi = x.id();
  return t.record(OpKind::SquaredNormRows, x.value().rowwise().squaredNorm(), {x},
                  [xi](Tape& tp, int, const Matrix& g) {
                    Matrix d = 2.0 * tp.value_at(xi);
                    d.array().colwise() *= g.col(0).array();
                    tp.accumulate(xi, d);
                  });
}

Var mean_square_rows(Var x) {
  Tape& t = tape_of(x);
  const int xi = x.id();
  const auto cols = static_cast<double>(x.value().cols());
  return t.record(OpKind::MeanSquareRows, x.value().rowwise().squaredNorm() / cols, {x},
                  [xi, cols](Tape& tp, int, const Matrix& g) {
                    Matrix d = (2.0 / cols) * tp.value_at(xi);
                    d.array().colwise() *= g.col(0).array();
                    tp.accumulate(xi, d);
                  });
}

Var l1_rows(Var x) {
  Tape& t = tape_of(x);
  const int xi = x.id();
  return t.record(OpKind::L1Rows, x.value().cwiseAbs().rowwise().sum(), {x},
                  [xi](Tape& tp, int, const Matrix& g) {
                    Matrix d = tp.value_at(xi).array().sign().matrix();
                    d.array().colwise() *= g.col(0).array();
                    tp.accumulate(xi, d);
                  });
}

Var norm_rows(Var x) {
  Tape& t = tape_of(x);
  const int xi = x.id();
  return t.record(OpKind::NormRows, x.value().rowwise().norm(), {x},
                  [xi](Tape& tp, int self, const Matrix& g) {
                    const Matrix& xv = tp.value_at(xi);
                    const Matrix& n = tp.value_at(self);
                    Matrix d = Matrix::Zero(xv.rows(), xv.cols());
                    for (Eigen::Index b = 0; b < xv.rows(); ++b) {
                      if (n(b, 0) > 0.0) d.row(b) = xv.row(b) * (g(b, 0) / n(b, 0));
                    }
                    tp.accumulate(xi, d);
                  });
}

Var hinge(Var x) {
  Tape& t = tape_of(x);
  const int xi = x.id();
  return t.record(OpKind::Hinge, x.value().cwiseMax(0.0), {x}, [xi](Tape& tp, int, const Matrix& g) {
    tp.accumulate(xi, (tp.value_at(xi).array() > 0.0).select(g.array(), 0.0).matrix());
  });
}

Var mean(Var x) {
  Tape& t = tape_of(x);
  const int xi = x.id();
  const Matrix& v = x.value();
  if (v.size() == 0) throw ShapeError("mean of an empty value");
  const auto count = static_cast<double>(v.size());
  return t.record(OpKind::Mean, Matrix::Constant(1, 1, v.sum() / count), {x},
                  [xi, count, r = v.rows(), c = v.cols()](Tape& tp, int, const Matrix& g) {
                    tp.accumulate(xi, Matrix::Constant(r, c, g(0, 0) / count));
                  });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  const int xi = x.id();
  const Matrix& v = x.value();
  return t.record(OpKind::Sum, Matrix::Constant(1, 1, v.sum()), {x},
                  [xi, r = v.rows(), c = v.cols()](Tape& tp, int, const Matrix& g) {
                    tp.accumulate(xi, Matrix::Constant(r, c, g(0, 0)));
                  });
}

Var sum_rows(Var x) {
  Tape& t = tape_of(x);
  const int xi = x.id();
  const Eigen::Index c = x.value().cols();
  return t.record(OpKind::SumRows, x.value().rowwise().sum(), {x}, [xi, c](Tape& tp, int, const Matrix& g) {
    tp.accumulate(xi, g.col(0).replicate(1, c));
  });
}

// --- structural ------------------------------------------------------------

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    if (&tape_of(p) != &t) throw ShapeError("concat_cols: inputs from different tapes");
    if (p.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    ids.push_back(p.id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.record(OpKind::ConcatCols, std::move(out), parts,
                  [ids = std::move(ids), widths = std::move(widths)](Tape& tp, int, const Matrix& g) {
                    Eigen::Index off = 0;
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                      if (tp.needs_grad(ids[i])) tp.accumulate(ids[i], g.middleCols(off, widths[i]));
                      off += widths[i];
                    }
                  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Tape& t = tape_of(parts.front());
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> heights;
  for (const Var& p : parts) {
    if (&tape_of(p) != &t) throw ShapeError("concat_rows: inputs from different tapes");
    if (p.cols() != cols) throw ShapeError("concat_rows: column count mismatch");
    ids.push_back(p.id());
    heights.push_back(p.rows());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return t.record(OpKind::ConcatRows, std::move(out), parts,
                  [ids = std::move(ids), heights = std::move(heights)](Tape& tp, int, const Matrix& g) {
                    Eigen::Index off = 0;
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                      if (tp.needs_grad(ids[i])) tp.accumulate(ids[i], g.middleRows(off, heights[i]));
                      off += heights[i];
                    }
                  });
}

Var select_rows(Var x, std::span<const int> rows) {
  Tape& t = tape_of(x);
  const Matrix& v = x.value();
  std::vector<int> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Eigen::Index>(idx.size()), v.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= v.rows()) throw ShapeError("select_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = v.row(idx[i]);
  }
  const int xi = x.id();
  return t.record(OpKind::SelectRows, std::move(out), {x},
                  [xi, idx = std::move(idx), r = v.rows()](Tape& tp, int, const Matrix& g) {
                    Matrix d = Matrix::Zero(r, g.cols());
                    for (std::size_t i = 0; i < idx.size(); ++i) d.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
                    tp.accumulate(xi, d);
                  });
}

Var select_cols(Var x, Eigen::Index begin, Eigen::Index count) {
  Tape& t = tape_of(x);
  const Matrix& v = x.value();
  if (begin < 0 || count < 0 || begin + count > v.cols()) throw ShapeError("select_cols: range out of bounds");
  const int xi = x.id();
  return t.record(OpKind::SelectCols, v.middleCols(begin, count), {x},
                  [xi, begin, r = v.rows(), c = v.cols()](Tape& tp, int, const Matrix& g) {
                    Matrix d = Matrix::Zero(r, c);
                    d.middleCols(begin, g.cols()) = g;
                    tp.accumulate(xi, d);
                  });
}

Var gather_blocks(Var x, std::span<const int> blocks, Eigen::Index stride, Eigen::Index offset,
                  Eigen::Index width) {
  Tape& t = tape_of(x);
  const Matrix& v = x.value();
  if (static_cast<Eigen::Index>(blocks.size()) != v.rows()) throw ShapeError("gather_blocks: one block per row");
  std::vector<Eigen::Index> starts(blocks.size());
  Matrix out(v.rows(), width);
  for (Eigen::Index b = 0; b < v.rows(); ++b) {
    const Eigen::Index s = blocks[static_cast<std::size_t>(b)] * stride + offset;
    if (blocks[static_cast<std::size_t>(b)] < 0 || s + width > v.cols()) {
      throw ShapeError("gather_blocks: block out of range");
    }
    starts[static_cast<std::size_t>(b)] = s;
    out.row(b) = v.row(b).segment(s, width);
  }
  const int xi = x.id();
  return t.record(OpKind::GatherBlocks, std::move(out), {x},
                  [xi, starts = std::move(starts), c = v.cols()](Tape& tp, int, const Matrix& g) {
                    Matrix d = Matrix::Zero(g.rows(), c);
                    for (Eigen::Index b = 0; b < g.rows(); ++b) {
                      d.row(b).segment(starts[static_cast<std::size_t>(b)], g.cols()) = g.row(b);
                    }
                    tp.accumulate(xi, d);
                  });
}

Var local_logits(Var weights, Var x) {
  Tape& t = common_tape(weights, x);
  const Matrix& w = weights.value();
  const Matrix& xv = x.value();
  const Eigen::Index d = xv.cols();
  if (w.rows() != xv.rows() || w.cols() % (d + 1) != 0) {
    throw ShapeError("local_logits: weights " + shape_str(w) + " for input " + shape_str(xv));
  }
  const int wi = weights.id(), xi = x.id();
  return t.record(OpKind::LocalLogits, hcx::local_logits(w, xv), {weights, x},
                  [wi, xi, d](Tape& tp, int, const Matrix& g) {
                    const Matrix& wv = tp.value_at(wi);
                    const Matrix& xv2 = tp.value_at(xi);
                    const Eigen::Index k = g.cols();
                    if (tp.needs_grad(wi)) {
                      Matrix dw(wv.rows(), wv.cols());
                      for (Eigen::Index b = 0; b < wv.rows(); ++b) {
                        for (Eigen::Index c = 0; c < k; ++c) {
                          dw(b, c * (d + 1)) = g(b, c);
                          dw.row(b).segment(c * (d + 1) + 1, d) = g(b, c) * xv2.row(b);
                        }
                      }
                      tp.accumulate(wi, dw);
                    }
                    if (tp.needs_grad(xi)) {
                      Matrix dx = Matrix::Zero(xv2.rows(), d);
                      for (Eigen::Index b = 0; b < wv.rows(); ++b) {
                        for (Eigen::Index c = 0; c < k; ++c) {
                          dx.row(b) += g(b, c) * wv.row(b).segment(c * (d + 1) + 1, d);
                        }
                      }
                      tp.accumulate(xi, dx);
                    }
                  });
}

}  // namespace hcx::ad
