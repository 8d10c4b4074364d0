#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "hyconex/tensor.hpp"

// Reverse-mode automatic differentiation over a recorded tape of dense
// matrix operations. Every value is a 2-D row-major matrix; a scalar is 1x1.
namespace hcx::ad {

enum class OpKind : std::uint8_t {
  Leaf,
  Affine,
  MaskedAffine,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  Relu,
  Tanh,
  Sigmoid,
  Exp,
  BatchNormTrain,
  BatchNormEval,
  Dropout,
  SoftmaxCrossEntropy,
  Softmax,
  LogSumExp,
  SquaredNormRows,
  MeanSquareRows,
  L1Rows,
  NormRows,
  Hinge,
  Mean,
  Sum,
  SumRows,
  ConcatCols,
  ConcatRows,
  SelectRows,
  SelectCols,
  GatherBlocks,
  LocalLogits,
  kCount  // sentinel, not an op
};

std::string_view op_name(OpKind kind);
bool is_supported(OpKind kind);

class Tape;

/// Handle to a value recorded on a tape. Cheap to copy.
class Var {
 public:
  Var() = default;

  [[nodiscard]] bool valid() const { return tape_ != nullptr && id_ >= 0; }
  [[nodiscard]] Tape* tape() const { return tape_; }
  [[nodiscard]] int id() const { return id_; }
  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 variable.
  [[nodiscard]] double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// Reverse-sweep callback: receives the tape, the node's own id and its output gradient.
  using Backward = std::function<void(Tape&, int self, const Matrix& out_grad)>;

  enum class Mode {
    Record,     // keep backward closures
    Inference,  // forward values only
  };

  explicit Tape(Mode mode = Mode::Record) : mode_(mode) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);
  Var scalar_constant(double v);

  [[nodiscard]] const Matrix& value(Var v) const;
  /// Gradient of the last backward() target w.r.t. `v`; zeros when `v` was not reached.
  [[nodiscard]] Matrix grad(Var v) const;
  [[nodiscard]] OpKind kind(Var v) const;
  [[nodiscard]] bool requires_grad(Var v) const;
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] Mode mode() const { return mode_; }

  /// Runs the reverse sweep from a 1x1 `loss`. Each record is visited at most once.
  void backward(Var loss);

  /// Appends an op record. Fails immediately for unsupported kinds or
  /// inputs that belong to another tape.
  Var record(OpKind kind, Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(OpKind kind, Matrix value, std::span<const Var> inputs, Backward backward);

  /// Adds `g` into the gradient slot of node `id` (no-op for constants).
  void accumulate(int id, const Matrix& g);
  [[nodiscard]] bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  [[nodiscard]] const Matrix& value_at(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    Matrix value;
    Matrix grad;  // empty until something flows in
    bool requires_grad = false;
    Backward backward;
  };

  Mode mode_;
  std::vector<Node> nodes_;
};

// --- ops -------------------------------------------------------------------

/// x * W^T + b with W shaped (out, in) and b shaped (1, out). `bias` may be an invalid Var.
Var affine(Var x, Var weight, Var bias = {});
/// affine() with W replaced by W .* mask; the mask is a fixed 0/1 matrix.
Var masked_affine(Var x, Var weight, const Matrix& mask, Var bias = {});

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);
Var exp(Var x);

struct BatchStats {
  RowVector mean;
  RowVector var;  // biased (population) variance
};

/// Training-mode batch normalisation over rows. Fills `stats` with the batch moments.
Var batch_norm_train(Var x, Var gamma, Var beta, double eps, BatchStats* stats = nullptr);
/// Evaluation-mode batch normalisation with fixed statistics.
Var batch_norm_eval(Var x, Var gamma, Var beta, const RowVector& mean, const RowVector& var,
                    double eps);

/// Inverted dropout with a fixed keep-mask of zeros and ones.
Var dropout(Var x, const Matrix& keep_mask, double rate);

/// Per-row -log softmax(z)_label, shape (B, 1). Computed in the max-shifted form.
Var softmax_cross_entropy(Var logits, std::span<const int> labels);
Var softmax(Var logits);
Var logsumexp(Var logits);

Var squared_norm_rows(Var x);
Var mean_square_rows(Var x);
Var l1_rows(Var x);
/// Euclidean row norms; the gradient at a zero row is taken as zero.
Var norm_rows(Var x);
/// max(x, 0) with gradient 0 at x == 0.
Var hinge(Var x);

Var mean(Var x);
Var sum(Var x);
Var sum_rows(Var x);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var select_rows(Var x, std::span<const int> rows);
Var select_cols(Var x, Eigen::Index begin, Eigen::Index count);
/// For each row b, the `width` columns starting at blocks[b]*stride + offset.
Var gather_blocks(Var x, std::span<const int> blocks, Eigen::Index stride, Eigen::Index offset,
                  Eigen::Index width);
/// Logits of per-row local linear classifiers; see hcx::local_logits.
Var local_logits(Var weights, Var x);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator-(Var a) { return scale(a, -1.0); }

}  // namespace hcx::ad
