#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hyconex/tape.hpp"
#include "hyconex/tensor.hpp"

namespace hcx {

/// Named, ordered collection of parameter matrices.
class ParamSet {
 public:
  std::size_t add(std::string name, Matrix value);

  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] const std::string& name(std::size_t i) const { return names_[i]; }
  [[nodiscard]] Matrix& operator[](std::size_t i) { return values_[i]; }
  [[nodiscard]] const Matrix& operator[](std::size_t i) const { return values_[i]; }
  [[nodiscard]] std::size_t index_of(const std::string& name) const;
  [[nodiscard]] std::size_t scalar_count() const;

  [[nodiscard]] const std::vector<Matrix>& values() const { return values_; }
  [[nodiscard]] std::vector<Matrix>& values() { return values_; }
  [[nodiscard]] const std::vector<std::string>& names() const { return names_; }

  /// Records every parameter on `tape`, as variables or as constants.
  [[nodiscard]] std::vector<ad::Var> bind(ad::Tape& tape, bool trainable) const;

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

/// Gradients of a tape w.r.t. bound parameters, in ParamSet order.
std::vector<Matrix> collect_grads(const ad::Tape& tape, const std::vector<ad::Var>& bound);

}  // namespace hcx
