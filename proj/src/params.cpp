#include "hyconex/params.hpp"

#include "hyconex/error.hpp"

namespace hcx {

std::size_t ParamSet::add(std::string name, Matrix value) {
  for (const auto& n : names_) {
    if (n == name) throw ShapeError("duplicate parameter name " + name);
  }
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::size_t ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw ShapeError("no parameter named " + name);
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

std::vector<ad::Var> ParamSet::bind(ad::Tape& tape, bool trainable) const {
  std::vector<ad::Var> out;
  out.reserve(values_.size());
  for (const auto& v : values_) out.push_back(trainable ? tape.variable(v) : tape.constant(v));
  return out;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.names_ != b.names_) return false;
  for (std::size_t i = 0; i < a.values_.size(); ++i) {
    const Matrix& x = a.values_[i];
    const Matrix& y = b.values_[i];
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (!(x.array() == y.array()).all()) return false;
  }
  return true;
}

std::vector<Matrix> collect_grads(const ad::Tape& tape, const std::vector<ad::Var>& bound) {
  std::vector<Matrix> grads;
  grads.reserve(bound.size());
  for (const auto& v : bound) grads.push_back(tape.grad(v));
  return grads;
}

}  // namespace hcx
