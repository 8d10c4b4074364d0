#include "hyconex/optim.hpp"

#include <cmath>
#include <numbers>

#include "hyconex/error.hpp"

namespace hcx {

Adam::Adam(const ParamSet& params, AdamConfig config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params.values()) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step(ParamSet& params, const std::vector<Matrix>& grads, double lr) {
  if (grads.size() != params.size() || m_.size() != params.size()) {
    throw ShapeError("adam: gradient list does not match the parameter set");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].rows() != params[i].rows() || grads[i].cols() != params[i].cols()) {
      throw ShapeError("adam: gradient shape mismatch for " + params.name(i));
    }
    if (!grads[i].allFinite()) throw DivergenceError("non-finite gradient for parameter " + params.name(i));
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i].cwiseProduct(grads[i]);
    params[i].array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
}

double CosineSchedule::operator()(std::uint64_t t) const {
  if (total_steps == 0 || t >= total_steps) return eta_min;
  const double frac = static_cast<double>(t) / static_cast<double>(total_steps);
  return eta_min + 0.5 * (eta_max - eta_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace hcx
