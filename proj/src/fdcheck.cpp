#include "hyconex/fdcheck.hpp"

#include <algorithm>
#include <cmath>

namespace hcx {

namespace {

double evaluate(const TapeFunction& fn, const std::vector<Matrix>& point) {
  ad::Tape tape(ad::Tape::Mode::Inference);
  std::vector<ad::Var> vars;
  vars.reserve(point.size());
  for (const auto& p : point) vars.push_back(tape.variable(p));
  return fn(tape, vars).scalar();
}

}  // namespace

FdCheckResult finite_diff_check(const TapeFunction& fn, const std::vector<Matrix>& point, double h,
                                double floor) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(point.size());
  for (const auto& p : point) vars.push_back(tape.variable(p));
  tape.backward(fn(tape, vars));

  FdCheckResult result;
  std::vector<Matrix> probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const Matrix analytic = tape.grad(vars[i]);
    for (Eigen::Index j = 0; j < point[i].size(); ++j) {
      const double orig = point[i].data()[j];
      probe[i].data()[j] = orig + h;
      const double up = evaluate(fn, probe);
      probe[i].data()[j] = orig - h;
      const double down = evaluate(fn, probe);
      probe[i].data()[j] = orig;
      ++result.coordinates;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        ++result.skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.data()[j];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
    }
  }
  return result;
}

}  // namespace hcx
