#include <doctest.h>

#include <cmath>
#include <limits>

#include "fd_cases.hpp"
#include "hyconex/error.hpp"
#include "hyconex/optim.hpp"

using namespace hcx;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

TEST_CASE("relu gradient is the step function") {
  for (auto [x, want] : {std::pair{2.0, 1.0}, std::pair{-1.0, 0.0}}) {
    ad::Tape t;
    const ad::Var v = t.variable(scalar(x));
    t.backward(ad::sum(ad::relu(v)));
    CHECK(t.grad(v)(0, 0) == want);
  }
}

TEST_CASE("gradient of half the squared norm is the point itself") {
  ad::Tape t;
  Matrix x(1, 2);
  x << 3.0, -4.0;
  const ad::Var v = t.variable(x);
  t.backward(0.5 * ad::sum(ad::squared_norm_rows(v)));
  CHECK(t.grad(v)(0, 0) == doctest::Approx(3.0));
  CHECK(t.grad(v)(0, 1) == doctest::Approx(-4.0));
}

TEST_CASE("hinge and l1 take a zero subgradient at the kink") {
  ad::Tape t;
  const ad::Var v = t.variable(Matrix::Zero(1, 3));
  t.backward(ad::sum(ad::hinge(v)) + ad::sum(ad::l1_rows(v)));
  CHECK(t.grad(v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unreached variables get zero gradient") {
  ad::Tape t;
  const ad::Var a = t.variable(scalar(2.0));
  const ad::Var b = t.variable(Matrix::Ones(2, 2));
  t.backward(ad::sum(a * a));
  CHECK(t.grad(a)(0, 0) == doctest::Approx(4.0));
  CHECK(t.grad(b).rows() == 2);
  CHECK(t.grad(b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unsupported op kinds fail when recorded") {
  ad::Tape t;
  const ad::Var a = t.variable(scalar(1.0));
  CHECK_THROWS_AS(t.record(ad::OpKind::kCount, scalar(1.0), {a}, nullptr), ShapeError);
}

TEST_CASE("shape mismatches fail when recorded") {
  ad::Tape t;
  CHECK_THROWS_AS(ad::add(t.variable(Matrix::Ones(2, 2)), t.variable(Matrix::Ones(2, 3))), ShapeError);
  CHECK_THROWS_AS(ad::affine(t.variable(Matrix::Ones(2, 3)), t.variable(Matrix::Ones(4, 2))), ShapeError);
}

TEST_CASE("inference tapes refuse backward") {
  ad::Tape t(ad::Tape::Mode::Inference);
  const ad::Var a = t.variable(scalar(1.0));
  CHECK_THROWS_AS(t.backward(ad::sum(a)), ShapeError);
}

TEST_CASE("finite differences on x squared are accurate to truncation order") {
  const auto r = finite_diff_check([](ad::Tape&, const std::vector<ad::Var>& v) { return v[0] * v[0]; },
                                   {scalar(1.0)});
  CHECK(r.max_rel_error < 1e-8);
  CHECK(r.coordinates == 1);
}

TEST_CASE("finite differences on a constant function report zero error") {
  const auto r = finite_diff_check(
      [](ad::Tape& t, const std::vector<ad::Var>&) { return t.scalar_constant(3.0); }, {Matrix::Ones(2, 2)});
  CHECK(r.max_rel_error == 0.0);
}

TEST_CASE("finite differences skip non-finite perturbations") {
  // log-like blow-up: exp(1/x) style via exp of a huge scale near x = 0
  const auto r = finite_diff_check(
      [](ad::Tape&, const std::vector<ad::Var>& v) { return ad::sum(ad::exp(1e6 * v[0])); }, {scalar(7e-4)});
  CHECK(r.skipped == 1);
}

TEST_CASE("every op matches central differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    const auto c = fdcase::every_op(seed);
    const auto r = finite_diff_check(c.fn, c.point);
    CHECK(r.skipped == 0);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("random two-layer network matches central differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = fdcase::two_layer(seed);
    CHECK(finite_diff_check(c.fn, c.point).max_rel_error < 1e-4);
  }
}

TEST_CASE("softmax rows are a distribution and fused CE equals -log softmax") {
  ad::Tape t(ad::Tape::Mode::Inference);
  Matrix z = fixture::gaussian(20, 5, 3, 20.0).cwiseMax(-50.0).cwiseMin(50.0);
  z(0, 0) = 50.0;
  z(0, 1) = -50.0;
  const ad::Var zv = t.constant(z);
  const Matrix p = ad::softmax(zv).value();
  std::vector<int> labels;
  for (int i = 0; i < 20; ++i) labels.push_back(i % 5);
  const Matrix ce = ad::softmax_cross_entropy(zv, labels).value();
  for (Eigen::Index i = 0; i < 20; ++i) {
    CHECK(p.row(i).minCoeff() >= 0.0);
    CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-9);
    const std::vector<double> row(z.row(i).data(), z.row(i).data() + 5);
    const auto q = oracle::softmax(row);
    const int y = labels[static_cast<std::size_t>(i)];
    CHECK(std::abs(ce(i, 0) + std::log(q[static_cast<std::size_t>(y)])) < 1e-9);
  }
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  ParamSet p;
  p.add("w", fixture::gaussian(3, 2, 1));
  const Matrix before = p[0];
  Adam adam(p);
  adam.step(p, {Matrix::Zero(3, 2)}, 0.1);
  CHECK(p[0] == before);
}

TEST_CASE("adam: the first two unit-gradient steps move by lr") {
  ParamSet p;
  p.add("w", Matrix::Zero(1, 1));
  Adam adam(p);
  adam.step(p, {scalar(1.0)}, 0.1);
  CHECK(p[0](0, 0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
  adam.step(p, {scalar(1.0)}, 0.1);
  CHECK(p[0](0, 0) == doctest::Approx(-0.2).epsilon(1e-6));
  CHECK(adam.steps() == 2);
}

TEST_CASE("adam: a NaN gradient aborts the step and names the parameter") {
  ParamSet p;
  p.add("first", Matrix::Zero(1, 1));
  p.add("second", Matrix::Zero(1, 1));
  Adam adam(p);
  try {
    adam.step(p, {scalar(1.0), scalar(std::numeric_limits<double>::quiet_NaN())}, 0.1);
    FAIL("expected a divergence error");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("second") != std::string::npos);
  }
  CHECK(p[0](0, 0) == 0.0);
  CHECK(adam.steps() == 0);
}

TEST_CASE("cosine schedule endpoints, midpoint and clamp") {
  const CosineSchedule s{1e-3, 1e-5, 100};
  CHECK(s(0) == doctest::Approx(1e-3));
  CHECK(s(50) == doctest::Approx((1e-3 + 1e-5) / 2));
  CHECK(s(100) == doctest::Approx(1e-5));
  CHECK(s(1000) == doctest::Approx(1e-5));
  for (std::uint64_t t = 1; t <= 100; ++t) CHECK(s(t) <= s(t - 1));
}

TEST_CASE("identical seeds give identical parameter trajectories") {
  auto run = [] {
    const auto c = fdcase::two_layer(3);
    ParamSet p;
    for (std::size_t i = 1; i < c.point.size(); ++i) p.add("p" + std::to_string(i), c.point[i]);
    Adam adam(p);
    for (int step = 0; step < 20; ++step) {
      ad::Tape t;
      std::vector<ad::Var> vars{t.constant(c.point[0])};
      const auto bound = p.bind(t, true);
      vars.insert(vars.end(), bound.begin(), bound.end());
      t.backward(c.fn(t, vars));
      adam.step(p, collect_grads(t, bound), 1e-2);
    }
    return p;
  };
  CHECK(run() == run());
}
