#include <doctest.h>

#include <sstream>

#include "hyconex/counterfact.hpp"
#include "hyconex/preprocessor.hpp"
#include "support.hpp"

using namespace hcx;

namespace {

GroupIndex mixed_groups() {
  // One numeric coordinate followed by a three-way categorical block.
  return {FeatureGroup{0, 0, 1, ColumnKind::Numeric}, FeatureGroup{1, 1, 3, ColumnKind::Categorical}};
}

GroupIndex numeric_groups(int d) {
  GroupIndex g;
  for (int i = 0; i < d; ++i) g.push_back(FeatureGroup{i, i, 1, ColumnKind::Numeric});
  return g;
}

// D = 1, K = 2 network whose output is the constant local model
// z_0 = 0, z_1 = 2x: a logistic boundary at x = 0.
HyperNet logistic_net() {
  HyperNet net = fixture::small_net(1, 2, 1);
  for (std::size_t i = 0; i < net.params().size(); ++i) net.params()[i].setZero();
  net.params()[net.params().index_of("head.bias")](0, 3) = 2.0;
  return net;
}

}  // namespace

TEST_CASE("categorical projection snaps blocks to one-hot") {
  Matrix x(3, 4);
  x << 0.3, 0.2, 0.7, 0.1,  //
      -1.0, 0.0, 1.0, 0.0,  //
      2.0, 0.5, 0.5, 0.1;
  Matrix p = x;
  project_categorical(p, mixed_groups());
  CHECK(p.row(0) == (RowVector(4) << 0.3, 0, 1, 0).finished());
  CHECK(p.row(1) == x.row(1));
  CHECK(p.row(2) == (RowVector(4) << 2.0, 1, 0, 0).finished());
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(p.row(i).tail(3).sum() == 1.0);
}

TEST_CASE("generate_all produces K-1 counterfactuals per input from one forward") {
  const HyperNet net = fixture::small_net(2, 2, 3);
  const Matrix x = fixture::gaussian(7, 2, 1);
  const auto before = net.forward_calls();
  const CounterfactualBatch b = generate_all(net, nullptr, x, numeric_groups(2), GenerateOptions{true, false, false});
  CHECK(net.forward_calls() == before + 1);
  CHECK(b.size() == 7);
  for (std::size_t e = 0; e < b.size(); ++e) CHECK(b.target[e] != b.predicted[static_cast<std::size_t>(b.source[e])]);
}

TEST_CASE("a thousand ten-class inputs give nine thousand counterfactuals") {
  HyperNetConfig c;
  c.input_dim = 4;
  c.num_classes = 10;
  c.hidden = 16;
  c.blocks = 1;
  const HyperNet net(c, 2);
  const Matrix x = fixture::gaussian(1000, 4, 3);
  const auto before = net.forward_calls();
  const CounterfactualBatch b = generate_all(net, nullptr, x, numeric_groups(4));
  CHECK(b.size() == 9000);
  CHECK(b.inputs() == 1000);
  // One pass explains the batch; verification classifies the counterfactuals in one more.
  CHECK(net.forward_calls() == before + 2);
  CHECK(b.cf_predicted.size() == 9000);
}

TEST_CASE("counterfactual plus its translation recovers the input") {
  const HyperNet net = [] {
    HyperNet n = fixture::small_net(3, 3, 4);
    fixture::randomize(n.params(), 2, 0.3);
    return n;
  }();
  const Matrix x = fixture::gaussian(20, 3, 6);
  const CounterfactualBatch b = generate_all(net, nullptr, x, numeric_groups(3));
  for (std::size_t e = 0; e < b.size(); ++e) {
    const auto i = static_cast<Eigen::Index>(b.source[e]);
    const Matrix back = b.unprojected.row(static_cast<Eigen::Index>(e)) + b.weights.row(i).segment(b.target[e] * 4 + 1, 3);
    CHECK((back - x.row(i)).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + x.row(i).cwiseAbs().maxCoeff()));
  }
  CHECK(generate_all(net, nullptr, x, numeric_groups(3)).cf == b.cf);
}

TEST_CASE("validity is judged after projection and logged before it") {
  HyperNet net = fixture::small_net(4, 2, 4);
  fixture::randomize(net.params(), 7, 0.5);
  const Matrix x = fixture::gaussian(30, 4, 9);
  const CounterfactualBatch b = generate_all(net, nullptr, x, mixed_groups());
  const std::vector<int> pred = net.predict(b.cf);
  const std::vector<int> pred_raw = net.predict(b.unprojected);
  for (std::size_t e = 0; e < b.size(); ++e) {
    CHECK(b.cf.row(static_cast<Eigen::Index>(e)).tail(3).sum() == 1.0);
    CHECK(static_cast<bool>(b.valid[e]) == (pred[e] == b.target[e]));
    CHECK(static_cast<bool>(b.valid_unprojected[e]) == (pred_raw[e] == b.target[e]));
  }
}

TEST_CASE("densities are attached when a flow is given") {
  const HyperNet net = fixture::small_net(2, 2, 3);
  const MafFlow flow = fixture::random_flow(2, 2, 4);
  const Matrix x = fixture::gaussian(5, 2, 1);
  const CounterfactualBatch b = generate_all(net, &flow, x, numeric_groups(2));
  REQUIRE(b.log_density.size() == 5);
  CHECK((b.log_density - flow.log_prob(b.cf, b.target)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sets, diffs, JSON and CSV export") {
  RawDataset raw;
  raw.schema.columns = {Column{"age", ColumnKind::Numeric, {}}, Column{"colour", ColumnKind::Categorical, {"blue", "green", "red"}}};
  raw.schema.target = "y";
  raw.schema.class_labels = {"no", "yes", "maybe"};
  for (int i = 0; i < 9; ++i) {
    raw.rows.push_back({10.0 * i, std::string(i % 3 == 0 ? "blue" : i % 3 == 1 ? "green" : "red")});
    raw.labels.push_back(i % 3);
  }
  const Preprocessor prep = Preprocessor::fit(raw);
  HyperNet net = fixture::small_net(4, 3, 1);
  fixture::randomize(net.params(), 5, 0.8);
  const Dataset d = prep.encode(raw);
  const CounterfactualBatch b = generate_all(net, nullptr, d.x, d.groups);
  const auto sets = to_sets(b, prep);
  REQUIRE(sets.size() == 9);
  for (const auto& s : sets) {
    CHECK(s.entries.size() == 2);
    for (const auto& e : s.entries) {
      REQUIRE(e.diffs.size() == 2);
      const double from = std::get<double>(s.raw[0]), to = std::get<double>(e.raw[0]);
      CHECK(e.diffs[0].delta == doctest::Approx(to - from));
      CHECK(e.diffs[1].changed == (std::get<std::string>(s.raw[1]) != std::get<std::string>(e.raw[1])));
    }
  }
  const nlohmann::json j = to_json(raw.schema, sets[0]);
  CHECK(j.at("counterfactuals").size() == 2);
  CHECK(j.at("counterfactuals")[0].contains("target_label"));
  CHECK(j.at("counterfactuals")[0].contains("diffs"));
  std::ostringstream csv;
  write_counterfactual_csv(csv, raw.schema, sets);
  std::istringstream lines(csv.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) ++n;
  CHECK(n == 1 + 18);
}

TEST_CASE("feature diffs of identical rows are all zero") {
  Schema s;
  s.columns = {Column{"a", ColumnKind::Numeric, {}}, Column{"b", ColumnKind::Categorical, {"x", "y"}}};
  const RawRow r{1.5, std::string("x")};
  for (const auto& d : feature_diffs(s, r, r)) {
    CHECK(!d.changed);
    CHECK(d.delta == 0.0);
  }
}

TEST_CASE("wachter returns the input when it already has the target class") {
  const HyperNet net = logistic_net();
  RowVector x(1);
  x << 1.0;
  const WachterResult r = wachter_baseline(net, x, 1);
  CHECK(r.valid);
  CHECK(r.x == x);
  CHECK(r.distance == 0.0);
}

TEST_CASE("wachter crosses a one-dimensional logistic boundary") {
  const HyperNet net = logistic_net();
  RowVector x(1);
  x << -1.0;
  const WachterOptions o;
  // Line-search oracle for argmin log(1 + exp(-2u)) + c (u + 1)^2.
  double best_u = 0.0, best_f = 1e300;
  for (int i = 0; i <= 400000; ++i) {
    const double u = -2.0 + 4.0 * i / 400000.0;
    const double f = std::log1p(std::exp(-2.0 * u)) + o.c * (u + 1.0) * (u + 1.0);
    if (f < best_f) best_f = f, best_u = u;
  }
  REQUIRE(best_u > 0.0);
  const WachterResult r = wachter_baseline(net, x, 1, o);
  CHECK(r.valid);
  CHECK(r.x(0) > 0.0);
  CHECK(r.x(0) <= best_u + 1e-9);
}
