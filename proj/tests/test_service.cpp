#include <doctest.h>

#include "hyconex/service.hpp"
#include "model_fixture.hpp"

using namespace hcx;

namespace {

const Service& service() {
  static const Service s = [] {
    ModelBundle b;
    b.model = fixture::random_model(fixture::mixed_raw(90, 3), 3);
    return Service(std::move(b));
  }();
  return s;
}

nlohmann::json point() { return {{"income", 55.0}, {"age", 30.0}, {"housing", "rent"}}; }

}  // namespace

TEST_CASE("health and schema") {
  const Service none;
  CHECK(none.healthz().status == 200);
  CHECK(none.healthz().body.at("status") == "no_model");
  CHECK(none.schema().status == 503);
  CHECK(none.predict(point()).status == 503);
  CHECK(none.counterfactual({{"features", point()}, {"target", 1}}).status == 503);

  const auto h = service().healthz();
  CHECK(h.body.at("status") == "ok");
  CHECK(h.body.at("model_hash") == service().model_hash());
  const auto s = service().schema().body;
  REQUIRE(s.at("columns").size() == 3);
  CHECK(s.at("columns")[0].at("kind") == "numeric");
  CHECK(s.at("columns")[2].at("categories").size() == 3);
  CHECK(s.at("class_labels") == nlohmann::json{"good", "bad"});
  CHECK(s.at("columns")[0].at("min").get<double>() < s.at("columns")[0].at("max").get<double>());
}

TEST_CASE("predict returns probabilities, importance and K-1 counterfactuals") {
  const auto r = service().predict({{"features", point()}});
  REQUIRE(r.status == 200);
  double sum = 0.0;
  for (const auto& p : r.body.at("probabilities")) sum += p.get<double>();
  CHECK(std::abs(sum - 1.0) < 1e-6);
  CHECK(r.body.at("counterfactuals").size() == 1);
  CHECK(r.body.at("importance").at("weights").size() == 5);
  CHECK(r.body.at("weight_matrix").size() == 2);
  CHECK(r.body.at("weight_matrix")[0].size() == 6);
  const auto& cf = r.body.at("counterfactuals")[0];
  CHECK(cf.contains("log_density"));
  CHECK(cf.at("diffs").size() == 3);
  // Bare feature maps are accepted too, and identical requests give identical bodies.
  CHECK(service().predict(point()).body == r.body);
}

TEST_CASE("schema violations name the field") {
  nlohmann::json missing = point();
  missing.erase("age");
  auto r = service().predict(missing);
  CHECK(r.status == 400);
  CHECK(r.body.at("field") == "age");

  nlohmann::json extra = point();
  extra["height"] = 3;
  CHECK(service().predict(extra).body.at("field") == "height");

  nlohmann::json wrong = point();
  wrong["income"] = "lots";
  CHECK(service().predict(wrong).status == 400);

  nlohmann::json unseen = point();
  unseen["housing"] = "castle";
  r = service().predict(unseen);
  CHECK(r.status == 422);
  CHECK(r.body.at("field") == "housing");
  CHECK(r.body.contains("code"));
  CHECK(r.body.contains("message"));
}

TEST_CASE("counterfactual endpoint") {
  const int predicted = service().predict(point()).body.at("predicted").get<int>();
  const auto echo = service().counterfactual({{"features", point()}, {"target", predicted}});
  REQUIRE(echo.status == 200);
  CHECK(echo.body.at("valid") == true);
  for (const auto& d : echo.body.at("diffs")) CHECK(d.at("changed") == false);

  const auto other = service().counterfactual({{"features", point()}, {"target", 1 - predicted}});
  REQUIRE(other.status == 200);
  CHECK(other.body.at("target") == 1 - predicted);
  CHECK(other.body.contains("plausible"));
  const auto by_label =
      service().counterfactual({{"features", point()}, {"target", predicted == 0 ? "bad" : "good"}});
  CHECK(by_label.body == other.body);

  CHECK(service().counterfactual({{"features", point()}, {"target", "ugly"}}).status == 400);
  CHECK(service().counterfactual({{"features", point()}, {"target", 7}}).status == 400);
  CHECK(service().counterfactual({{"features", point()}}).status == 400);
}

TEST_CASE("routing and malformed bodies") {
  CHECK(service().handle("GET", "/healthz", "").status == 200);
  CHECK(service().handle("GET", "/nope", "").status == 404);
  CHECK(service().handle("POST", "/predict", "{not json").status == 400);
  const auto r = service().handle("POST", "/predict", point().dump());
  CHECK(r.status == 200);
  CHECK(r.body == service().predict(point()).body);
}
