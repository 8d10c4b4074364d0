#include "hyconex/service.hpp"

#include <algorithm>
#include <cmath>

#include "hyconex/error.hpp"

namespace hcx {

namespace {

struct RequestError {
  int status;
  std::string code;
  std::string message;
  std::string field;
};

HttpResponse fail(const RequestError& e) { return {e.status, error_body(e.code, e.message, e.field)}; }

HttpResponse no_model() { return {503, error_body("no_model", "no model bundle is loaded")}; }

const nlohmann::json& feature_map(const nlohmann::json& request) {
  if (!request.is_object()) throw RequestError{400, "bad_request", "request body must be a JSON object", ""};
  if (request.contains("features")) {
    if (!request["features"].is_object()) throw RequestError{400, "bad_request", "'features' must be an object", "features"};
    return request["features"];
  }
  return request;
}

// Validates and converts a raw feature map into a schema-ordered row.
RawRow parse_row(const Schema& schema, const nlohmann::json& features, bool allow_target_key) {
  for (const auto& [key, value] : features.items()) {
    (void)value;
    if (schema.column_index(key) < 0 && !(allow_target_key && key == "target")) {
      throw RequestError{400, "bad_request", "unknown column '" + key + "'", key};
    }
  }
  RawRow row;
  for (const auto& c : schema.columns) {
    if (!features.contains(c.name)) throw RequestError{400, "bad_request", "missing column '" + c.name + "'", c.name};
    const auto& v = features[c.name];
    if (c.kind == ColumnKind::Numeric) {
      if (!v.is_number()) throw RequestError{400, "bad_request", "column '" + c.name + "' must be a number", c.name};
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw RequestError{400, "bad_request", "column '" + c.name + "' must be finite", c.name};
      row.emplace_back(d);
    } else {
      if (!v.is_string()) throw RequestError{400, "bad_request", "column '" + c.name + "' must be a string", c.name};
      const auto s = v.get<std::string>();
      if (std::find(c.categories.begin(), c.categories.end(), s) == c.categories.end()) {
        throw RequestError{422, "unseen_category", "unseen category '" + s + "' in column '" + c.name + "'", c.name};
      }
      row.emplace_back(s);
    }
  }
  return row;
}

std::vector<double> to_vector(const RowVector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

nlohmann::json error_body(const std::string& code, const std::string& message, const std::string& field) {
  nlohmann::json j{{"code", code}, {"message", message}};
  if (!field.empty()) j["field"] = field;
  return j;
}

Service::Service(ModelBundle bundle) {
  hash_ = hash_model(bundle);
  model_ = std::make_shared<const Model>(std::move(bundle.model));
  const Schema& s = model_->schema();
  const auto groups = model_->prep.groups();
  nlohmann::json columns = nlohmann::json::array();
  for (const auto& g : groups) {
    const Column& c = s.columns[static_cast<std::size_t>(g.column)];
    nlohmann::json col{{"name", c.name}};
    if (c.kind == ColumnKind::Numeric) {
      col["kind"] = "numeric";
      if (model_->reference.rows() > 0) {
        const double scale = model_->prep.stds()(g.offset), off = model_->prep.means()(g.offset);
        col["min"] = model_->reference.col(g.offset).minCoeff() * scale + off;
        col["max"] = model_->reference.col(g.offset).maxCoeff() * scale + off;
      }
    } else {
      col["kind"] = "categorical";
      col["categories"] = c.categories;
    }
    columns.push_back(std::move(col));
  }
  schema_doc_ = {{"columns", std::move(columns)}, {"target", s.target}, {"class_labels", s.class_labels},
                 {"encoded_names", s.encoded_names()}, {"model_hash", hash_}};
}

HttpResponse Service::healthz() const {
  if (!model_) return {200, {{"status", "no_model"}, {"model_hash", nullptr}}};
  return {200, {{"status", "ok"}, {"model_hash", hash_}}};
}

HttpResponse Service::schema() const {
  if (!model_) return no_model();
  return {200, schema_doc_};
}

HttpResponse Service::predict(const nlohmann::json& request) const {
  if (!model_) return no_model();
  try {
    const Schema& schema = model_->schema();
    const RawRow row = parse_row(schema, feature_map(request), false);
    const CounterfactualSet set = model_->explain(row);
    const FeatureImportance fi = model_->net.feature_importance(set.encoded);
    const auto names = schema.encoded_names();
    nlohmann::json weights = nlohmann::json::object();
    for (std::size_t d = 0; d < names.size(); ++d) weights[names[d]] = fi.row(static_cast<Eigen::Index>(d + 1));
    nlohmann::json body = to_json(schema, set);
    body["importance"] = {{"class", fi.predicted_class}, {"bias", fi.row(0)}, {"weights", std::move(weights)}};
    nlohmann::json matrix = nlohmann::json::array();
    for (Eigen::Index k = 0; k < fi.weights.rows(); ++k) matrix.push_back(to_vector(fi.weights.row(k)));
    body["weight_matrix"] = std::move(matrix);
    body["threshold"] = model_->thresholds.global;
    body["model_hash"] = hash_;
    return {200, std::move(body)};
  } catch (const RequestError& e) {
    return fail(e);
  }
}

HttpResponse Service::counterfactual(const nlohmann::json& request) const {
  if (!model_) return no_model();
  try {
    const Schema& schema = model_->schema();
    if (!request.is_object() || !request.contains("target")) {
      throw RequestError{400, "bad_request", "missing 'target'", "target"};
    }
    const auto& t = request["target"];
    int target = -1;
    if (t.is_string()) {
      target = schema.label_index(t.get<std::string>());
    } else if (t.is_number_integer()) {
      target = t.get<int>();
      if (target < 0 || target >= schema.num_classes()) target = -1;
    }
    if (target < 0) throw RequestError{400, "bad_request", "unknown target class " + t.dump(), "target"};
    const nlohmann::json& features = request.contains("features") ? request["features"] : request;
    if (!features.is_object()) throw RequestError{400, "bad_request", "'features' must be an object", "features"};
    const RawRow row = parse_row(schema, features, !request.contains("features"));
    const CounterfactualSet set = model_->explain(row);
    nlohmann::json body;
    if (target == set.predicted) {
      CounterfactualEntry echo;
      echo.target = target;
      echo.encoded = set.encoded;
      echo.raw = set.raw;
      echo.predicted = set.predicted;
      echo.valid = true;
      echo.log_density = model_->flow.log_prob(Matrix(set.encoded), std::vector<int>{target})(0);
      echo.has_density = true;
      echo.diffs = feature_diffs(schema, set.raw, set.raw);
      body = to_json(schema, echo);
    } else {
      for (const auto& e : set.entries) {
        if (e.target == target) body = to_json(schema, e);
      }
    }
    body["source_predicted"] = set.predicted;
    body["source_predicted_label"] = schema.class_labels[static_cast<std::size_t>(set.predicted)];
    body["plausible"] = body.value("log_density", -INFINITY) > model_->thresholds.global;
    body["model_hash"] = hash_;
    return {200, std::move(body)};
  } catch (const RequestError& e) {
    return fail(e);
  }
}

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
  if (method == "GET" && path == "/healthz") return healthz();
  if (method == "GET" && path == "/schema") return schema();
  if (method == "POST" && (path == "/predict" || path == "/counterfactual")) {
    nlohmann::json request;
    try {
      request = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      return {400, error_body("bad_request", "request body is not valid JSON")};
    }
    return path == "/predict" ? predict(request) : counterfactual(request);
  }
  return {404, error_body("not_found", "no route for " + method + " " + path)};
}

}  // namespace hcx
