#pragma once

#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "hyconex/persist.hpp"

namespace hcx {

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
};

/// Request handling for the inference service, independent of the transport.
/// Responses are pure functions of the loaded bundle and the request.
class Service {
 public:
  Service() = default;
  explicit Service(ModelBundle bundle);

  [[nodiscard]] bool has_model() const { return model_ != nullptr; }
  [[nodiscard]] const std::string& model_hash() const { return hash_; }

  [[nodiscard]] HttpResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

  [[nodiscard]] HttpResponse healthz() const;
  [[nodiscard]] HttpResponse schema() const;
  [[nodiscard]] HttpResponse predict(const nlohmann::json& request) const;
  [[nodiscard]] HttpResponse counterfactual(const nlohmann::json& request) const;

 private:
  std::shared_ptr<const Model> model_;
  std::string hash_;
  nlohmann::json schema_doc_;
};

nlohmann::json error_body(const std::string& code, const std::string& message, const std::string& field = {});

/// Blocks serving HTTP on host:port with permissive CORS.
void serve(const Service& service, const std::string& host, int port);

}  // namespace hcx
