// Project headers (and Eigen) first: httplib drags in <resolv.h>, whose
// `_res` macro collides with Eigen internals.
#include "hyconex/error.hpp"
#include "hyconex/service.hpp"

#include <httplib.h>

namespace hcx {

void serve(const Service& service, const std::string& host, int port) {
  httplib::Server server;
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  auto dispatch = [&service](const httplib::Request& req, httplib::Response& res) {
    HttpResponse r;
    try {
      r = service.handle(req.method, req.path, req.body);
    } catch (const std::exception& e) {
      r = {500, error_body("internal", e.what())};
    }
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get("/healthz", dispatch);
  server.Get("/schema", dispatch);
  server.Post("/predict", dispatch);
  server.Post("/counterfactual", dispatch);
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  if (!server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  server.listen_after_bind();
}

}  // namespace hcx
