#include "swarmloop/http/binding.hpp"

#include <thread>

#include <httplib.h>

namespace swarmloop::http {

namespace {

int status_for(const std::string& code) {
  if (code == "UnknownThing" || code == "UnknownAffordance" || code == "UnknownId") return 404;
  if (code == "SchemaViolation" || code == "MalformedExpression" || code == "BadRequest")
    return 400;
  // DuplicateId and state-dependent command rejections (NotArmed, NotAirborne,
  // InvalidMode, ...) are conflicts with the current resource state.
  return 409;
}

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, const std::string& code, const std::string& message) {
  reply_json(res, status_for(code), json{{"error", code}, {"message", message}});
}

/// Runs the endpoint logic with uniform error translation.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const DomainError& e) {
    reply_error(res, e.code(), e.what());
  } catch (const json::exception& e) {
    reply_error(res, "BadRequest", e.what());
  } catch (const std::exception& e) {
    reply_json(res, 500, json{{"error", "Internal"}, {"message", e.what()}});
  }
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded())
    throw DomainError("BadRequest", "request body is not valid JSON");
  return parsed;
}

std::optional<double> ttl_param(const httplib::Request& req) {
  if (!req.has_param("ttl_s")) return std::nullopt;
  try {
    return std::stod(req.get_param_value("ttl_s"));
  } catch (const std::exception&) {
    throw DomainError("BadRequest", "ttl_s must be a number");
  }
}

}  // namespace

struct HttpBinding::Impl {
  httplib::Server server;
  std::thread thread;
};

HttpBinding::HttpBinding(wot::Servient& servient, directory::Directory& directory)
    : impl_(std::make_unique<Impl>()) {
  auto& svr = impl_->server;

  svr.Get(R"(/things/([^/]+)/properties/([^/]+))",
          [&servient](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
              const json value = servient.invoke_affordance(
                  req.matches[1], wot::AffordanceKind::property_read, req.matches[2]);
              reply_json(res, 200, value);
            });
          });

  svr.Post(R"(/things/([^/]+)/actions/([^/]+))",
           [&servient](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               const json output = servient.invoke_affordance(
                   req.matches[1], wot::AffordanceKind::action, req.matches[2],
                   parse_body(req.body));
               reply_json(res, 200, output);
             });
           });

  svr.Post(R"(/td/([^/]+))", [&directory](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json td = parse_body(req.body);
      if (td.value("id", "") != std::string(req.matches[1]))
        throw DomainError("BadRequest", "document id does not match the path");
      directory.register_td(td, ttl_param(req));
      reply_json(res, 201, td);
    });
  });

  svr.Put(R"(/td/([^/]+))", [&directory](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json td = parse_body(req.body);
      directory.update_td(req.matches[1], td, ttl_param(req));
      reply_json(res, 200, td);
    });
  });

  svr.Get(R"(/td/([^/]+))", [&directory](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply_json(res, 200, directory.get(req.matches[1])); });
  });

  svr.Delete(R"(/td/([^/]+))",
             [&directory](const httplib::Request& req, httplib::Response& res) {
               guarded(res, [&] {
                 directory.remove(req.matches[1]);
                 reply_json(res, 200, json{{"removed", std::string(req.matches[1])}});
               });
             });

  svr.Get("/td", [&directory](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply_json(res, 200, json(directory.list())); });
  });

  svr.Get("/search", [&directory](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("q")) throw DomainError("BadRequest", "missing query parameter q");
      reply_json(res, 200, json(directory.query(req.get_param_value("q"))));
    });
  });
}

HttpBinding::~HttpBinding() { stop(); }

int HttpBinding::start(const std::string& host, int port) {
  auto& svr = impl_->server;
  if (port == 0) {
    port_ = svr.bind_to_any_port(host);
  } else {
    if (!svr.bind_to_port(host, port))
      throw DomainError("BindFailed", "cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
  }
  if (port_ <= 0) throw DomainError("BindFailed", "cannot bind " + host);
  impl_->thread = std::thread([&svr] { svr.listen_after_bind(); });
  svr.wait_until_ready();
  return port_;
}

void HttpBinding::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace swarmloop::http
