#pragma once

#include <memory>
#include <string>

#include "swarmloop/directory/directory.hpp"
#include "swarmloop/wot/servient.hpp"

namespace swarmloop::http {

/// Network face of the in-process stack, mirroring the forms in the TDs and
/// the directory's CRUDL surface:
///
///   GET    /things/{id}/properties/{name}   property snapshot
///   POST   /things/{id}/actions/{name}      invoke with a JSON body
///   POST   /td/{id}                         register (body: TD JSON)
///   PUT    /td/{id}                         update
///   GET    /td/{id}                         fetch
///   DELETE /td/{id}                         remove
///   GET    /td                              list live TDs
///   GET    /search?q={expression}           path-expression discovery
///
/// Domain errors map onto status codes (missing 404, malformed 400,
/// duplicate 409, command rejection 409) with bodies of
/// {"error": code, "message": text}; the code strings are the same ones the
/// in-process callers see.
class HttpBinding {
public:
  HttpBinding(wot::Servient& servient, directory::Directory& directory);
  ~HttpBinding();

  HttpBinding(const HttpBinding&) = delete;
  HttpBinding& operator=(const HttpBinding&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  /// port 0 picks a free one. Throws BindFailed.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

  int port() const { return port_; }

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace swarmloop::http
