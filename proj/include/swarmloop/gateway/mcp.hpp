#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>

#include "swarmloop/gateway/gateway.hpp"

namespace swarmloop::gateway {

/// Line-delimited JSON-RPC 2.0 facade over a Gateway, speaking the MCP
/// methods initialize, tools/list, and tools/call. Tool failures surface as
/// JSON-RPC error objects carrying {code, message, data.error_code}.
class McpServer {
public:
  explicit McpServer(Gateway& gateway) : gateway_(gateway) {}

  /// One request line in, one response line out. Notifications (no id) and
  /// blank lines produce no response.
  std::optional<std::string> handle_line(const std::string& line);

  /// Reads one message per line until EOF, writing responses to `out`.
  void serve(std::istream& in, std::ostream& out);

private:
  json handle_request(const json& request);  // throws RpcError

  Gateway& gateway_;
  std::int64_t calls_ = 0;
};

}  // namespace swarmloop::gateway
