#include "swarmloop/gateway/mcp.hpp"

namespace swarmloop::gateway {

namespace {

struct RpcError {
  int code;
  std::string message;
  std::string error_code;
  json detail = json::object();
};

json error_response(const json& id, const RpcError& e) {
  json data{{"error_code", e.error_code}};
  if (!e.detail.empty()) data["detail"] = e.detail;
  return json{{"jsonrpc", "2.0"},
              {"id", id},
              {"error", json{{"code", e.code}, {"message", e.message}, {"data", data}}}};
}

json result_response(const json& id, json result) {
  return json{{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}};
}

}  // namespace

json McpServer::handle_request(const json& request) {
  const auto method = request.value("method", "");
  const json params = request.value("params", json::object());

  if (method == "initialize") {
    return json{{"protocolVersion", "2025-03-26"},
                {"capabilities", json{{"tools", json::object()}}},
                {"serverInfo", json{{"name", "swarmloop-gateway"}, {"version", "0.1.0"}}}};
  }
  if (method == "tools/list") {
    json tools = json::array();
    for (const auto& def : gateway_.list_tools()) {
      tools.push_back(json{{"name", def.name},
                           {"description", def.description},
                           {"inputSchema", def.input_schema.to_json()},
                           {"outputSchema", def.output_schema.to_json()}});
    }
    return json{{"tools", std::move(tools)}};
  }
  if (method == "tools/call") {
    if (!params.is_object() || !params.contains("name") || !params.at("name").is_string())
      throw RpcError{-32602, "params.name must be a string", "SchemaViolation"};
    ToolCall call;
    call.call_id = "rpc-" + std::to_string(++calls_);
    call.tool = params.at("name").get<std::string>();
    call.arguments = params.value("arguments", json::object());
    const auto result = gateway_.call_tool(call, CallSource::external);
    if (!result.ok()) {
      throw RpcError{-32000, result.error_detail.value_or("tool call failed"),
                     result.error_code.value_or("Error"), result.payload};
    }
    return json{{"content", json::array({json{{"type", "text"},
                                              {"text", result.payload.dump()}}})},
                {"structuredContent", result.payload},
                {"isError", false}};
  }
  throw RpcError{-32601, "method not found: " + method, "UnknownMethod"};
}

std::optional<std::string> McpServer::handle_line(const std::string& line) {
  if (line.find_first_not_of(" \t\r") == std::string::npos) return std::nullopt;

  json request;
  try {
    request = json::parse(line);
  } catch (const json::exception& e) {
    return error_response(nullptr, {-32700, e.what(), "ParseError"}).dump();
  }

  if (!request.is_object() || request.value("jsonrpc", "") != "2.0" ||
      !request.contains("method") || !request.at("method").is_string()) {
    return error_response(request.is_object() ? request.value("id", json()) : json(),
                          {-32600, "not a JSON-RPC 2.0 request", "InvalidRequest"})
        .dump();
  }

  const bool is_notification = !request.contains("id") || request.at("id").is_null();
  json response;
  try {
    json result = handle_request(request);
    if (is_notification) return std::nullopt;
    response = result_response(request.at("id"), std::move(result));
  } catch (const RpcError& e) {
    if (is_notification) return std::nullopt;
    response = error_response(request.at("id"), e);
  }
  return response.dump();
}

void McpServer::serve(std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    const auto response = handle_line(line);
    if (response) out << *response << "\n" << std::flush;
  }
}

}  // namespace swarmloop::gateway
