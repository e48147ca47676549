#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>

#include "tollplaza/event_hub.hpp"
#include "tollplaza/gateway.hpp"

namespace tollplaza {

/// Routes served on one port:
///   GET  /transactions?window=N&review_only=bool
///   POST /transactions/{id}/plate   body {corrected_text, operator_id, override}
///   GET  /stats
///   GET  /ws/vehicles?types=A,B     (WebSocket upgrade; push stream)
class HttpGatewayServer {
 public:
  /// `bind` is host:port; port 0 picks a free one.
  HttpGatewayServer(Gateway& gateway, EventHub& hub, const std::string& bind, int threads = 2);
  ~HttpGatewayServer();

  HttpGatewayServer(const HttpGatewayServer&) = delete;
  HttpGatewayServer& operator=(const HttpGatewayServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
};

// Exposed for tests.
struct HttpTarget {
  std::string path;
  std::map<std::string, std::string> query;
};
HttpTarget parse_target(std::string_view target);  // throws ValidationError on bad escapes
std::string percent_decode(std::string_view s);

struct HttpReply {
  int status = 200;
  std::string body;  ///< JSON
};

/// Request handling without sockets: one call per request.
HttpReply handle_request(Gateway& gateway, std::string_view method, std::string_view target, std::string_view body);

}  // namespace tollplaza
