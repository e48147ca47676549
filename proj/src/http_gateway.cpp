#include "tollplaza/http_gateway.hpp"

#include <atomic>
#include <boost/asio/dispatch.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "tollplaza/errors.hpp"

namespace tollplaza {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

std::string percent_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  auto hex = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out += ' ';
    } else if (s[i] == '%') {
      if (i + 2 >= s.size()) throw ValidationError("truncated percent escape");
      const int hi = hex(s[i + 1]), lo = hex(s[i + 2]);
      if (hi < 0 || lo < 0) throw ValidationError("bad percent escape");
      out += static_cast<char>(hi * 16 + lo);
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

HttpTarget parse_target(std::string_view target) {
  HttpTarget t;
  const auto q = target.find('?');
  t.path = percent_decode(target.substr(0, q));
  if (q == std::string_view::npos) return t;
  auto rest = target.substr(q + 1);
  while (!rest.empty()) {
    const auto amp = rest.find('&');
    const auto pair = rest.substr(0, amp);
    if (!pair.empty()) {
      const auto eq = pair.find('=');
      t.query[percent_decode(pair.substr(0, eq))] =
          eq == std::string_view::npos ? std::string() : percent_decode(pair.substr(eq + 1));
    }
    if (amp == std::string_view::npos) break;
    rest.remove_prefix(amp + 1);
  }
  return t;
}

namespace {

HttpReply json_error(int status, const std::string& message) {
  return {status, Json{{"error", message}, {"status", status}}.dump()};
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0" || v.empty()) return false;
  throw ValidationError("expected a boolean, got '" + v + "'");
}

std::size_t parse_window(const std::string& v) {
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw ValidationError("window must be a positive integer");
  }
  if (used != v.size() || n < 1) throw ValidationError("window must be a positive integer");
  return static_cast<std::size_t>(n);
}

}  // namespace

HttpReply handle_request(Gateway& gateway, std::string_view method, std::string_view target, std::string_view body) {
  try {
    const auto t = parse_target(target);
    if (t.path == "/transactions") {
      if (method != "GET") return json_error(405, "method not allowed");
      std::optional<std::size_t> window;
      if (auto it = t.query.find("window"); it != t.query.end()) window = parse_window(it->second);
      bool review_only = false;
      if (auto it = t.query.find("review_only"); it != t.query.end()) review_only = parse_bool(it->second);
      Json list = Json::array();
      for (const auto& txn : gateway.get_transactions(window, review_only)) list.push_back(transaction_to_json(txn));
      return {200, Json{{"transactions", list}}.dump()};
    }
    if (t.path == "/stats") {
      if (method != "GET") return json_error(405, "method not allowed");
      return {200, stats_to_json(gateway.get_stats()).dump()};
    }
    constexpr std::string_view prefix = "/transactions/";
    constexpr std::string_view suffix = "/plate";
    if (t.path.size() > prefix.size() + suffix.size() && t.path.starts_with(prefix) && t.path.ends_with(suffix)) {
      if (method != "POST") return json_error(405, "method not allowed");
      CorrectionRequest req;
      req.transaction_id = t.path.substr(prefix.size(), t.path.size() - prefix.size() - suffix.size());
      Json doc;
      try {
        doc = Json::parse(body);
      } catch (const Json::exception&) {
        return json_error(400, "body is not valid JSON");
      }
      if (!doc.is_object() || !doc.contains("corrected_text") || !doc.at("corrected_text").is_string()) {
        return json_error(400, "body needs a string corrected_text");
      }
      req.corrected_text = doc.at("corrected_text").get<std::string>();
      if (doc.contains("operator_id")) {
        if (!doc.at("operator_id").is_string()) return json_error(400, "operator_id must be a string");
        req.operator_id = doc.at("operator_id").get<std::string>();
      }
      if (doc.contains("override")) {
        if (!doc.at("override").is_boolean()) return json_error(400, "override must be a boolean");
        req.override_format = doc.at("override").get<bool>();
      }
      return {200, transaction_to_json(gateway.post_plate_correction(req)).dump()};
    }
    return json_error(404, "no route for " + t.path);
  } catch (const ValidationError& e) {
    return json_error(400, e.what());
  } catch (const NotFoundError& e) {
    return json_error(404, e.what());
  } catch (const ConflictError& e) {
    return json_error(409, e.what());
  } catch (const StoreError& e) {
    return json_error(503, e.what());
  }
}

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, EventHub& hub, std::set<EventType> filter)
      : ws_(std::move(socket)), hub_(hub), filter_(std::move(filter)) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    sub_ = hub_.subscribe(filter_);
    std::weak_ptr<WsSession> weak = shared_from_this();
    sub_->set_notifier([weak] {
      auto self = weak.lock();
      if (!self || self->notify_pending_.exchange(true)) return;
      asio::post(self->ws_.get_executor(), [self] {
        self->notify_pending_ = false;
        self->pump();
      });
    });
    do_read();
    pump();
  }

  void do_read() { ws_.async_read(rbuf_, beast::bind_front_handler(&WsSession::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      finish("client closed");
      return;
    }
    rbuf_.consume(rbuf_.size());  // inbound messages carry no meaning
    do_read();
  }

  void pump() {
    if (done_) return;
    if (!sub_->connected() && sub_->queued() == 0) {
      const auto reason = sub_->disconnect_reason();
      done_ = true;
      if (writing_) {
        // a stalled peer never drains the socket; drop it
        beast::get_lowest_layer(ws_).close();
        return;
      }
      ws_.async_close(websocket::close_reason(websocket::close_code::policy_error, reason.substr(0, 120)),
                      [self = shared_from_this()](beast::error_code) {});
      return;
    }
    if (writing_) return;
    auto msg = sub_->try_pop();
    if (!msg) return;
    writing_ = true;
    out_ = msg->to_wire();
    ws_.text(true);
    ws_.async_write(asio::buffer(out_), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) {
      finish("write failed");
      return;
    }
    pump();
  }

  void finish(const std::string& reason) {
    if (sub_) {
      sub_->set_notifier({});
      hub_.unsubscribe(sub_, reason);
    }
    done_ = true;
  }

  websocket::stream<beast::tcp_stream> ws_;
  EventHub& hub_;
  std::set<EventType> filter_;
  std::shared_ptr<Subscription> sub_;
  beast::flat_buffer rbuf_;
  std::string out_;
  bool writing_ = false;
  bool done_ = false;
  std::atomic<bool> notify_pending_{false};
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, Gateway& gateway, EventHub& hub)
      : stream_(std::move(socket)), gateway_(gateway), hub_(hub) {}

  void run() {
    asio::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
  }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;

    if (websocket::is_upgrade(req_)) {
      HttpReply bad;
      std::set<EventType> filter;
      try {
        const auto t = parse_target(std::string_view(req_.target().data(), req_.target().size()));
        if (t.path != "/ws/vehicles") {
          bad = {404, Json{{"error", "no stream at " + t.path}, {"status", 404}}.dump()};
        } else if (auto it = t.query.find("types"); it != t.query.end()) {
          filter = parse_type_filter(it->second);
        }
      } catch (const ValidationError& e) {
        bad = {400, Json{{"error", e.what()}, {"status", 400}}.dump()};
      }
      if (bad.body.empty()) {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), hub_, std::move(filter))->run(std::move(req_));
        return;
      }
      send(bad);
      return;
    }

    if (req_.method() == http::verb::options) {
      HttpReply r{204, {}};
      send(r);
      return;
    }
    const auto method = req_.method_string();
    const auto target = req_.target();
    send(handle_request(gateway_, std::string_view(method.data(), method.size()),
                        std::string_view(target.data(), target.size()), req_.body()));
  }

  void send(const HttpReply& reply) {
    auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(reply.status),
                                                                    req_.version());
    res->set(http::field::server, "tollplaza");
    res->set(http::field::access_control_allow_origin, "*");
    res->set(http::field::access_control_allow_headers, "Content-Type");
    res->set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
    if (!reply.body.empty()) res->set(http::field::content_type, "application/json");
    res->keep_alive(req_.keep_alive());
    res->body() = reply.body;
    res->prepare_payload();
    http::async_write(stream_, *res,
                      [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
                        if (ec) return;
                        if (!res->keep_alive()) {
                          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
                          return;
                        }
                        self->do_read();
                      });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  Gateway& gateway_;
  EventHub& hub_;
};

}  // namespace

struct HttpGatewayServer::Impl {
  Impl(Gateway& g, EventHub& h) : gateway(g), hub(h), acceptor(ioc) {}

  void do_accept() {
    acceptor.async_accept(asio::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec == asio::error::operation_aborted || !acceptor.is_open()) return;
      } else {
        std::make_shared<HttpSession>(std::move(socket), gateway, hub)->run();
      }
      do_accept();
    });
  }

  Gateway& gateway;
  EventHub& hub;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  std::vector<std::thread> threads;
  bool stopped = false;
};

HttpGatewayServer::HttpGatewayServer(Gateway& gateway, EventHub& hub, const std::string& bind, int threads)
    : impl_(std::make_unique<Impl>(gateway, hub)) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw ValidationError("gateway bind must be host:port, got '" + bind + "'");
  std::string host = bind.substr(0, colon);
  if (host.empty() || host == "localhost") host = "127.0.0.1";
  int port = 0;
  try {
    port = std::stoi(bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw ValidationError("bad port in gateway bind '" + bind + "'");
  }
  if (port < 0 || port > 65535) throw ValidationError("bad port in gateway bind '" + bind + "'");
  const tcp::endpoint ep(asio::ip::make_address(host), static_cast<std::uint16_t>(port));
  auto& acc = impl_->acceptor;
  acc.open(ep.protocol());
  acc.set_option(asio::socket_base::reuse_address(true));
  acc.bind(ep);
  acc.listen(asio::socket_base::max_listen_connections);
  port_ = acc.local_endpoint().port();
  impl_->do_accept();
  for (int i = 0; i < std::max(1, threads); ++i) impl_->threads.emplace_back([this] { impl_->ioc.run(); });
}

HttpGatewayServer::~HttpGatewayServer() { stop(); }

void HttpGatewayServer::stop() {
  if (!impl_ || impl_->stopped) return;
  impl_->stopped = true;
  asio::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
  });
  impl_->ioc.stop();
  for (auto& t : impl_->threads) t.join();
}

}  // namespace tollplaza
