#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>

namespace tollplaza {

// Minimal RESP2 (the Redis serialization protocol): enough for the store
// backend to talk to any compatible key-value service.

struct RespValue {
  enum class Kind { Simple, Error, Integer, Bulk, Nil, Array };
  Kind kind = Kind::Nil;
  std::string text;  ///< Simple, Error, Bulk
  std::int64_t integer = 0;
  std::vector<RespValue> elements;

  static RespValue simple(std::string s) { return {Kind::Simple, std::move(s), 0, {}}; }
  static RespValue error(std::string s) { return {Kind::Error, std::move(s), 0, {}}; }
  static RespValue number(std::int64_t v) { return {Kind::Integer, {}, v, {}}; }
  static RespValue bulk(std::string s) { return {Kind::Bulk, std::move(s), 0, {}}; }
  static RespValue nil() { return {}; }
  static RespValue array(std::vector<RespValue> v) { return {Kind::Array, {}, 0, std::move(v)}; }

  friend bool operator==(const RespValue&, const RespValue&) = default;
};

std::string encode(const RespValue& value);
std::string encode_command(const std::vector<std::string>& args);

/// Incremental decoder. Throws FormatError on malformed input.
class RespParser {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }
  std::optional<RespValue> next();
  std::size_t buffered() const noexcept { return buffer_.size() - pos_; }

 private:
  std::optional<RespValue> parse_at(std::size_t& pos);
  std::optional<std::string_view> line_at(std::size_t& pos) const;

  std::string buffer_;
  std::size_t pos_ = 0;
};

/// Blocking client on one connection; calls are serialized.
class RespClient {
 public:
  RespClient(std::string host, std::uint16_t port);
  ~RespClient();

  /// Throws StoreError on I/O failure or an error reply. The next call
  /// reconnects after a failure.
  RespValue call(const std::vector<std::string>& args);

  const std::string& host() const noexcept { return host_; }
  std::uint16_t port() const noexcept { return port_; }

 private:
  void connect();
  RespValue round_trip(const std::string& request);

  std::string host_;
  std::uint16_t port_;
  std::mutex mu_;
  boost::asio::io_context io_;
  std::unique_ptr<boost::asio::ip::tcp::socket> socket_;
  RespParser parser_;
};

/// Splits "host:port"; throws ValidationError.
std::pair<std::string, std::uint16_t> parse_host_port(std::string_view address);

/// In-memory RESP server with the command subset the store uses:
/// PING, SET, GET, DEL, INCR, RPUSH, LRANGE, LREM, DBSIZE, FLUSHALL.
class RespServer {
 public:
  /// Port 0 picks a free port.
  RespServer(const std::string& host, std::uint16_t port);
  ~RespServer();

  RespServer(const RespServer&) = delete;
  RespServer& operator=(const RespServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  void stop();

  /// Executes one command against the dataset; exposed for tests.
  RespValue execute(const std::vector<std::string>& args);

 private:
  void accept_loop();
  void serve(std::shared_ptr<boost::asio::ip::tcp::socket> conn);

  std::mutex data_mu_;
  std::map<std::string, std::string> strings_;
  std::map<std::string, std::vector<std::string>> lists_;

  boost::asio::io_context io_;
  boost::asio::ip::tcp::acceptor acceptor_;
  std::uint16_t port_ = 0;
  std::thread accept_thread_;
  std::mutex conn_mu_;
  std::vector<std::thread> connections_;
  std::vector<std::shared_ptr<boost::asio::ip::tcp::socket>> sockets_;
  bool stopped_ = false;
};

}  // namespace tollplaza
