#include <algorithm>
#include <boost/asio/read.hpp>
#include <boost/asio/write.hpp>
#include <cctype>
#include <limits>

#include "tollplaza/errors.hpp"
#include "tollplaza/resp.hpp"

#include <sys/socket.h>

namespace tollplaza {

namespace asio = boost::asio;
using asio::ip::tcp;

RespServer::RespServer(const std::string& host, std::uint16_t port) : acceptor_(io_) {
  const tcp::endpoint ep(asio::ip::make_address(host == "localhost" ? "127.0.0.1" : host), port);
  acceptor_.open(ep.protocol());
  acceptor_.set_option(tcp::acceptor::reuse_address(true));
  acceptor_.bind(ep);
  acceptor_.listen();
  port_ = acceptor_.local_endpoint().port();
  accept_thread_ = std::thread([this] { accept_loop(); });
}

RespServer::~RespServer() { stop(); }

void RespServer::stop() {
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(conn_mu_);
    if (stopped_) return;
    stopped_ = true;
    boost::system::error_code ec;
    // close alone does not wake a thread blocked in accept
    ::shutdown(acceptor_.native_handle(), SHUT_RDWR);
    acceptor_.close(ec);
    for (auto& s : sockets_) {
      s->shutdown(tcp::socket::shutdown_both, ec);
      s->close(ec);
    }
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  {
    std::lock_guard lock(conn_mu_);
    threads.swap(connections_);
  }
  for (auto& t : threads) t.join();
}

void RespServer::accept_loop() {
  for (;;) {
    tcp::socket socket(io_);
    boost::system::error_code ec;
    acceptor_.accept(socket, ec);
    if (ec) return;
    std::lock_guard lock(conn_mu_);
    if (stopped_) return;
    auto shared = std::make_shared<tcp::socket>(std::move(socket));
    sockets_.push_back(shared);
    connections_.emplace_back([this, shared] { serve(shared); });
  }
}

void RespServer::serve(std::shared_ptr<tcp::socket> conn) {
  tcp::socket& socket = *conn;
  RespParser parser;
  char buf[16384];
  boost::system::error_code ec;
  for (;;) {
    const auto n = socket.read_some(asio::buffer(buf), ec);
    if (ec) return;
    parser.feed(std::string_view(buf, n));
    std::string out;
    try {
      while (auto v = parser.next()) {
        if (v->kind != RespValue::Kind::Array) {
          out += encode(RespValue::error("ERR expected a command array"));
          continue;
        }
        std::vector<std::string> args;
        for (const auto& e : v->elements) args.push_back(e.text);
        out += encode(execute(args));
      }
    } catch (const FormatError& e) {
      out += encode(RespValue::error(std::string("ERR protocol: ") + e.what()));
      asio::write(socket, asio::buffer(out), ec);
      return;
    }
    if (!out.empty()) {
      asio::write(socket, asio::buffer(out), ec);
      if (ec) return;
    }
  }
}

RespValue RespServer::execute(const std::vector<std::string>& args) {
  if (args.empty()) return RespValue::error("ERR empty command");
  std::string cmd = args[0];
  std::transform(cmd.begin(), cmd.end(), cmd.begin(), [](unsigned char c) { return std::toupper(c); });
  auto arity = [&](std::size_t n) { return args.size() == n; };
  auto wrong = [&] { return RespValue::error("ERR wrong number of arguments for '" + cmd + "'"); };
  auto to_int = [](const std::string& s, std::int64_t& out) {
    try {
      std::size_t used = 0;
      out = std::stoll(s, &used);
      return used == s.size();
    } catch (...) {
      return false;
    }
  };

  std::lock_guard lock(data_mu_);
  if (cmd == "PING") return args.size() == 2 ? RespValue::bulk(args[1]) : RespValue::simple("PONG");
  if (cmd == "SET") {
    if (arity(3)) {
      if (lists_.count(args[1])) return RespValue::error("WRONGTYPE key holds a list");
      strings_[args[1]] = args[2];
      return RespValue::simple("OK");
    }
    if (arity(4)) {
      std::string opt = args[3];
      std::transform(opt.begin(), opt.end(), opt.begin(), [](unsigned char c) { return std::toupper(c); });
      if (opt != "NX") return RespValue::error("ERR syntax error");
      if (strings_.count(args[1]) || lists_.count(args[1])) return RespValue::nil();
      strings_[args[1]] = args[2];
      return RespValue::simple("OK");
    }
    return wrong();
  }
  if (cmd == "GET") {
    if (!arity(2)) return wrong();
    if (lists_.count(args[1])) return RespValue::error("WRONGTYPE key holds a list");
    auto it = strings_.find(args[1]);
    return it == strings_.end() ? RespValue::nil() : RespValue::bulk(it->second);
  }
  if (cmd == "DEL") {
    if (args.size() < 2) return wrong();
    std::int64_t n = 0;
    for (std::size_t i = 1; i < args.size(); ++i) n += static_cast<std::int64_t>(strings_.erase(args[i]) + lists_.erase(args[i]));
    return RespValue::number(n);
  }
  if (cmd == "INCR") {
    if (!arity(2)) return wrong();
    std::int64_t v = 0;
    if (auto it = strings_.find(args[1]); it != strings_.end() && !to_int(it->second, v)) {
      return RespValue::error("ERR value is not an integer");
    }
    strings_[args[1]] = std::to_string(++v);
    return RespValue::number(v);
  }
  if (cmd == "RPUSH") {
    if (args.size() < 3) return wrong();
    if (strings_.count(args[1])) return RespValue::error("WRONGTYPE key holds a string");
    auto& l = lists_[args[1]];
    l.insert(l.end(), args.begin() + 2, args.end());
    return RespValue::number(static_cast<std::int64_t>(l.size()));
  }
  if (cmd == "LRANGE") {
    if (!arity(4)) return wrong();
    std::int64_t start = 0, stop = 0;
    if (!to_int(args[2], start) || !to_int(args[3], stop)) return RespValue::error("ERR value is not an integer");
    auto it = lists_.find(args[1]);
    std::vector<RespValue> out;
    if (it != lists_.end()) {
      const auto n = static_cast<std::int64_t>(it->second.size());
      if (start < 0) start = std::max<std::int64_t>(0, n + start);
      if (stop < 0) stop = n + stop;
      stop = std::min(stop, n - 1);
      for (std::int64_t i = start; i <= stop; ++i) out.push_back(RespValue::bulk(it->second[static_cast<std::size_t>(i)]));
    }
    return RespValue::array(std::move(out));
  }
  if (cmd == "LREM") {
    if (!arity(4)) return wrong();
    std::int64_t count = 0;
    if (!to_int(args[2], count)) return RespValue::error("ERR value is not an integer");
    auto it = lists_.find(args[1]);
    if (it == lists_.end()) return RespValue::number(0);
    auto& l = it->second;
    std::int64_t removed = 0;
    const std::int64_t limit = count == 0 ? std::numeric_limits<std::int64_t>::max() : std::abs(count);
    if (count >= 0) {
      for (auto p = l.begin(); p != l.end() && removed < limit;) {
        if (*p == args[3]) {
          p = l.erase(p);
          ++removed;
        } else {
          ++p;
        }
      }
    } else {
      for (auto p = l.end(); p != l.begin() && removed < limit;) {
        --p;
        if (*p == args[3]) {
          p = l.erase(p);
          ++removed;
        }
      }
    }
    if (l.empty()) lists_.erase(it);
    return RespValue::number(removed);
  }
  if (cmd == "DBSIZE") return RespValue::number(static_cast<std::int64_t>(strings_.size() + lists_.size()));
  if (cmd == "FLUSHALL") {
    strings_.clear();
    lists_.clear();
    return RespValue::simple("OK");
  }
  return RespValue::error("ERR unknown command '" + args[0] + "'");
}

}  // namespace tollplaza
