#include <boost/asio/connect.hpp>
#include <boost/asio/read.hpp>
#include <boost/asio/write.hpp>
#include <charconv>

#include "tollplaza/errors.hpp"
#include "tollplaza/resp.hpp"

namespace tollplaza {

namespace asio = boost::asio;
using asio::ip::tcp;

std::string encode(const RespValue& v) {
  switch (v.kind) {
    case RespValue::Kind::Simple: return "+" + v.text + "\r\n";
    case RespValue::Kind::Error: return "-" + v.text + "\r\n";
    case RespValue::Kind::Integer: return ":" + std::to_string(v.integer) + "\r\n";
    case RespValue::Kind::Bulk: return "$" + std::to_string(v.text.size()) + "\r\n" + v.text + "\r\n";
    case RespValue::Kind::Nil: return "$-1\r\n";
    case RespValue::Kind::Array: {
      std::string out = "*" + std::to_string(v.elements.size()) + "\r\n";
      for (const auto& e : v.elements) out += encode(e);
      return out;
    }
  }
  return {};
}

std::string encode_command(const std::vector<std::string>& args) {
  std::vector<RespValue> parts;
  parts.reserve(args.size());
  for (const auto& a : args) parts.push_back(RespValue::bulk(a));
  return encode(RespValue::array(std::move(parts)));
}

namespace {

std::int64_t parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw FormatError("resp: bad integer '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::optional<std::string_view> RespParser::line_at(std::size_t& pos) const {
  const auto end = buffer_.find("\r\n", pos);
  if (end == std::string::npos) return std::nullopt;
  std::string_view line(buffer_.data() + pos, end - pos);
  pos = end + 2;
  return line;
}

std::optional<RespValue> RespParser::parse_at(std::size_t& pos) {
  if (pos >= buffer_.size()) return std::nullopt;
  const char tag = buffer_[pos];
  std::size_t p = pos + 1;
  auto line = line_at(p);
  if (!line) return std::nullopt;
  RespValue out;
  switch (tag) {
    case '+': out = RespValue::simple(std::string(*line)); break;
    case '-': out = RespValue::error(std::string(*line)); break;
    case ':': out = RespValue::number(parse_int(*line)); break;
    case '$': {
      const auto len = parse_int(*line);
      if (len < -1) throw FormatError("resp: negative bulk length");
      if (len == -1) {
        out = RespValue::nil();
        break;
      }
      if (buffer_.size() < p + static_cast<std::size_t>(len) + 2) return std::nullopt;
      if (buffer_.compare(p + static_cast<std::size_t>(len), 2, "\r\n") != 0) throw FormatError("resp: bulk not terminated");
      out = RespValue::bulk(buffer_.substr(p, static_cast<std::size_t>(len)));
      p += static_cast<std::size_t>(len) + 2;
      break;
    }
    case '*': {
      const auto n = parse_int(*line);
      if (n < -1) throw FormatError("resp: negative array length");
      if (n == -1) {
        out = RespValue::nil();
        break;
      }
      std::vector<RespValue> elems;
      for (std::int64_t i = 0; i < n; ++i) {
        auto e = parse_at(p);
        if (!e) return std::nullopt;
        elems.push_back(std::move(*e));
      }
      out = RespValue::array(std::move(elems));
      break;
    }
    default: throw FormatError(std::string("resp: unexpected type byte '") + tag + "'");
  }
  pos = p;
  return out;
}

std::optional<RespValue> RespParser::next() {
  std::size_t p = pos_;
  auto v = parse_at(p);
  if (!v) return std::nullopt;
  pos_ = p;
  if (pos_ > 4096 && pos_ * 2 > buffer_.size()) {
    buffer_.erase(0, pos_);
    pos_ = 0;
  }
  return v;
}

std::pair<std::string, std::uint16_t> parse_host_port(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == address.size()) {
    throw ValidationError("address must be host:port, got '" + std::string(address) + "'");
  }
  std::int64_t port = -1;
  try {
    port = parse_int(address.substr(colon + 1));
  } catch (const FormatError&) {
  }
  if (port < 0 || port > 65535) throw ValidationError("port out of range in '" + std::string(address) + "'");
  return {std::string(address.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

RespClient::RespClient(std::string host, std::uint16_t port) : host_(std::move(host)), port_(port) { connect(); }

RespClient::~RespClient() {
  if (socket_) {
    boost::system::error_code ec;
    socket_->close(ec);
  }
}

void RespClient::connect() {
  try {
    tcp::resolver resolver(io_);
    auto sock = std::make_unique<tcp::socket>(io_);
    asio::connect(*sock, resolver.resolve(host_, std::to_string(port_)));
    sock->set_option(tcp::no_delay(true));
    socket_ = std::move(sock);
    parser_ = RespParser{};
  } catch (const boost::system::system_error& e) {
    socket_.reset();
    throw StoreError("cannot connect to store at " + host_ + ":" + std::to_string(port_) + ": " + e.what());
  }
}

RespValue RespClient::round_trip(const std::string& request) {
  asio::write(*socket_, asio::buffer(request));
  char buf[16384];
  for (;;) {
    if (auto v = parser_.next()) return *v;
    const auto n = socket_->read_some(asio::buffer(buf));
    parser_.feed(std::string_view(buf, n));
  }
}

RespValue RespClient::call(const std::vector<std::string>& args) {
  std::lock_guard lock(mu_);
  const auto request = encode_command(args);
  RespValue reply;
  // A failed command is never resent: it may have been applied.
  if (!socket_) connect();
  try {
    reply = round_trip(request);
  } catch (const boost::system::system_error& e) {
    socket_.reset();
    throw StoreError(std::string("store I/O failed: ") + e.what());
  }
  if (reply.kind == RespValue::Kind::Error) throw StoreError("store replied: " + reply.text);
  return reply;
}

}  // namespace tollplaza
