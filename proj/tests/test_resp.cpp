#include <gtest/gtest.h>

#include <thread>

#include "support.hpp"
#include "tollplaza/errors.hpp"
#include "tollplaza/resp.hpp"

using namespace tollplaza;
using tollplaza::testing::Gen;

TEST(RespEncode, WireFormat) {
  EXPECT_EQ(encode(RespValue::simple("OK")), "+OK\r\n");
  EXPECT_EQ(encode(RespValue::error("ERR x")), "-ERR x\r\n");
  EXPECT_EQ(encode(RespValue::number(-42)), ":-42\r\n");
  EXPECT_EQ(encode(RespValue::bulk("hi")), "$2\r\nhi\r\n");
  EXPECT_EQ(encode(RespValue::nil()), "$-1\r\n");
  EXPECT_EQ(encode(RespValue::array({RespValue::number(1), RespValue::bulk("")})), "*2\r\n:1\r\n$0\r\n\r\n");
  EXPECT_EQ(encode_command({"GET", "k"}), "*2\r\n$3\r\nGET\r\n$1\r\nk\r\n");
}

TEST(RespParser, IncrementalFeeding) {
  const std::string wire = encode(RespValue::array({RespValue::bulk("a\r\nb"), RespValue::number(7), RespValue::nil()}));
  RespParser p;
  for (std::size_t i = 0; i + 1 < wire.size(); ++i) {
    p.feed(wire.substr(i, 1));
    ASSERT_FALSE(p.next()) << "byte " << i;
  }
  p.feed(wire.substr(wire.size() - 1));
  const auto v = p.next();
  ASSERT_TRUE(v);
  EXPECT_EQ(v->elements.at(0).text, "a\r\nb");
  EXPECT_EQ(v->elements.at(1).integer, 7);
  EXPECT_EQ(v->elements.at(2).kind, RespValue::Kind::Nil);
  EXPECT_EQ(p.buffered(), 0u);
}

TEST(RespParser, Malformed) {
  for (const char* bad : {"?x\r\n", ":abc\r\n", "$-5\r\n", "$3\r\nabcd\r\n", "*-2\r\n"}) {
    RespParser p;
    p.feed(bad);
    EXPECT_THROW(p.next(), FormatError) << bad;
  }
}

TEST(RespProperty, EncodeParseRoundTrip) {
  std::function<RespValue(Gen&, int)> make = [&](Gen& g, int depth) -> RespValue {
    switch (g.integer(0, depth > 2 ? 4 : 5)) {
      case 0: return RespValue::simple(g.text(static_cast<std::size_t>(g.integer(0, 8))));
      case 1: return RespValue::error("ERR " + g.text(3));
      case 2: return RespValue::number(g.integer(-100000, 100000));
      case 3: {
        std::string s;
        for (int i = g.integer(0, 20); i > 0; --i) s += static_cast<char>(g.integer(0, 255));
        return RespValue::bulk(s);
      }
      case 4: return RespValue::nil();
      default: {
        std::vector<RespValue> v;
        for (int i = g.integer(0, 4); i > 0; --i) v.push_back(make(g, depth + 1));
        return RespValue::array(std::move(v));
      }
    }
  };
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    Gen g(seed);
    std::vector<RespValue> values;
    std::string wire;
    for (int i = g.integer(1, 5); i > 0; --i) {
      values.push_back(make(g, 0));
      wire += encode(values.back());
    }
    RespParser p;
    std::size_t pos = 0;
    std::vector<RespValue> got;
    while (pos < wire.size()) {
      const auto n = std::min<std::size_t>(static_cast<std::size_t>(g.integer(1, 16)), wire.size() - pos);
      p.feed(std::string_view(wire).substr(pos, n));
      pos += n;
      while (auto v = p.next()) got.push_back(*v);
    }
    ASSERT_EQ(got, values) << "seed " << seed;
  }
}

TEST(HostPort, Parse) {
  EXPECT_EQ(parse_host_port("127.0.0.1:6379"), (std::pair<std::string, std::uint16_t>{"127.0.0.1", 6379}));
  EXPECT_EQ(parse_host_port("localhost:0").second, 0);
  for (const char* bad : {"", "host", ":80", "h:", "h:99999", "h:12x"}) EXPECT_THROW(parse_host_port(bad), ValidationError) << bad;
}

TEST(RespServer, Commands) {
  RespServer s("127.0.0.1", 0);
  EXPECT_EQ(s.execute({"PING"}), RespValue::simple("PONG"));
  EXPECT_EQ(s.execute({"set", "k", "v"}), RespValue::simple("OK"));
  EXPECT_EQ(s.execute({"GET", "k"}), RespValue::bulk("v"));
  EXPECT_EQ(s.execute({"SET", "k", "w", "NX"}), RespValue::nil());
  EXPECT_EQ(s.execute({"SET", "n", "1", "NX"}), RespValue::simple("OK"));
  EXPECT_EQ(s.execute({"INCR", "c"}), RespValue::number(1));
  EXPECT_EQ(s.execute({"INCR", "c"}), RespValue::number(2));
  EXPECT_EQ(s.execute({"INCR", "k"}).kind, RespValue::Kind::Error);
  EXPECT_EQ(s.execute({"RPUSH", "l", "a", "b", "c", "b"}), RespValue::number(4));
  EXPECT_EQ(s.execute({"LRANGE", "l", "0", "-1"}).elements.size(), 4u);
  EXPECT_EQ(s.execute({"LRANGE", "l", "-2", "-1"}),
            RespValue::array({RespValue::bulk("c"), RespValue::bulk("b")}));
  EXPECT_EQ(s.execute({"LREM", "l", "0", "b"}), RespValue::number(2));
  EXPECT_EQ(s.execute({"LRANGE", "l", "0", "10"}), RespValue::array({RespValue::bulk("a"), RespValue::bulk("c")}));
  EXPECT_EQ(s.execute({"GET", "l"}).kind, RespValue::Kind::Error);
  EXPECT_EQ(s.execute({"DEL", "k", "l", "none"}), RespValue::number(2));
  EXPECT_EQ(s.execute({"DBSIZE"}), RespValue::number(2));
  EXPECT_EQ(s.execute({"FLUSHALL"}), RespValue::simple("OK"));
  EXPECT_EQ(s.execute({"DBSIZE"}), RespValue::number(0));
  EXPECT_EQ(s.execute({"NOPE"}).kind, RespValue::Kind::Error);
  EXPECT_EQ(s.execute({"GET"}).kind, RespValue::Kind::Error);
}

TEST(RespServer, ClientRoundTripAndConcurrency) {
  RespServer s("127.0.0.1", 0);
  RespClient c("127.0.0.1", s.port());
  EXPECT_EQ(c.call({"PING"}), RespValue::simple("PONG"));
  EXPECT_THROW(c.call({"NOPE"}), StoreError);  // error replies surface as StoreError
  EXPECT_EQ(c.call({"PING"}), RespValue::simple("PONG"));

  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      RespClient mine("127.0.0.1", s.port());
      for (int i = 0; i < 100; ++i) mine.call({"INCR", "ctr"});
    });
  }
  for (int t = 0; t < 2; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) c.call({"INCR", "ctr"});  // shared client, calls serialized
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(c.call({"GET", "ctr"}), RespValue::bulk("500"));
  const std::string big(1 << 20, 'z');
  c.call({"SET", "big", big});
  EXPECT_EQ(c.call({"GET", "big"}).text.size(), big.size());
}

TEST(RespServer, StopIsPromptAndIdempotent) {
  auto s = std::make_unique<RespServer>("127.0.0.1", 0);
  RespClient c("127.0.0.1", s->port());
  c.call({"PING"});
  const auto t0 = std::chrono::steady_clock::now();
  s->stop();
  s->stop();
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(2));
  EXPECT_THROW(c.call({"PING"}), StoreError);
}
