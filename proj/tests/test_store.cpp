#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <thread>

#include "support.hpp"
#include "tollplaza/errors.hpp"
#include "tollplaza/remote_store.hpp"
#include "tollplaza/resp.hpp"
#include "tollplaza/transaction_store.hpp"

using namespace tollplaza;
using namespace tollplaza::testing;

namespace {

constexpr std::int64_t kHour = 3'600'000;

TollTransaction txn(const std::string& id, PlateStatus status = PlateStatus::Scanning, std::string text = "ABC1235") {
  TollTransaction t;
  t.transaction_id = id;
  t.track_id = std::hash<std::string>{}(id) % 1000;
  t.plate_text = std::move(text);
  t.fused_confidence = 0.7;
  t.plate_status = status;
  t.axle_count = 2;
  t.axle_confidence = 1.0;
  t.vehicle_class = "Class-2 (car/light)";
  t.toll_amount = 200;
  t.entry_timestamp = 10;
  t.exit_timestamp = 900;
  t.review_required = status != PlateStatus::Locked;
  t.created_at = 1'700'000'000'000;
  return t;
}

class MemorySink : public ArchiveSink {
 public:
  void append(const std::string& line) override {
    std::lock_guard lock(mu);
    if (fail_after >= 0 && static_cast<int>(lines.size()) >= fail_after) throw StoreError("injected archive failure");
    lines.push_back(line);
  }
  void flush() override {}
  std::vector<std::string> archived_ids() {
    std::lock_guard lock(mu);
    std::vector<std::string> ids;
    for (const auto& l : lines) ids.push_back(Json::parse(l).at("transaction").at("transaction_id").get<std::string>());
    return ids;
  }
  std::mutex mu;
  std::vector<std::string> lines;
  int fail_after = -1;
};

struct Backend {
  std::string name;
  std::function<std::unique_ptr<TransactionStore>(std::shared_ptr<ArchiveSink>, WallClock)> open;
};

// One RESP server shared by every remote case; each store gets its own key prefix.
RespServer& shared_server() {
  static RespServer server("127.0.0.1", 0);
  return server;
}

std::unique_ptr<TransactionStore> open_remote(std::shared_ptr<ArchiveSink> sink, WallClock clock) {
  static std::atomic<int> n{0};
  const std::string addr = "127.0.0.1:" + std::to_string(shared_server().port());
  return std::make_unique<RemoteStore>(addr, std::move(sink), std::move(clock), "t" + std::to_string(n++) + ":");
}

class StoreTest : public ::testing::TestWithParam<Backend> {
 protected:
  void SetUp() override {
    sink = std::make_shared<MemorySink>();
    store = GetParam().open(sink, [this] { return now.load(); });
  }
  std::atomic<std::int64_t> now{1'000'000};
  std::shared_ptr<MemorySink> sink;
  std::unique_ptr<TransactionStore> store;
};

std::vector<std::string> ids_of(const std::vector<TollTransaction>& v) {
  std::vector<std::string> out;
  for (const auto& t : v) out.push_back(t.transaction_id);
  return out;
}

}  // namespace

TEST_P(StoreTest, PutThenGet) {
  EXPECT_EQ(store->put(txn("a")), PutOutcome::Inserted);
  const auto r = store->get("a");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->transaction, txn("a"));
  EXPECT_EQ(r->inserted_at, 1'000'000);
  EXPECT_FALSE(r->archived);
  EXPECT_FALSE(store->get("missing"));
}

TEST_P(StoreTest, DuplicatePut) {
  store->put(txn("a"));
  const auto before = store->snapshot();
  EXPECT_EQ(store->put(txn("a")), PutOutcome::AlreadyPresent);
  EXPECT_EQ(store->snapshot(), before);
  auto other = txn("a");
  other.plate_text = "ZZZ9999";
  EXPECT_THROW(store->put(other), ConflictError);
  EXPECT_EQ(store->snapshot(), before);
}

TEST_P(StoreTest, RecentOrderingAndWindow) {
  EXPECT_TRUE(store->recent(5).empty());
  for (const char* id : {"a", "b", "c"}) store->put(txn(id));
  EXPECT_EQ(ids_of(store->recent(2)), (std::vector<std::string>{"c", "b"}));
  EXPECT_EQ(ids_of(store->recent(1)), (std::vector<std::string>{"c"}));
}

TEST_P(StoreTest, RecentSkipsArchived) {
  // only the middle record is old enough to archive
  store->put(txn("a"));
  now -= 5 * kHour;
  store->put(txn("b"));
  now += 5 * kHour;
  store->put(txn("c"));
  EXPECT_EQ(store->archive_and_cleanup(now.load(), kHour, 100 * kHour), (CleanupResult{1, 0}));
  EXPECT_EQ(ids_of(store->recent(3)), (std::vector<std::string>{"c", "a"}));
  EXPECT_TRUE(store->get("b")->archived);
}

TEST_P(StoreTest, RecentReviewOnly) {
  store->put(txn("a", PlateStatus::Scanning));
  store->put(txn("b", PlateStatus::Locked));
  store->put(txn("c", PlateStatus::Scanning));
  store->put(txn("d", PlateStatus::Locked));
  EXPECT_EQ(ids_of(store->recent(10, true)), (std::vector<std::string>{"c", "a"}));
  EXPECT_EQ(ids_of(store->recent(1, true)), (std::vector<std::string>{"c"}));
}

TEST_P(StoreTest, AmendPlate) {
  store->put(txn("a"));
  now += 5;
  const auto t = store->amend_plate("a", "ABC1234", "op7");
  EXPECT_EQ(t.plate_text, "ABC1234");
  EXPECT_EQ(t.plate_status, PlateStatus::ManuallyCorrected);
  EXPECT_FALSE(t.review_required);
  EXPECT_EQ(t.toll_amount, 200);
  const auto r = store->get("a");
  ASSERT_EQ(r->audit.size(), 1u);
  EXPECT_EQ(r->audit[0], (AuditEntry{"op7", "ABC1235", "ABC1234", 1'000'005}));

  EXPECT_EQ(store->amend_plate("a", "ABC1234", "op8"), t);
  EXPECT_EQ(store->get("a")->audit.size(), 1u);
  EXPECT_THROW(store->amend_plate("nope", "ABC1234", "op"), NotFoundError);
}

TEST_P(StoreTest, AmendArchivedConflicts) {
  store->put(txn("a"));
  now += 2 * kHour;
  store->archive_and_cleanup(now.load(), kHour, 10 * kHour);
  EXPECT_THROW(store->amend_plate("a", "ABC1234", "op"), ConflictError);
  EXPECT_EQ(store->get("a")->transaction, txn("a"));
}

TEST_P(StoreTest, CleanupExamples) {
  store->put(txn("a"));
  EXPECT_EQ(store->archive_and_cleanup(now.load(), kHour, 10 * kHour), (CleanupResult{0, 0}));
  EXPECT_EQ(store->archive_and_cleanup(now.load() + 2 * kHour, kHour, 10 * kHour), (CleanupResult{1, 0}));
  EXPECT_EQ(store->archive_and_cleanup(now.load() + 2 * kHour, kHour, 10 * kHour), (CleanupResult{0, 0}));  // idempotent
  EXPECT_EQ(sink->lines.size(), 1u);

  store->put(txn("b"));
  EXPECT_EQ(store->archive_and_cleanup(now.load() + 11 * kHour, kHour, 10 * kHour), (CleanupResult{1, 2}));
  EXPECT_EQ(sink->archived_ids(), (std::vector<std::string>{"a", "b"}));
  EXPECT_FALSE(store->get("a"));
  EXPECT_FALSE(store->get("b"));
  EXPECT_THROW(store->archive_and_cleanup(now.load(), kHour, kHour), std::invalid_argument);
}

TEST_P(StoreTest, ArchiveLineCarriesAudit) {
  store->put(txn("a"));
  store->amend_plate("a", "ABC1234", "op1");
  store->archive_and_cleanup(now.load() + 2 * kHour, kHour, 10 * kHour);
  const auto j = Json::parse(sink->lines.at(0));
  EXPECT_TRUE(j.at("archived").get<bool>());
  const auto rec = record_from_json(j);
  EXPECT_EQ(rec.transaction.plate_text, "ABC1234");
  EXPECT_EQ(rec.audit.size(), 1u);
}

TEST_P(StoreTest, ArchiveFailureDeletesNothing) {
  for (int i = 0; i < 6; ++i) store->put(txn("t" + std::to_string(i)));
  sink->fail_after = 3;
  const auto before = store->snapshot();
  EXPECT_THROW(store->archive_and_cleanup(now.load() + 20 * kHour, kHour, 10 * kHour), StoreError);
  const auto after = store->snapshot();
  ASSERT_EQ(after.size(), before.size());
  // anything flagged archived already has its line in the archive
  const auto archived = sink->archived_ids();
  for (const auto& r : after) {
    if (r.archived) {
      EXPECT_NE(std::find(archived.begin(), archived.end(), r.transaction.transaction_id), archived.end());
    }
  }
  sink->fail_after = -1;
  EXPECT_EQ(store->archive_and_cleanup(now.load() + 20 * kHour, kHour, 10 * kHour).deleted, 6u);
}

TEST_P(StoreTest, NoDeletionWithoutArchiveProperty) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Gen g(seed);
    auto s = std::make_shared<MemorySink>();
    std::atomic<std::int64_t> clock{1'000'000};
    auto st = GetParam().open(s, [&] { return clock.load(); });
    std::set<std::string> ever;
    for (int step = 0; step < 40; ++step) {
      const int op = g.integer(0, 3);
      if (op <= 1) {
        const std::string id = "k" + std::to_string(g.integer(0, 15));
        try {
          st->put(txn(id));
          ever.insert(id);
        } catch (const ConflictError&) {
        }
      } else if (op == 2) {
        clock += g.integer(0, 3) * kHour;
      } else {
        s->fail_after = g.chance(0.3) ? static_cast<int>(s->lines.size()) + g.integer(0, 2) : -1;
        try {
          st->archive_and_cleanup(clock.load(), kHour, 3 * kHour);
        } catch (const StoreError&) {
        }
      }
    }
    std::set<std::string> live;
    for (const auto& r : st->snapshot()) live.insert(r.transaction.transaction_id);
    const auto archived = s->archived_ids();
    const std::set<std::string> archived_set(archived.begin(), archived.end());
    for (const auto& id : ever) {
      if (!live.count(id)) {
        ASSERT_TRUE(archived_set.count(id)) << id << " deleted without archive, seed " << seed;
      }
    }
  }
}

TEST_P(StoreTest, DeterministicContents) {
  auto play = [&](std::uint64_t seed) {
    Gen g(seed);
    auto s = std::make_shared<MemorySink>();
    std::int64_t clock = 1'000'000;
    auto st = GetParam().open(s, [&] { return clock; });
    for (int step = 0; step < 60; ++step) {
      const std::string id = "k" + std::to_string(g.integer(0, 9));
      try {
        switch (g.integer(0, 4)) {
          case 0: case 1: st->put(txn(id, g.chance(0.5) ? PlateStatus::Locked : PlateStatus::Scanning)); break;
          case 2: st->amend_plate(id, g.plate(), "op"); break;
          case 3: clock += kHour; break;
          default: st->archive_and_cleanup(clock, 2 * kHour, 5 * kHour);
        }
      } catch (const std::runtime_error&) {
      }
    }
    Json out = Json::array();
    for (const auto& r : st->snapshot()) out.push_back(record_to_json(r));
    return out.dump() + "|" + std::to_string(s->lines.size());
  };
  for (std::uint64_t seed = 1; seed <= 10; ++seed) ASSERT_EQ(play(seed), play(seed));
}

// Wing-Gong style check on one key: the concurrent history of amend, get and
// cleanup must admit a sequential order consistent with real time in which
// every response matches the sequential model.
TEST_P(StoreTest, ConcurrentAmendAndCleanupAreLinearizable) {
  struct Op {
    enum Kind { Amend, Get, Cleanup } kind;
    std::string text;       // amend input
    bool ok = true;         // amend: false = conflict
    std::string seen_text;  // get output
    std::size_t seen_audit = 0;
    bool seen_archived = false;
    std::int64_t start = 0, end = 0;
  };
  struct Model {
    std::string text;
    std::size_t audit = 0;
    bool corrected = false;
    bool archived = false;
  };

  for (int round = 0; round < 8; ++round) {
    auto s = std::make_shared<MemorySink>();
    std::atomic<std::int64_t> clock{1'000'000};
    auto st = GetParam().open(s, [&] { return clock.load(); });
    st->put(txn("k"));
    std::atomic<std::int64_t> ticks{0};
    std::vector<std::vector<Op>> per_thread(3);
    std::vector<std::thread> threads;
    for (int t = 0; t < 3; ++t) {
      threads.emplace_back([&, t] {
        Gen g(static_cast<std::uint64_t>(round * 10 + t));
        for (int i = 0; i < 3; ++i) {
          Op op;
          const int pick = (t == 2 && i == 1) ? 2 : g.integer(0, 1);
          op.kind = static_cast<Op::Kind>(pick);
          op.start = ticks++;
          if (op.kind == Op::Amend) {
            op.text = std::string("AB") + static_cast<char>('A' + g.integer(0, 1)) + "1234";
            try {
              st->amend_plate("k", op.text, "op");
            } catch (const ConflictError&) {
              op.ok = false;
            }
          } else if (op.kind == Op::Get) {
            const auto r = st->get("k");
            op.seen_text = r->transaction.plate_text;
            op.seen_audit = r->audit.size();
            op.seen_archived = r->archived;
          } else {
            st->archive_and_cleanup(clock.load() + 2 * kHour, kHour, 100 * kHour);
          }
          op.end = ticks++;
          per_thread[static_cast<std::size_t>(t)].push_back(op);
        }
      });
    }
    for (auto& th : threads) th.join();

    std::vector<Op> ops;
    for (auto& v : per_thread) ops.insert(ops.end(), v.begin(), v.end());
    std::vector<bool> done(ops.size(), false);
    std::function<bool(Model, std::size_t)> search = [&](Model m, std::size_t placed) {
      if (placed == ops.size()) return true;
      // candidates: ops not done whose start precedes every pending op's end
      std::int64_t min_end = std::numeric_limits<std::int64_t>::max();
      for (std::size_t i = 0; i < ops.size(); ++i)
        if (!done[i]) min_end = std::min(min_end, ops[i].end);
      for (std::size_t i = 0; i < ops.size(); ++i) {
        if (done[i] || ops[i].start > min_end) continue;
        Model next = m;
        const auto& op = ops[i];
        bool fits = true;
        if (op.kind == Op::Amend) {
          if (m.archived) {
            fits = !op.ok;
          } else {
            fits = op.ok;
            if (!(m.corrected && m.text == op.text)) {
              next.text = op.text;
              next.corrected = true;
              ++next.audit;
            }
          }
        } else if (op.kind == Op::Get) {
          fits = op.seen_text == m.text && op.seen_audit == m.audit && op.seen_archived == m.archived;
        } else {
          next.archived = true;
        }
        if (!fits) continue;
        done[i] = true;
        if (search(next, placed + 1)) return true;
        done[i] = false;
      }
      return false;
    };
    ASSERT_TRUE(search(Model{"ABC1235", 0, false, false}, 0)) << "round " << round;
  }
}

TEST_P(StoreTest, ConcurrentPutsAllLand) {
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 25; ++i) store->put(txn("t" + std::to_string(t) + "-" + std::to_string(i)));
    });
  }
  for (auto& th : threads) th.join();
  const auto snap = store->snapshot();
  EXPECT_EQ(snap.size(), 100u);
  std::set<std::uint64_t> seqs;
  for (const auto& r : snap) seqs.insert(r.sequence);
  EXPECT_EQ(seqs.size(), 100u);
  EXPECT_EQ(store->recent(1000).size(), 100u);
}

INSTANTIATE_TEST_SUITE_P(Backends, StoreTest,
                         ::testing::Values(Backend{"embedded",
                                                   [](std::shared_ptr<ArchiveSink> s, WallClock c) {
                                                     return std::unique_ptr<TransactionStore>(
                                                         std::make_unique<EmbeddedStore>(std::move(s), std::move(c)));
                                                   }},
                                           Backend{"remote", open_remote}),
                         [](const auto& info) { return info.param.name; });

TEST(OpenStore, SelectsBackend) {
  auto sink = std::make_shared<MemorySink>();
  EXPECT_NE(dynamic_cast<EmbeddedStore*>(open_store("embedded", sink).get()), nullptr);
  EXPECT_NE(dynamic_cast<EmbeddedStore*>(open_store("", sink).get()), nullptr);
  const auto remote = open_store("127.0.0.1:" + std::to_string(shared_server().port()), sink);
  EXPECT_NE(dynamic_cast<RemoteStore*>(remote.get()), nullptr);
  EXPECT_THROW(open_store("not-an-address", sink), ValidationError);
}

TEST(RemoteStore, ServerLossSurfacesAsStoreError) {
  auto server = std::make_unique<RespServer>("127.0.0.1", 0);
  RemoteStore st("127.0.0.1:" + std::to_string(server->port()), std::make_shared<MemorySink>());
  EXPECT_TRUE(st.ping());
  st.put(txn("a"));
  server.reset();
  EXPECT_FALSE(st.ping());
  EXPECT_THROW(st.put(txn("b")), StoreError);
  EXPECT_THROW(st.get("a"), StoreError);
}

TEST(RemoteStore, UnreachableServiceIsStoreError) {
  std::uint16_t dead_port;
  {
    RespServer tmp("127.0.0.1", 0);
    dead_port = tmp.port();
  }
  // the client connects eagerly, so a dead address fails at open time
  EXPECT_THROW(RemoteStore("127.0.0.1:" + std::to_string(dead_port), std::make_shared<MemorySink>()), StoreError);
}

TEST(FileArchiveSink, AppendsLines) {
  const auto path = std::filesystem::temp_directory_path() / ("tollplaza-archive-" + std::to_string(::getpid()) + ".jsonl");
  std::filesystem::remove(path);
  {
    FileArchiveSink sink(path);
    sink.append("{\"a\":1}");
    sink.append("{\"b\":2}");
    sink.flush();
  }
  std::ifstream in(path);
  std::string l1, l2;
  std::getline(in, l1);
  std::getline(in, l2);
  EXPECT_EQ(l1, "{\"a\":1}");
  EXPECT_EQ(l2, "{\"b\":2}");
  std::filesystem::remove(path);
  FileArchiveSink bad("/nonexistent-dir/x/archive.jsonl");
  EXPECT_THROW(bad.append("x"), StoreError);
}

TEST(TransactionJson, RoundTrip) {
  StoreRecord r;
  r.transaction = txn("a", PlateStatus::Locked);
  r.inserted_at = 5;
  r.sequence = 9;
  r.audit = {{"op", "A", "B", 7}};
  EXPECT_EQ(record_from_json(record_to_json(r)), r);
  EXPECT_EQ(transaction_from_json(transaction_to_json(r.transaction)), r.transaction);
}
