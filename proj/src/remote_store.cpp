#include "tollplaza/remote_store.hpp"

#include "tollplaza/errors.hpp"

namespace tollplaza {

RemoteStore::RemoteStore(const std::string& address, std::shared_ptr<ArchiveSink> archive, WallClock clock,
                         std::string prefix)
    : client_(parse_host_port(address).first, parse_host_port(address).second),
      archive_(std::move(archive)),
      clock_(std::move(clock)),
      prefix_(std::move(prefix)) {}

bool RemoteStore::ping() {
  try {
    return client_.call({"PING"}).text == "PONG";
  } catch (const StoreError&) {
    return false;
  }
}

std::optional<StoreRecord> RemoteStore::fetch(const std::string& id) {
  const auto reply = client_.call({"GET", rec_key(id)});
  if (reply.kind == RespValue::Kind::Nil) return std::nullopt;
  try {
    return record_from_json(Json::parse(reply.text));
  } catch (const std::exception& e) {
    throw StoreError("corrupt record " + id + ": " + e.what());
  }
}

void RemoteStore::write(const StoreRecord& record) {
  client_.call({"SET", rec_key(record.transaction.transaction_id), record_to_json(record).dump()});
}

std::vector<std::string> RemoteStore::ids() {
  const auto reply = client_.call({"LRANGE", prefix_ + "order", "0", "-1"});
  std::vector<std::string> out;
  out.reserve(reply.elements.size());
  for (const auto& e : reply.elements) out.push_back(e.text);
  return out;
}

PutOutcome RemoteStore::put(const TollTransaction& txn) {
  std::lock_guard lock(mu_);
  if (auto existing = fetch(txn.transaction_id)) {
    if (existing->transaction == txn) return PutOutcome::AlreadyPresent;
    throw ConflictError("transaction " + txn.transaction_id + " already stored with a different payload");
  }
  StoreRecord rec;
  rec.transaction = txn;
  rec.inserted_at = clock_();
  rec.sequence = static_cast<std::uint64_t>(client_.call({"INCR", prefix_ + "seq"}).integer);
  const auto reply =
      client_.call({"SET", rec_key(txn.transaction_id), record_to_json(rec).dump(), "NX"});
  if (reply.kind == RespValue::Kind::Nil) {
    // another process won the key between our GET and SET
    auto existing = fetch(txn.transaction_id);
    if (existing && existing->transaction == txn) return PutOutcome::AlreadyPresent;
    throw ConflictError("transaction " + txn.transaction_id + " already stored with a different payload");
  }
  client_.call({"RPUSH", prefix_ + "order", txn.transaction_id});
  return PutOutcome::Inserted;
}

std::optional<StoreRecord> RemoteStore::get(const std::string& transaction_id) {
  std::lock_guard lock(mu_);
  return fetch(transaction_id);
}

std::vector<TollTransaction> RemoteStore::recent(std::size_t window_size, bool review_only) {
  std::lock_guard lock(mu_);
  std::vector<TollTransaction> out;
  const auto all = ids();
  for (auto it = all.rbegin(); it != all.rend() && out.size() < window_size; ++it) {
    auto rec = fetch(*it);
    if (!rec || rec->archived) continue;
    if (review_only && !rec->transaction.review_required) continue;
    out.push_back(std::move(rec->transaction));
  }
  return out;
}

TollTransaction RemoteStore::amend_plate(const std::string& transaction_id, const std::string& corrected_text,
                                         const std::string& operator_id) {
  std::lock_guard lock(mu_);
  auto rec = fetch(transaction_id);
  if (!rec) throw NotFoundError("no transaction " + transaction_id);
  if (apply_amendment(*rec, corrected_text, operator_id, clock_())) write(*rec);
  return rec->transaction;
}

CleanupResult RemoteStore::archive_and_cleanup(std::int64_t now_ms, std::int64_t archive_age_ms,
                                               std::int64_t delete_age_ms) {
  if (archive_age_ms >= delete_age_ms) throw std::invalid_argument("archive age must be below delete age");
  std::lock_guard lock(mu_);
  CleanupResult result;
  const auto all = ids();
  std::vector<StoreRecord> records;
  for (const auto& id : all) {
    if (auto rec = fetch(id)) records.push_back(std::move(*rec));
  }
  for (auto& rec : records) {
    if (rec.archived || now_ms - rec.inserted_at <= archive_age_ms) continue;
    try {
      archive_->append(archive_line(rec, now_ms));
    } catch (const std::exception& e) {
      throw StoreError(std::string("archive write failed, cleanup aborted before deletion: ") + e.what());
    }
    rec.archived = true;
    write(rec);
    ++result.archived;
  }
  try {
    archive_->flush();
  } catch (const std::exception& e) {
    throw StoreError(std::string("archive flush failed, cleanup aborted before deletion: ") + e.what());
  }
  for (const auto& rec : records) {
    if (!rec.archived || now_ms - rec.inserted_at <= delete_age_ms) continue;
    const auto& id = rec.transaction.transaction_id;
    client_.call({"DEL", rec_key(id)});
    client_.call({"LREM", prefix_ + "order", "1", id});
    ++result.deleted;
  }
  return result;
}

std::vector<StoreRecord> RemoteStore::snapshot() {
  std::lock_guard lock(mu_);
  std::vector<StoreRecord> out;
  for (const auto& id : ids()) {
    if (auto rec = fetch(id)) out.push_back(std::move(*rec));
  }
  return out;
}

std::unique_ptr<TransactionStore> open_store(const std::string& address, std::shared_ptr<ArchiveSink> archive,
                                             WallClock clock) {
  if (address.empty() || address == "embedded") {
    return std::make_unique<EmbeddedStore>(std::move(archive), std::move(clock));
  }
  return std::make_unique<RemoteStore>(address, std::move(archive), std::move(clock));
}

}  // namespace tollplaza
