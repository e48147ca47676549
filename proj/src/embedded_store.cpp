#include <mutex>

#include "tollplaza/errors.hpp"
#include "tollplaza/transaction_store.hpp"

namespace tollplaza {

FileArchiveSink::FileArchiveSink(std::filesystem::path path) : path_(std::move(path)) {}

void FileArchiveSink::append(const std::string& line) {
  if (!out_.is_open()) {
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw StoreError("cannot open archive file " + path_.string());
  }
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw StoreError("write to archive file " + path_.string() + " failed");
}

void FileArchiveSink::flush() {
  if (out_.is_open()) {
    out_.flush();
    if (!out_) throw StoreError("flush of archive file " + path_.string() + " failed");
  }
}

std::string archive_line(const StoreRecord& record, std::int64_t archived_at_ms) {
  Json j = record_to_json(record);
  j["archived"] = true;
  j["archived_at_ms"] = archived_at_ms;
  return j.dump();
}

bool apply_amendment(StoreRecord& record, const std::string& corrected_text, const std::string& operator_id,
                     std::int64_t now_ms) {
  if (record.archived) {
    throw ConflictError("transaction " + record.transaction.transaction_id + " is archived");
  }
  auto& txn = record.transaction;
  if (txn.plate_status == PlateStatus::ManuallyCorrected && txn.plate_text == corrected_text) return false;
  record.audit.push_back({operator_id, txn.plate_text, corrected_text, now_ms});
  txn.plate_text = corrected_text;
  txn.plate_status = PlateStatus::ManuallyCorrected;
  txn.review_required = false;
  return true;
}

EmbeddedStore::EmbeddedStore(std::shared_ptr<ArchiveSink> archive, WallClock clock)
    : archive_(std::move(archive)), clock_(std::move(clock)) {}

PutOutcome EmbeddedStore::put(const TollTransaction& txn) {
  std::unique_lock lock(mu_);
  if (auto it = records_.find(txn.transaction_id); it != records_.end()) {
    if (it->second.transaction == txn) return PutOutcome::AlreadyPresent;
    throw ConflictError("transaction " + txn.transaction_id + " already stored with a different payload");
  }
  StoreRecord rec;
  rec.transaction = txn;
  rec.inserted_at = clock_();
  rec.sequence = next_sequence_++;
  by_sequence_.emplace(rec.sequence, txn.transaction_id);
  records_.emplace(txn.transaction_id, std::move(rec));
  return PutOutcome::Inserted;
}

std::optional<StoreRecord> EmbeddedStore::get(const std::string& transaction_id) {
  std::shared_lock lock(mu_);
  auto it = records_.find(transaction_id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<TollTransaction> EmbeddedStore::recent(std::size_t window_size, bool review_only) {
  std::shared_lock lock(mu_);
  std::vector<TollTransaction> out;
  for (auto it = by_sequence_.rbegin(); it != by_sequence_.rend() && out.size() < window_size; ++it) {
    const auto& rec = records_.at(it->second);
    if (rec.archived) continue;
    if (review_only && !rec.transaction.review_required) continue;
    out.push_back(rec.transaction);
  }
  return out;
}

TollTransaction EmbeddedStore::amend_plate(const std::string& transaction_id, const std::string& corrected_text,
                                           const std::string& operator_id) {
  std::unique_lock lock(mu_);
  auto it = records_.find(transaction_id);
  if (it == records_.end()) throw NotFoundError("no transaction " + transaction_id);
  apply_amendment(it->second, corrected_text, operator_id, clock_());
  return it->second.transaction;
}

CleanupResult EmbeddedStore::archive_and_cleanup(std::int64_t now_ms, std::int64_t archive_age_ms,
                                                 std::int64_t delete_age_ms) {
  if (archive_age_ms >= delete_age_ms) throw std::invalid_argument("archive age must be below delete age");
  std::unique_lock lock(mu_);
  CleanupResult result;

  // Phase 1: archive. A record is flagged only once its line is written.
  for (const auto& [seq, id] : by_sequence_) {
    auto& rec = records_.at(id);
    if (rec.archived || now_ms - rec.inserted_at <= archive_age_ms) continue;
    try {
      archive_->append(archive_line(rec, now_ms));
    } catch (const std::exception& e) {
      throw StoreError(std::string("archive write failed, cleanup aborted before deletion: ") + e.what());
    }
    rec.archived = true;
    ++result.archived;
  }
  try {
    archive_->flush();
  } catch (const std::exception& e) {
    throw StoreError(std::string("archive flush failed, cleanup aborted before deletion: ") + e.what());
  }

  // Phase 2: delete archived records past the retention age.
  for (auto it = by_sequence_.begin(); it != by_sequence_.end();) {
    const auto& rec = records_.at(it->second);
    if (rec.archived && now_ms - rec.inserted_at > delete_age_ms) {
      records_.erase(it->second);
      it = by_sequence_.erase(it);
      ++result.deleted;
    } else {
      ++it;
    }
  }
  return result;
}

std::vector<StoreRecord> EmbeddedStore::snapshot() {
  std::shared_lock lock(mu_);
  std::vector<StoreRecord> out;
  out.reserve(records_.size());
  for (const auto& [seq, id] : by_sequence_) out.push_back(records_.at(id));
  return out;
}

}  // namespace tollplaza
