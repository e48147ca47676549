#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "tollplaza/pipeline.hpp"
#include "tollplaza/transaction.hpp"

namespace tollplaza {

enum class PutOutcome { Inserted, AlreadyPresent };

struct CleanupResult {
  std::size_t archived = 0;
  std::size_t deleted = 0;
  friend bool operator==(const CleanupResult&, const CleanupResult&) = default;
};

/// Destination of archived records, one line per record.
class ArchiveSink {
 public:
  virtual ~ArchiveSink() = default;
  /// Must throw on failure; a record counts as archived only after append returns.
  virtual void append(const std::string& line) = 0;
  virtual void flush() = 0;
};

class FileArchiveSink final : public ArchiveSink {
 public:
  explicit FileArchiveSink(std::filesystem::path path);
  void append(const std::string& line) override;
  void flush() override;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// Keyed transaction persistence. Implementations are thread-safe and
/// linearizable per key.
class TransactionStore {
 public:
  virtual ~TransactionStore() = default;

  /// Same payload twice is a no-op; a different payload under a used id
  /// throws ConflictError.
  virtual PutOutcome put(const TollTransaction& txn) = 0;
  virtual std::optional<StoreRecord> get(const std::string& transaction_id) = 0;

  /// Newest first, unarchived only, at most `window_size` entries. With
  /// `review_only`, records not needing review are skipped before windowing.
  virtual std::vector<TollTransaction> recent(std::size_t window_size, bool review_only = false) = 0;

  /// Throws NotFoundError or ConflictError (archived record).
  virtual TollTransaction amend_plate(const std::string& transaction_id, const std::string& corrected_text,
                                      const std::string& operator_id) = 0;

  /// Archive-before-delete. Throws StoreError when the archive write fails;
  /// nothing is deleted in that run.
  virtual CleanupResult archive_and_cleanup(std::int64_t now_ms, std::int64_t archive_age_ms,
                                            std::int64_t delete_age_ms) = 0;

  /// All live (not yet deleted) records in insertion order, from one instant.
  virtual std::vector<StoreRecord> snapshot() = 0;
};

/// In-process store: ordered map under a reader/writer lock.
class EmbeddedStore final : public TransactionStore {
 public:
  EmbeddedStore(std::shared_ptr<ArchiveSink> archive, WallClock clock = system_clock_ms);

  PutOutcome put(const TollTransaction& txn) override;
  std::optional<StoreRecord> get(const std::string& transaction_id) override;
  std::vector<TollTransaction> recent(std::size_t window_size, bool review_only = false) override;
  TollTransaction amend_plate(const std::string& transaction_id, const std::string& corrected_text,
                              const std::string& operator_id) override;
  CleanupResult archive_and_cleanup(std::int64_t now_ms, std::int64_t archive_age_ms,
                                    std::int64_t delete_age_ms) override;
  std::vector<StoreRecord> snapshot() override;

 private:
  std::shared_ptr<ArchiveSink> archive_;
  WallClock clock_;
  mutable std::shared_mutex mu_;
  std::map<std::string, StoreRecord> records_;
  std::map<std::uint64_t, std::string> by_sequence_;
  std::uint64_t next_sequence_ = 1;
};

/// Archive line: the record serialization plus the time it was archived.
std::string archive_line(const StoreRecord& record, std::int64_t archived_at_ms);

/// Shared amend rule used by every backend. Returns false for a no-op.
bool apply_amendment(StoreRecord& record, const std::string& corrected_text, const std::string& operator_id,
                     std::int64_t now_ms);

}  // namespace tollplaza
