#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "tollplaza/resp.hpp"
#include "tollplaza/transaction_store.hpp"

namespace tollplaza {

/// TransactionStore backed by an external RESP key-value service.
///
/// Layout under `prefix`: `rec:<id>` holds the record document, `order` lists
/// ids in insertion order, `seq` is the insertion counter. Compound operations
/// are serialized inside this client, so per-key linearizability holds for all
/// writers sharing one RemoteStore.
class RemoteStore final : public TransactionStore {
 public:
  RemoteStore(const std::string& address, std::shared_ptr<ArchiveSink> archive, WallClock clock = system_clock_ms,
              std::string prefix = "tollplaza:");

  PutOutcome put(const TollTransaction& txn) override;
  std::optional<StoreRecord> get(const std::string& transaction_id) override;
  std::vector<TollTransaction> recent(std::size_t window_size, bool review_only = false) override;
  TollTransaction amend_plate(const std::string& transaction_id, const std::string& corrected_text,
                              const std::string& operator_id) override;
  CleanupResult archive_and_cleanup(std::int64_t now_ms, std::int64_t archive_age_ms,
                                    std::int64_t delete_age_ms) override;
  std::vector<StoreRecord> snapshot() override;

  bool ping();

 private:
  std::string rec_key(const std::string& id) const { return prefix_ + "rec:" + id; }
  std::optional<StoreRecord> fetch(const std::string& id);
  void write(const StoreRecord& record);
  std::vector<std::string> ids();

  RespClient client_;
  std::shared_ptr<ArchiveSink> archive_;
  WallClock clock_;
  std::string prefix_;
  std::mutex mu_;
};

/// Opens the backend named by `address`: "embedded" (or empty) for the
/// in-process store, otherwise host:port of a RESP service.
std::unique_ptr<TransactionStore> open_store(const std::string& address, std::shared_ptr<ArchiveSink> archive,
                                             WallClock clock = system_clock_ms);

}  // namespace tollplaza
