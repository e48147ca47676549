#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tollplaza/plate_ensemble.hpp"
#include "tollplaza/trace_io.hpp"

namespace tollplaza {

struct TollTransaction {
  std::string transaction_id;
  std::uint64_t track_id = 0;
  std::string plate_text;
  double fused_confidence = 0.0;
  PlateStatus plate_status = PlateStatus::Scanning;
  int axle_count = 0;
  double axle_confidence = 0.0;
  std::string vehicle_class;
  std::int64_t toll_amount = 0;  ///< currency minor units
  std::int64_t entry_timestamp = 0;
  std::int64_t exit_timestamp = 0;
  bool review_required = true;
  std::int64_t created_at = 0;  ///< wall clock, ms since epoch

  friend bool operator==(const TollTransaction&, const TollTransaction&) = default;
};

struct AuditEntry {
  std::string operator_id;
  std::string old_text;
  std::string new_text;
  std::int64_t time_ms = 0;
  friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

struct StoreRecord {
  TollTransaction transaction;
  std::int64_t inserted_at = 0;
  bool archived = false;
  std::uint64_t sequence = 0;  ///< insertion order within the store
  std::vector<AuditEntry> audit;
  friend bool operator==(const StoreRecord&, const StoreRecord&) = default;
};

Json transaction_to_json(const TollTransaction& txn);
TollTransaction transaction_from_json(const Json& value);

Json record_to_json(const StoreRecord& record);
StoreRecord record_from_json(const Json& value);

}  // namespace tollplaza
