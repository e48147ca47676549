#include "tollplaza/transaction.hpp"

#include "tollplaza/errors.hpp"

namespace tollplaza {

Json transaction_to_json(const TollTransaction& t) {
  return Json{{"transaction_id", t.transaction_id},
              {"track_id", t.track_id},
              {"plate_text", t.plate_text},
              {"fused_confidence", round6(t.fused_confidence)},
              {"plate_status", std::string(to_string(t.plate_status))},
              {"axle_count", t.axle_count},
              {"axle_confidence", round6(t.axle_confidence)},
              {"vehicle_class", t.vehicle_class},
              {"toll_amount", t.toll_amount},
              {"entry_timestamp_ms", t.entry_timestamp},
              {"exit_timestamp_ms", t.exit_timestamp},
              {"review_required", t.review_required},
              {"created_at_ms", t.created_at}};
}

TollTransaction transaction_from_json(const Json& v) {
  try {
    TollTransaction t;
    t.transaction_id = v.at("transaction_id").get<std::string>();
    t.track_id = v.at("track_id").get<std::uint64_t>();
    t.plate_text = v.at("plate_text").get<std::string>();
    t.fused_confidence = v.at("fused_confidence").get<double>();
    const auto status = plate_status_from_string(v.at("plate_status").get<std::string>());
    if (!status) throw FormatError("unknown plate_status");
    t.plate_status = *status;
    t.axle_count = v.at("axle_count").get<int>();
    t.axle_confidence = v.at("axle_confidence").get<double>();
    t.vehicle_class = v.at("vehicle_class").get<std::string>();
    t.toll_amount = v.at("toll_amount").get<std::int64_t>();
    t.entry_timestamp = v.at("entry_timestamp_ms").get<std::int64_t>();
    t.exit_timestamp = v.at("exit_timestamp_ms").get<std::int64_t>();
    t.review_required = v.at("review_required").get<bool>();
    t.created_at = v.at("created_at_ms").get<std::int64_t>();
    return t;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed transaction: ") + e.what());
  }
}

Json record_to_json(const StoreRecord& r) {
  Json audit = Json::array();
  for (const auto& a : r.audit) {
    audit.push_back(Json{{"operator_id", a.operator_id},
                         {"old_text", a.old_text},
                         {"new_text", a.new_text},
                         {"time_ms", a.time_ms}});
  }
  return Json{{"transaction", transaction_to_json(r.transaction)},
              {"inserted_at_ms", r.inserted_at},
              {"archived", r.archived},
              {"sequence", r.sequence},
              {"audit", audit}};
}

StoreRecord record_from_json(const Json& v) {
  try {
    StoreRecord r;
    r.transaction = transaction_from_json(v.at("transaction"));
    r.inserted_at = v.at("inserted_at_ms").get<std::int64_t>();
    r.archived = v.at("archived").get<bool>();
    r.sequence = v.at("sequence").get<std::uint64_t>();
    for (const auto& a : v.at("audit")) {
      r.audit.push_back({a.at("operator_id").get<std::string>(), a.at("old_text").get<std::string>(),
                         a.at("new_text").get<std::string>(), a.at("time_ms").get<std::int64_t>()});
    }
    return r;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed store record: ") + e.what());
  }
}

}  // namespace tollplaza
