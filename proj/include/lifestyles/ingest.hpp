#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "lifestyles/sparse.hpp"

namespace lifestyles::ingest {

// UTC instant, second resolution.
struct CdrEvent {
    std::string user_id;
    std::string tower_id;
    std::int64_t timestamp = 0;  // seconds since epoch
};

struct CcrEvent {
    std::string user_id;
    std::string mcc;
    double amount = 0.0;  // >= 0
    std::int64_t timestamp = 0;
};

struct RowError {
    std::size_t line = 0;  // 1-based, header is line 1
    std::string message;
};

template <typename Event>
struct ParseResult {
    std::vector<Event> events;
    std::vector<RowError> errors;        // malformed rows
    std::size_t skipped_unknown = 0;     // rows referencing a tower missing from the registry
};

// Accepts `YYYY-MM-DDTHH:MM:SSZ` and `YYYY-MM-DDTHH:MM:SS±hh:mm`; returns UTC seconds.
std::optional<std::int64_t> parse_timestamp(const std::string& s);
std::string format_timestamp(std::int64_t utc_seconds);

// CSV with header `user_id,tower_id,timestamp`. When a tower registry is given, rows
// naming an unknown tower are skipped and counted (real logs are dirty; downstream
// matrices must stay aligned to the registry).
ParseResult<CdrEvent> parse_cdr(std::istream& in,
                                const std::unordered_set<std::string>* known_towers = nullptr);

// CSV with header `user_id,mcc,amount,timestamp`. Negative amounts and empty MCCs are
// malformed rows.
ParseResult<CcrEvent> parse_ccr(std::istream& in);

// w_ij = number of distinct UTC calendar days on which user i placed >= 1 call at tower j.
SparseCountMatrix build_visit_matrix(const std::vector<CdrEvent>& events,
                                     const std::vector<std::string>& users,
                                     const std::vector<std::string>& towers);

struct MccDocuments {
    SparseCountMatrix counts;            // users x vocabulary
    std::vector<std::string> vocabulary; // sorted token strings
};

// One document per user; token = mcc, or mcc@<bucket> when amount_buckets is set.
// Buckets are per-MCC amount quantiles over the whole corpus; amounts equal to a
// boundary fall in the lower bucket.
MccDocuments build_mcc_documents(const std::vector<CcrEvent>& events,
                                 const std::vector<std::string>& users,
                                 std::optional<int> amount_buckets = std::nullopt);

// Per user: total amount / number of whole weeks in the global observation window
// (window = [min timestamp, max timestamp], weeks = ceil(days/7), minimum 1).
std::vector<double> average_weekly_spend(const std::vector<CcrEvent>& events,
                                         const std::vector<std::string>& users);

struct Dataset {
    std::vector<std::string> users;   // ordered index of user ids
    std::vector<std::string> towers;  // ordered index of tower ids (registry order)
    std::vector<std::string> mccs;    // ordered token vocabulary
    SparseCountMatrix visit_counts;   // users x towers
    SparseCountMatrix mcc_counts;     // users x vocabulary
};

// Users = sorted union of ids seen in either log.
Dataset build_dataset(const std::vector<CdrEvent>& cdr, const std::vector<CcrEvent>& ccr,
                      const std::vector<std::string>& towers,
                      std::optional<int> amount_buckets = std::nullopt);

}  // namespace lifestyles::ingest
