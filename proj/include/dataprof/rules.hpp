#ifndef DATAPROF_RULES_HPP
#define DATAPROF_RULES_HPP

#include <optional>
#include <string>
#include <vector>

#include "dataprof/ingest.hpp"

namespace dataprof::rules {

// Registered rule ids. The set is closed but referenced by id so reports
// stay stable if rules are added.
namespace rule_ids {
inline constexpr const char* null_not_allowed = "null-not-allowed";
inline constexpr const char* empty_not_allowed = "empty-not-allowed";
inline constexpr const char* invalid_date = "invalid-date";
inline constexpr const char* not_numeric = "not-numeric";
inline constexpr const char* value_not_in_domain = "value-not-in-domain";
// Emitted by the encoder when the target cell of an otherwise clean row
// cannot be used.
inline constexpr const char* target_not_numeric = "target-not-numeric";
}  // namespace rule_ids

struct RuleViolation {
    std::size_t row_id = 0;
    std::string column;
    std::string rule_id;
    std::optional<std::string> observed;  // raw cell text, nullopt for null cells
    std::string detail;

    bool operator==(const RuleViolation&) const = default;
};

// Element-level checks for one record, in schema column order:
//   - null cell in a non-nullable column        -> null-not-allowed
//   - empty cell where empty_allowed is false   -> empty-not-allowed
//   - date cell that does not parse             -> invalid-date
//   - numeric/target cell that does not parse   -> not-numeric
//   - cell outside a declared value domain      -> value-not-in-domain
// Ignore-role columns are never checked. Null/empty cells are judged only
// by the null/empty rules, never by the parse rules.
std::vector<RuleViolation> check_row(const ingest::RawRecord& record,
                                     const ingest::SchemaConfig& schema);

struct CbqrResult {
    std::vector<ingest::RawRecord> clean;
    std::vector<RuleViolation> violations;
};

// Partitions records: a row with at least one violation goes only to
// `violations`; the rest pass through unchanged. Violations are ordered
// by (row_id, column index).
CbqrResult run_cbqr(const std::vector<ingest::RawRecord>& records,
                    const ingest::SchemaConfig& schema);

}  // namespace dataprof::rules

#endif
