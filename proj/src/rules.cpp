#include "dataprof/rules.hpp"

#include <algorithm>

#include "dataprof/common.hpp"
#include "dataprof/encode.hpp"

namespace dataprof::rules {

std::vector<RuleViolation> check_row(const ingest::RawRecord& record,
                                     const ingest::SchemaConfig& schema) {
    std::vector<RuleViolation> violations;

    for (std::size_t col = 0; col < schema.columns.size(); ++col) {
        const auto& spec = schema.columns[col];
        if (spec.role == ingest::ColumnRole::ignore) continue;
        const auto& cell = record.cells.at(col);

        if (!cell.has_value()) {
            if (!spec.nullable) {
                violations.push_back({record.row_id, spec.name, rule_ids::null_not_allowed,
                                      std::nullopt, "column '" + spec.name + "' must not be null"});
            }
            continue;
        }
        if (cell->empty()) {
            if (!spec.empty_allowed) {
                violations.push_back({record.row_id, spec.name, rule_ids::empty_not_allowed, cell,
                                      "column '" + spec.name + "' must not be empty"});
            }
            continue;
        }

        // Parse rules apply only to present, non-empty cells.
        if (spec.role == ingest::ColumnRole::date) {
            if (!encode::parse_date(*cell, schema.date_format)) {
                violations.push_back({record.row_id, spec.name, rule_ids::invalid_date, cell,
                                      "'" + *cell + "' does not parse with format " +
                                          schema.date_format});
            }
        } else if (spec.role == ingest::ColumnRole::numeric ||
                   spec.role == ingest::ColumnRole::target) {
            if (!parse_decimal(*cell)) {
                violations.push_back({record.row_id, spec.name, rule_ids::not_numeric, cell,
                                      "'" + *cell + "' is not a decimal number"});
            }
        }

        if (!spec.allowed_values.empty()) {
            bool in_domain = std::find(spec.allowed_values.begin(), spec.allowed_values.end(),
                                       *cell) != spec.allowed_values.end();
            if (!in_domain) {
                violations.push_back({record.row_id, spec.name, rule_ids::value_not_in_domain, cell,
                                      "'" + *cell + "' is not in the declared value domain"});
            }
        }
    }
    return violations;
}

CbqrResult run_cbqr(const std::vector<ingest::RawRecord>& records,
                    const ingest::SchemaConfig& schema) {
    CbqrResult result;
    for (const auto& record : records) {
        auto found = check_row(record, schema);
        if (found.empty()) {
            result.clean.push_back(record);
        } else {
            result.violations.insert(result.violations.end(), found.begin(), found.end());
        }
    }
    return result;
}

}  // namespace dataprof::rules
