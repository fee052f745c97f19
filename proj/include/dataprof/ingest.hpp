#ifndef DATAPROF_INGEST_HPP
#define DATAPROF_INGEST_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dataprof::ingest {

enum class ColumnRole { categorical, date, numeric, target, ignore };

const char* role_name(ColumnRole role);
std::optional<ColumnRole> role_from_name(std::string_view name);

struct ColumnSpec {
    std::string name;
    ColumnRole role = ColumnRole::categorical;
    bool nullable = true;
    bool empty_allowed = true;
    // Optional closed value domain; empty means unconstrained. Only
    // checked for non-null, non-empty cells.
    std::vector<std::string> allowed_values;

    bool operator==(const ColumnSpec&) const = default;
};

struct CivilDate {
    int year = 1970;
    int month = 1;
    int day = 1;

    bool operator==(const CivilDate&) const = default;
};

// Per-column role declarations plus the date conventions shared by the
// whole dataset. Exactly one column carries the target role.
struct SchemaConfig {
    std::vector<ColumnSpec> columns;
    std::string date_format = "%Y-%m-%d";
    CivilDate epoch{1970, 1, 1};

    bool operator==(const SchemaConfig&) const = default;

    // Throws Error(config) if an invariant does not hold: unique non-empty
    // names, exactly one target.
    void validate() const;

    std::size_t target_index() const;
    const std::string& target_name() const;
    // Indices of non-ignore, non-target columns in schema order.
    std::vector<std::size_t> feature_indices() const;
};

// A parsed data line. A cell is null when it was absent from the file
// (short row) and empty when present with length zero.
struct RawRecord {
    std::size_t row_id = 0;
    std::vector<std::optional<std::string>> cells;
};

// Schema file round-trip. The format is a flat JSON document; see the
// README for the exact shape.
SchemaConfig load_schema(const std::string& path);
SchemaConfig parse_schema(const std::string& json_text);
std::string schema_to_json(const SchemaConfig& schema);
void save_schema(const SchemaConfig& schema, const std::string& path);

// Loads a delimited file against the schema. The first line must be a
// header; names are matched to schema columns order-insensitively and
// cells are reordered to schema order. Missing trailing cells become
// null. Throws Error(ingest) on unreadable files, header/schema
// mismatches and rows with more cells than the header.
std::vector<RawRecord> load_dataset(const std::string& path, const SchemaConfig& schema,
                                    char delimiter = ',');
std::vector<RawRecord> parse_dataset(std::istream& in, const SchemaConfig& schema,
                                     char delimiter = ',');

}  // namespace dataprof::ingest

#endif
