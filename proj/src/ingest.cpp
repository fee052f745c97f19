#include "dataprof/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "dataprof/common.hpp"
#include "dataprof/csv.hpp"
#include "dataprof/encode.hpp"

namespace dataprof::ingest {

namespace {

using ordered_json = nlohmann::ordered_json;

Error config_error(const std::string& message) { return Error(Stage::config, message); }
Error ingest_error(const std::string& message) { return Error(Stage::ingest, message); }

std::string format_civil(CivilDate d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

CivilDate parse_epoch(const std::string& text) {
    auto date = encode::parse_date(text, "%Y-%m-%d");
    if (!date) throw config_error("schema: epoch '" + text + "' is not a valid YYYY-MM-DD date");
    return *date;
}

// Only %Y, %m, %d and %% directives are understood; each of the three
// date fields must appear exactly once.
void validate_date_format(const std::string& format) {
    int y = 0, m = 0, d = 0;
    for (std::size_t i = 0; i < format.size(); ++i) {
        if (format[i] != '%') continue;
        if (i + 1 >= format.size())
            throw config_error("schema: date_format ends with a bare '%'");
        char dir = format[++i];
        switch (dir) {
            case 'Y': ++y; break;
            case 'm': ++m; break;
            case 'd': ++d; break;
            case '%': break;
            default:
                throw config_error(std::string("schema: date_format has unsupported directive '%") +
                                   dir + "'");
        }
    }
    if (y != 1 || m != 1 || d != 1)
        throw config_error("schema: date_format must contain %Y, %m and %d exactly once");
}

void check_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (const auto& item : obj.items()) {
        bool known = std::any_of(allowed.begin(), allowed.end(),
                                 [&](const char* k) { return item.key() == k; });
        if (!known) throw config_error("schema: unknown key '" + item.key() + "' in " + where);
    }
}

}  // namespace

const char* role_name(ColumnRole role) {
    switch (role) {
        case ColumnRole::categorical: return "categorical";
        case ColumnRole::date: return "date";
        case ColumnRole::numeric: return "numeric";
        case ColumnRole::target: return "target";
        case ColumnRole::ignore: return "ignore";
    }
    return "unknown";
}

std::optional<ColumnRole> role_from_name(std::string_view name) {
    if (name == "categorical") return ColumnRole::categorical;
    if (name == "date") return ColumnRole::date;
    if (name == "numeric") return ColumnRole::numeric;
    if (name == "target") return ColumnRole::target;
    if (name == "ignore") return ColumnRole::ignore;
    return std::nullopt;
}

void SchemaConfig::validate() const {
    std::unordered_set<std::string> seen;
    std::size_t targets = 0;
    for (const auto& col : columns) {
        if (col.name.empty()) throw config_error("schema: column with empty name");
        if (!seen.insert(col.name).second)
            throw config_error("schema: duplicate column name '" + col.name + "'");
        if (col.role == ColumnRole::target) ++targets;
    }
    if (targets == 0) throw config_error("schema: no target column");
    if (targets > 1) throw config_error("schema: multiple targets");
    bool has_dates = std::any_of(columns.begin(), columns.end(),
                                 [](const ColumnSpec& c) { return c.role == ColumnRole::date; });
    if (has_dates) validate_date_format(date_format);
    if (!encode::civil_date_valid(epoch))
        throw config_error("schema: epoch " + format_civil(epoch) + " is not a valid date");
}

std::size_t SchemaConfig::target_index() const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].role == ColumnRole::target) return i;
    throw config_error("schema: no target column");
}

const std::string& SchemaConfig::target_name() const { return columns[target_index()].name; }

std::vector<std::size_t> SchemaConfig::feature_indices() const {
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        ColumnRole role = columns[i].role;
        if (role != ColumnRole::ignore && role != ColumnRole::target) indices.push_back(i);
    }
    return indices;
}

SchemaConfig parse_schema(const std::string& json_text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("schema: ") + e.what());
    }
    if (!doc.is_object()) throw config_error("schema: document must be a JSON object");
    check_keys(doc, {"date_format", "epoch", "columns"}, "document");

    SchemaConfig schema;
    if (doc.contains("date_format")) {
        if (!doc["date_format"].is_string())
            throw config_error("schema: date_format must be a string");
        schema.date_format = doc["date_format"].get<std::string>();
    }
    if (doc.contains("epoch")) {
        if (!doc["epoch"].is_string()) throw config_error("schema: epoch must be a string");
        schema.epoch = parse_epoch(doc["epoch"].get<std::string>());
    }
    if (!doc.contains("columns") || !doc["columns"].is_array())
        throw config_error("schema: missing columns array");

    for (const auto& entry : doc["columns"]) {
        if (!entry.is_object()) throw config_error("schema: column entries must be objects");
        check_keys(entry, {"name", "role", "nullable", "empty_allowed", "allowed_values"},
                   "column");
        ColumnSpec col;
        if (!entry.contains("name") || !entry["name"].is_string())
            throw config_error("schema: column without a name");
        col.name = entry["name"].get<std::string>();
        if (!entry.contains("role") || !entry["role"].is_string())
            throw config_error("schema: column '" + col.name + "' has no role");
        std::string role_text = entry["role"].get<std::string>();
        auto role = role_from_name(role_text);
        if (!role)
            throw config_error("schema: column '" + col.name + "' has unknown role '" + role_text +
                               "'");
        col.role = *role;
        if (entry.contains("nullable")) {
            if (!entry["nullable"].is_boolean())
                throw config_error("schema: column '" + col.name + "': nullable must be a boolean");
            col.nullable = entry["nullable"].get<bool>();
        }
        if (entry.contains("empty_allowed")) {
            if (!entry["empty_allowed"].is_boolean())
                throw config_error("schema: column '" + col.name +
                                   "': empty_allowed must be a boolean");
            col.empty_allowed = entry["empty_allowed"].get<bool>();
        }
        if (entry.contains("allowed_values")) {
            if (!entry["allowed_values"].is_array())
                throw config_error("schema: column '" + col.name +
                                   "': allowed_values must be an array of strings");
            for (const auto& v : entry["allowed_values"]) {
                if (!v.is_string())
                    throw config_error("schema: column '" + col.name +
                                       "': allowed_values must be an array of strings");
                col.allowed_values.push_back(v.get<std::string>());
            }
        }
        schema.columns.push_back(std::move(col));
    }

    schema.validate();
    return schema;
}

std::string schema_to_json(const SchemaConfig& schema) {
    ordered_json doc;
    doc["date_format"] = schema.date_format;
    doc["epoch"] = format_civil(schema.epoch);
    doc["columns"] = ordered_json::array();
    for (const auto& col : schema.columns) {
        ordered_json entry;
        entry["name"] = col.name;
        entry["role"] = role_name(col.role);
        entry["nullable"] = col.nullable;
        entry["empty_allowed"] = col.empty_allowed;
        if (!col.allowed_values.empty()) entry["allowed_values"] = col.allowed_values;
        doc["columns"].push_back(std::move(entry));
    }
    return doc.dump(2) + "\n";
}

SchemaConfig load_schema(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("schema: cannot read '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_schema(buffer.str());
}

void save_schema(const SchemaConfig& schema, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("schema: cannot write '" + path + "'");
    out << schema_to_json(schema);
    if (!out) throw config_error("schema: failed writing '" + path + "'");
}

std::vector<RawRecord> parse_dataset(std::istream& in, const SchemaConfig& schema,
                                     char delimiter) {
    CsvReader reader(in, delimiter);
    std::vector<std::string> fields;
    if (!reader.next(fields)) throw ingest_error("empty file: missing header row");
    if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0)
        fields[0].erase(0, 3);  // UTF-8 BOM

    std::unordered_map<std::string, std::size_t> header_pos;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        std::string name = trim_ascii(fields[i]);
        if (!header_pos.emplace(name, i).second)
            throw ingest_error("duplicate header column '" + name + "'");
    }

    // Order-insensitive binding: the header and schema must carry the same
    // name set; cells are re-ordered to schema order below.
    std::vector<std::size_t> schema_to_file(schema.columns.size());
    std::vector<std::string> missing, extra;
    for (std::size_t i = 0; i < schema.columns.size(); ++i) {
        auto it = header_pos.find(schema.columns[i].name);
        if (it == header_pos.end()) {
            missing.push_back(schema.columns[i].name);
        } else {
            schema_to_file[i] = it->second;
        }
    }
    for (const auto& [name, pos] : header_pos) {
        bool in_schema = std::any_of(schema.columns.begin(), schema.columns.end(),
                                     [&](const ColumnSpec& c) { return c.name == name; });
        if (!in_schema) extra.push_back(name);
    }
    if (!missing.empty() || !extra.empty()) {
        std::sort(missing.begin(), missing.end());
        std::sort(extra.begin(), extra.end());
        std::string msg = "header/schema mismatch:";
        if (!missing.empty()) {
            msg += " missing from file:";
            for (const auto& n : missing) msg += " '" + n + "'";
        }
        if (!extra.empty()) {
            msg += " not in schema:";
            for (const auto& n : extra) msg += " '" + n + "'";
        }
        throw ingest_error(msg);
    }

    const std::size_t header_count = fields.size();
    std::vector<RawRecord> records;
    std::size_t row_id = 0;
    while (reader.next(fields)) {
        // A bare newline is not a data row.
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() > header_count) {
            throw ingest_error("row " + std::to_string(row_id) + " has " +
                               std::to_string(fields.size()) + " cells, header has " +
                               std::to_string(header_count));
        }
        RawRecord record;
        record.row_id = row_id;
        record.cells.resize(schema.columns.size());
        for (std::size_t i = 0; i < schema.columns.size(); ++i) {
            std::size_t file_pos = schema_to_file[i];
            if (file_pos < fields.size()) {
                record.cells[i] = fields[file_pos];
            }  // else: missing trailing cell stays null
        }
        records.push_back(std::move(record));
        ++row_id;
    }
    return records;
}

std::vector<RawRecord> load_dataset(const std::string& path, const SchemaConfig& schema,
                                    char delimiter) {
    schema.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ingest_error("cannot read '" + path + "'");
    return parse_dataset(in, schema, delimiter);
}

}  // namespace dataprof::ingest
