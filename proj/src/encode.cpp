#include "dataprof/encode.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>

#include "dataprof/common.hpp"

namespace dataprof::encode {

namespace {

Error training_error(const std::string& message) { return Error(Stage::training, message); }

inline void hash_code_unit(std::uint32_t& h, std::uint32_t unit) { h = 31u * h + unit; }

std::int32_t clamp_to_int32(std::int64_t value) {
    if (value > std::numeric_limits<std::int32_t>::max())
        return std::numeric_limits<std::int32_t>::max();
    if (value < std::numeric_limits<std::int32_t>::min())
        return std::numeric_limits<std::int32_t>::min();
    return static_cast<std::int32_t>(value);
}

std::int32_t numeric_raw_code(double value) {
    if (!std::isfinite(value)) return 0;
    double rounded = std::nearbyint(value);
    if (rounded >= 2147483648.0) return std::numeric_limits<std::int32_t>::max();
    if (rounded <= -2147483649.0) return std::numeric_limits<std::int32_t>::min();
    return clamp_to_int32(static_cast<std::int64_t>(rounded));
}

bool is_leap(int year) { return year % 4 == 0 && (year % 100 != 0 || year % 400 == 0); }

int days_in_month(int year, int month) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2 && is_leap(year)) return 29;
    return kDays[month - 1];
}

}  // namespace

std::int32_t string_hash(std::string_view value) {
    std::uint32_t h = 0;
    std::size_t i = 0;
    const std::size_t n = value.size();
    while (i < n) {
        unsigned char byte = static_cast<unsigned char>(value[i]);
        if (byte < 0x80) {
            hash_code_unit(h, byte);
            ++i;
            continue;
        }
        // Multi-byte UTF-8 sequence; fall back to the raw byte on malformed
        // input so the function stays total.
        std::uint32_t code_point = 0;
        std::size_t extra = 0;
        if ((byte & 0xE0) == 0xC0) {
            code_point = byte & 0x1F;
            extra = 1;
        } else if ((byte & 0xF0) == 0xE0) {
            code_point = byte & 0x0F;
            extra = 2;
        } else if ((byte & 0xF8) == 0xF0) {
            code_point = byte & 0x07;
            extra = 3;
        } else {
            hash_code_unit(h, byte);
            ++i;
            continue;
        }
        if (i + extra >= n) {
            // truncated sequence
            hash_code_unit(h, byte);
            ++i;
            continue;
        }
        bool valid = true;
        for (std::size_t k = 1; k <= extra; ++k) {
            unsigned char cont = static_cast<unsigned char>(value[i + k]);
            if ((cont & 0xC0) != 0x80) {
                valid = false;
                break;
            }
            code_point = (code_point << 6) | (cont & 0x3F);
        }
        if (!valid) {
            hash_code_unit(h, byte);
            ++i;
            continue;
        }
        if (code_point > 0xFFFF) {
            std::uint32_t v = code_point - 0x10000;
            hash_code_unit(h, 0xD800 + (v >> 10));
            hash_code_unit(h, 0xDC00 + (v & 0x3FF));
        } else {
            hash_code_unit(h, code_point);
        }
        i += extra + 1;
    }
    return static_cast<std::int32_t>(h);
}

std::int32_t string_hash(const std::optional<std::string>& value) {
    if (!value.has_value()) return -1;
    if (value->empty()) return 0;
    return string_hash(std::string_view(*value));
}

bool civil_date_valid(ingest::CivilDate date) {
    if (date.month < 1 || date.month > 12) return false;
    if (date.day < 1 || date.day > days_in_month(date.year, date.month)) return false;
    return true;
}

std::int64_t days_from_civil(ingest::CivilDate date) {
    // Howard Hinnant's days-from-civil, shifted so 1970-01-01 is day 0.
    std::int64_t y = date.year;
    const int m = date.month;
    const int d = date.day;
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 +
                         static_cast<unsigned>(d) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::optional<ingest::CivilDate> parse_date(std::string_view text, std::string_view format) {
    std::string trimmed = trim_ascii(text);
    std::string_view input = trimmed;
    std::size_t pos = 0;

    auto read_digits = [&](std::size_t min_len, std::size_t max_len) -> std::optional<int> {
        std::size_t len = 0;
        int value = 0;
        while (len < max_len && pos + len < input.size() &&
               std::isdigit(static_cast<unsigned char>(input[pos + len]))) {
            value = value * 10 + (input[pos + len] - '0');
            ++len;
        }
        if (len < min_len) return std::nullopt;
        pos += len;
        return value;
    };

    int year = 0, month = 0, day = 0;
    bool saw_year = false, saw_month = false, saw_day = false;
    for (std::size_t f = 0; f < format.size(); ++f) {
        char ch = format[f];
        if (ch == '%') {
            if (f + 1 >= format.size()) return std::nullopt;
            char dir = format[++f];
            std::optional<int> v;
            switch (dir) {
                case 'Y':
                    v = read_digits(4, 4);
                    if (!v) return std::nullopt;
                    year = *v;
                    saw_year = true;
                    break;
                case 'm':
                    v = read_digits(1, 2);
                    if (!v) return std::nullopt;
                    month = *v;
                    saw_month = true;
                    break;
                case 'd':
                    v = read_digits(1, 2);
                    if (!v) return std::nullopt;
                    day = *v;
                    saw_day = true;
                    break;
                case '%':
                    if (pos >= input.size() || input[pos] != '%') return std::nullopt;
                    ++pos;
                    break;
                default:
                    return std::nullopt;
            }
        } else {
            if (pos >= input.size() || input[pos] != ch) return std::nullopt;
            ++pos;
        }
    }
    if (pos != input.size()) return std::nullopt;
    if (!saw_year || !saw_month || !saw_day) return std::nullopt;

    ingest::CivilDate date{year, month, day};
    if (!civil_date_valid(date)) return std::nullopt;
    return date;
}

std::optional<std::int64_t> date_to_days(const std::optional<std::string>& value,
                                         std::string_view format, ingest::CivilDate epoch) {
    if (!value.has_value()) return -1;
    if (value->empty()) return 0;
    auto date = parse_date(*value, format);
    if (!date) return std::nullopt;
    return days_from_civil(*date) - days_from_civil(epoch);
}

std::pair<std::vector<EncodedRow>, std::vector<rules::RuleViolation>> encode_dataset(
    const std::vector<ingest::RawRecord>& records, const ingest::SchemaConfig& schema) {
    std::vector<EncodedRow> rows;
    std::vector<rules::RuleViolation> violations;

    const auto feature_cols = schema.feature_indices();
    const std::size_t target_col = schema.target_index();

    for (const auto& record : records) {
        EncodedRow row;
        row.row_id = record.row_id;
        row.features.reserve(feature_cols.size());
        row.raw_hashes.reserve(feature_cols.size());
        std::vector<rules::RuleViolation> row_violations;

        for (std::size_t col : feature_cols) {
            const auto& cell = record.cells.at(col);
            const auto& spec = schema.columns[col];
            switch (spec.role) {
                case ingest::ColumnRole::categorical: {
                    std::int32_t h = string_hash(cell);
                    row.raw_hashes.push_back(h);
                    row.features.push_back(static_cast<double>(h));
                    break;
                }
                case ingest::ColumnRole::date: {
                    auto days = date_to_days(cell, schema.date_format, schema.epoch);
                    if (!days) {
                        row_violations.push_back({record.row_id, spec.name,
                                                  rules::rule_ids::invalid_date, cell,
                                                  "'" + *cell + "' does not parse with format " +
                                                      schema.date_format});
                        break;
                    }
                    row.raw_hashes.push_back(clamp_to_int32(*days));
                    row.features.push_back(static_cast<double>(*days));
                    break;
                }
                case ingest::ColumnRole::numeric: {
                    if (!cell.has_value()) {
                        row.raw_hashes.push_back(-1);
                        row.features.push_back(-1.0);
                        break;
                    }
                    if (cell->empty()) {
                        row.raw_hashes.push_back(0);
                        row.features.push_back(0.0);
                        break;
                    }
                    auto v = parse_decimal(*cell);
                    if (!v) {
                        row_violations.push_back({record.row_id, spec.name,
                                                  rules::rule_ids::not_numeric, cell,
                                                  "'" + *cell + "' is not a decimal number"});
                        break;
                    }
                    row.raw_hashes.push_back(numeric_raw_code(*v));
                    row.features.push_back(*v);
                    break;
                }
                default:
                    break;  // target/ignore never appear in feature_cols
            }
        }

        const auto& target_cell = record.cells.at(target_col);
        const auto& target_spec = schema.columns[target_col];
        if (!target_cell.has_value() || target_cell->empty()) {
            row_violations.push_back({record.row_id, target_spec.name,
                                      rules::rule_ids::target_not_numeric, target_cell,
                                      "target value is missing"});
        } else {
            auto v = parse_decimal(*target_cell);
            if (!v) {
                row_violations.push_back({record.row_id, target_spec.name,
                                          rules::rule_ids::target_not_numeric, target_cell,
                                          "'" + *target_cell + "' is not a decimal number"});
            } else {
                row.target = *v;
            }
        }

        if (row_violations.empty()) {
            rows.push_back(std::move(row));
        } else {
            violations.insert(violations.end(), row_violations.begin(), row_violations.end());
        }
    }
    return {std::move(rows), std::move(violations)};
}

ScalingParams fit_scaling(const std::vector<EncodedRow>& rows) {
    if (rows.size() < 2) throw training_error("fit_scaling requires at least 2 rows");
    const std::size_t arity = rows.front().features.size();
    const double n = static_cast<double>(rows.size());

    ScalingParams params;
    params.features.resize(arity);

    // Population formula, divisor n; a constant column gets stddev
    // exactly 0 so downstream can key on it.
    auto fit_one = [&](auto&& value_of) -> FeatureScale {
        const double first = value_of(rows.front());
        bool constant = true;
        for (const auto& row : rows) {
            if (value_of(row) != first) {
                constant = false;
                break;
            }
        }
        if (constant) return {first, 0.0};
        double sum = 0.0;
        for (const auto& row : rows) sum += value_of(row);
        const double mean = sum / n;
        double sq = 0.0;
        for (const auto& row : rows) {
            const double d = value_of(row) - mean;
            sq += d * d;
        }
        return {mean, std::sqrt(sq / n)};
    };

    for (std::size_t f = 0; f < arity; ++f)
        params.features[f] = fit_one([f](const EncodedRow& row) { return row.features.at(f); });
    params.target = fit_one([](const EncodedRow& row) { return row.target; });
    return params;
}

EncodedRow apply_scaling(const EncodedRow& row, const ScalingParams& params) {
    if (row.features.size() != params.features.size())
        throw training_error("apply_scaling: feature arity mismatch");
    EncodedRow scaled = row;
    for (std::size_t f = 0; f < row.features.size(); ++f)
        scaled.features[f] = scale_value(row.features[f], params.features[f]);
    scaled.target = scale_value(row.target, params.target);
    return scaled;
}

double scale_target(double value, const ScalingParams& params) {
    return scale_value(value, params.target);
}

double unscale_target(double scaled, const ScalingParams& params) {
    return params.target.mean + params.target.stddev * scaled;
}

}  // namespace dataprof::encode
