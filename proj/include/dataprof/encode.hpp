#ifndef DATAPROF_ENCODE_HPP
#define DATAPROF_ENCODE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dataprof/ingest.hpp"
#include "dataprof/rules.hpp"

namespace dataprof::encode {

// Polynomial-31 string hash over UTF-16 code units with wrapping 32-bit
// arithmetic: h = 31*h + c. The input is UTF-8; code points above the BMP
// hash as their surrogate pair. A malformed byte hashes as its own code
// unit so the function stays total.
std::int32_t string_hash(std::string_view value);

// Sentinel form: null -> -1, empty -> 0, otherwise string_hash(text).
std::int32_t string_hash(const std::optional<std::string>& value);

// Proleptic Gregorian day number relative to 1970-01-01.
std::int64_t days_from_civil(ingest::CivilDate date);
bool civil_date_valid(ingest::CivilDate date);

// Parses `text` against a strptime-like pattern built from %Y, %m, %d and
// literal characters. Returns nullopt when the text does not match or
// names an impossible calendar date.
std::optional<ingest::CivilDate> parse_date(std::string_view text, std::string_view format);

// Signed whole-day count from `epoch` to the parsed date. Null and empty
// inputs yield the -1 / 0 sentinels; an unparsable or impossible date
// yields nullopt (routed to the rules as an invalid-date violation).
std::optional<std::int64_t> date_to_days(const std::optional<std::string>& value,
                                         std::string_view format, ingest::CivilDate epoch);

// One modeling-ready row. `features` follow schema column order with
// ignore and target columns removed; `raw_hashes` hold the pre-scaling
// integer encodings, one per feature column, where null and empty cells
// carry the -1 / 0 sentinels.
struct EncodedRow {
    std::size_t row_id = 0;
    std::vector<double> features;
    double target = 0.0;
    std::vector<std::int32_t> raw_hashes;
};

struct FeatureScale {
    double mean = 0.0;
    double stddev = 0.0;  // 0 marks a constant feature
};

inline double scale_value(double x, const FeatureScale& s) {
    return s.stddev == 0.0 ? 0.0 : (x - s.mean) / s.stddev;
}

struct ScalingParams {
    std::vector<FeatureScale> features;
    FeatureScale target;
};

// Encodes raw records: categorical cells through string_hash, date cells
// through date_to_days, numeric and target cells as decimal numbers.
// Rows whose target is missing or unparsable, or that contain an
// unparsable numeric or date cell, are excluded and reported as
// violations instead. Null/empty feature cells encode as the sentinels.
std::pair<std::vector<EncodedRow>, std::vector<rules::RuleViolation>> encode_dataset(
    const std::vector<ingest::RawRecord>& records, const ingest::SchemaConfig& schema);

// Per-feature and target mean/stddev with the population formula
// (divisor n). Fit on the training split only. Requires >= 2 rows.
ScalingParams fit_scaling(const std::vector<EncodedRow>& rows);

// z-scores features and target: (x - mean) / stddev, with a stddev of 0
// mapping to 0. Throws Error(training) on arity mismatch.
EncodedRow apply_scaling(const EncodedRow& row, const ScalingParams& params);

double scale_target(double value, const ScalingParams& params);
double unscale_target(double scaled, const ScalingParams& params);

}  // namespace dataprof::encode

#endif
