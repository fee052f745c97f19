#include "dataprof/spc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dataprof/common.hpp"
#include "dataprof/rng.hpp"

namespace dataprof::spc {

namespace {

Error spc_error(const std::string& message) { return Error(Stage::spc, message); }

// Mean and sample standard deviation (divisor n - 1). A constant sample
// has stddev exactly 0, with no accumulation noise.
std::pair<double, double> mean_and_sample_stddev(std::span<const double> values) {
    bool constant = true;
    for (double v : values) {
        if (v != values.front()) {
            constant = false;
            break;
        }
    }
    if (constant) return {values.front(), 0.0};

    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / n;
    double sq = 0.0;
    for (double v : values) {
        const double d = v - mean;
        sq += d * d;
    }
    return {mean, std::sqrt(sq / (n - 1.0))};
}

}  // namespace

const char* limit_mode_name(LimitMode mode) {
    return mode == LimitMode::clt_sample ? "clt-sample" : "direct";
}

std::optional<LimitMode> limit_mode_from_name(std::string_view name) {
    if (name == "clt-sample") return LimitMode::clt_sample;
    if (name == "direct") return LimitMode::direct;
    return std::nullopt;
}

const char* classification_name(Classification c) {
    switch (c) {
        case Classification::inlier: return "inlier";
        case Classification::outlier: return "outlier";
        case Classification::undefined_ratio: return "undefined-ratio";
    }
    return "unknown";
}

std::vector<ResidualRow> residuals(std::span<const double> actuals,
                                   std::span<const double> predictions,
                                   std::span<const std::size_t> row_ids) {
    if (actuals.size() != predictions.size() || actuals.size() != row_ids.size())
        throw spc_error("residuals: length mismatch (" + std::to_string(actuals.size()) + " / " +
                        std::to_string(predictions.size()) + " / " +
                        std::to_string(row_ids.size()) + ")");

    std::vector<ResidualRow> rows;
    rows.reserve(actuals.size());
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        if (!std::isfinite(actuals[i]))
            throw spc_error("residuals: non-finite actual at row " + std::to_string(row_ids[i]));
        if (!std::isfinite(predictions[i]))
            throw spc_error("residuals: non-finite prediction at row " +
                            std::to_string(row_ids[i]));
        ResidualRow row;
        row.row_id = row_ids[i];
        row.actual = actuals[i];
        row.predicted = predictions[i];
        row.error = predictions[i] - actuals[i];
        if (actuals[i] != 0.0) row.difference_ratio = row.error / actuals[i];
        rows.push_back(row);
    }
    return rows;
}

ControlLimits limits_from_stats(double mean, double stddev, LimitMode mode,
                                std::size_t sample_size, std::uint64_t seed) {
    ControlLimits limits;
    limits.mu = mean;
    limits.sigma = mode == LimitMode::clt_sample
                       ? std::sqrt(static_cast<double>(sample_size)) * stddev
                       : stddev;
    limits.ucl = limits.mu + 3.0 * limits.sigma;
    limits.cl = limits.mu;
    limits.lcl = limits.mu - 3.0 * limits.sigma;
    limits.mode = mode;
    limits.sample_size = sample_size;
    limits.seed = seed;
    return limits;
}

ControlLimits estimate_limits(std::span<const double> ratios, LimitMode mode,
                              std::size_t sample_size, std::uint64_t seed) {
    if (mode == LimitMode::clt_sample) {
        if (sample_size < 2) throw spc_error("estimate_limits: sample size must be >= 2");
        if (ratios.size() < sample_size)
            throw spc_error("estimate_limits: " + std::to_string(sample_size) +
                            "-row sample exceeds the " + std::to_string(ratios.size()) +
                            " available ratios");
        Rng rng(seed);
        auto picks = rng.sample_indices(ratios.size(), sample_size);
        std::vector<double> sample;
        sample.reserve(sample_size);
        for (std::size_t idx : picks) sample.push_back(ratios[idx]);
        auto [mean, stddev] = mean_and_sample_stddev(sample);
        return limits_from_stats(mean, stddev, mode, sample_size, seed);
    }

    if (ratios.size() < 2) throw spc_error("estimate_limits: need at least 2 ratios");
    auto [mean, stddev] = mean_and_sample_stddev(ratios);
    return limits_from_stats(mean, stddev, mode, ratios.size(), seed);
}

std::vector<OutlierRecord> classify(const std::vector<ResidualRow>& rows,
                                    const ControlLimits& limits) {
    std::vector<OutlierRecord> records;
    records.reserve(rows.size());
    for (const auto& row : rows) {
        OutlierRecord record;
        record.row = row;
        if (!row.difference_ratio) {
            record.classification = Classification::undefined_ratio;
        } else if (*row.difference_ratio > limits.ucl || *row.difference_ratio < limits.lcl) {
            record.classification = Classification::outlier;
        } else {
            record.classification = Classification::inlier;
        }
        records.push_back(record);
    }

    std::sort(records.begin(), records.end(), [](const OutlierRecord& a, const OutlierRecord& b) {
        const bool a_def = a.row.difference_ratio.has_value();
        const bool b_def = b.row.difference_ratio.has_value();
        if (a_def != b_def) return a_def;  // undefined ratios last
        if (a_def && b_def) {
            const double abs_a = std::fabs(*a.row.difference_ratio);
            const double abs_b = std::fabs(*b.row.difference_ratio);
            if (abs_a != abs_b) return abs_a > abs_b;
        }
        return a.row.row_id < b.row.row_id;
    });
    return records;
}

ChartSeries chart_points(const std::vector<OutlierRecord>& rows, const ControlLimits& limits) {
    ChartSeries series;
    series.ucl = limits.ucl;
    series.cl = limits.cl;
    series.lcl = limits.lcl;

    std::vector<const OutlierRecord*> ordered;
    ordered.reserve(rows.size());
    for (const auto& record : rows) {
        if (record.row.difference_ratio) ordered.push_back(&record);
    }
    std::sort(ordered.begin(), ordered.end(), [](const OutlierRecord* a, const OutlierRecord* b) {
        return a->row.row_id < b->row.row_id;
    });

    series.points.reserve(ordered.size());
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        series.points.push_back({i, ordered[i]->row.row_id, *ordered[i]->row.difference_ratio,
                                 ordered[i]->classification == Classification::outlier});
    }
    return series;
}

}  // namespace dataprof::spc
