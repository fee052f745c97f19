#ifndef DATAPROF_SPC_HPP
#define DATAPROF_SPC_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace dataprof::spc {

// error = predicted - actual; difference_ratio = error / actual, left
// undefined when actual is 0.
struct ResidualRow {
    std::size_t row_id = 0;
    double actual = 0.0;
    double predicted = 0.0;
    double error = 0.0;
    std::optional<double> difference_ratio;
};

enum class LimitMode { clt_sample, direct };

const char* limit_mode_name(LimitMode mode);
std::optional<LimitMode> limit_mode_from_name(std::string_view name);

// 3-sigma control limits: ucl = mu + 3*sigma, cl = mu, lcl = mu - 3*sigma.
struct ControlLimits {
    double mu = 0.0;
    double sigma = 0.0;
    double ucl = 0.0;
    double cl = 0.0;
    double lcl = 0.0;
    LimitMode mode = LimitMode::clt_sample;
    std::size_t sample_size = 0;
    std::uint64_t seed = 0;
};

enum class Classification { inlier, outlier, undefined_ratio };

const char* classification_name(Classification c);

struct OutlierRecord {
    ResidualRow row;
    Classification classification = Classification::inlier;
};

// Pairs actuals with predictions; throws Error(spc) on length mismatch.
std::vector<ResidualRow> residuals(std::span<const double> actuals,
                                   std::span<const double> predictions,
                                   std::span<const std::size_t> row_ids);

// Limits from forced sample statistics: sigma-hat = sqrt(n) * sample
// stddev in clt_sample mode, sigma-hat = stddev unchanged in direct mode.
ControlLimits limits_from_stats(double mean, double stddev, LimitMode mode,
                                std::size_t sample_size, std::uint64_t seed);

// clt_sample: draws sample_size ratios without replacement with the
// seeded generator, takes the sample mean and sample stddev (divisor
// n - 1), and scales the stddev by sqrt(sample_size) to estimate the
// population sigma. direct: mean and stddev (divisor n - 1) over all
// ratios. Throws Error(spc) when there is too little data; a
// zero-variance sample is legal and yields sigma 0.
ControlLimits estimate_limits(std::span<const double> ratios, LimitMode mode,
                              std::size_t sample_size, std::uint64_t seed);

// Strict comparison: outlier iff ratio > ucl or ratio < lcl; a ratio
// exactly on a limit is an inlier. Rows without a ratio classify as
// undefined_ratio and are kept in the output. Sorted by descending
// |ratio| (ties by row_id, undefined rows last).
std::vector<OutlierRecord> classify(const std::vector<ResidualRow>& rows,
                                    const ControlLimits& limits);

// Plot-ready series: one point per defined ratio in row_id order plus the
// three horizontal reference lines.
struct ChartSeries {
    struct Point {
        std::size_t index = 0;  // 0-based position in the series
        std::size_t row_id = 0;
        double ratio = 0.0;
        bool outlier = false;
    };
    std::vector<Point> points;
    double ucl = 0.0;
    double cl = 0.0;
    double lcl = 0.0;
};

ChartSeries chart_points(const std::vector<OutlierRecord>& rows, const ControlLimits& limits);

}  // namespace dataprof::spc

#endif
