#include <doctest.h>

#include <cmath>
#include <set>

#include "dataprof/common.hpp"
#include "dataprof/rng.hpp"
#include "dataprof/spc.hpp"

using namespace dataprof::spc;
using dataprof::Error;
using dataprof::Rng;

TEST_CASE("residuals match the published salary rows") {
    std::vector<double> actuals = {153588.66, 50000.08};
    std::vector<double> predictions = {89940.368, 52144.907};
    std::vector<std::size_t> ids = {14, 13};
    auto rows = residuals(actuals, predictions, ids);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].error == doctest::Approx(-63648.292).epsilon(1e-9));
    REQUIRE(rows[0].difference_ratio.has_value());
    CHECK(*rows[0].difference_ratio == doctest::Approx(-0.414407496).epsilon(1e-6));
    CHECK(rows[1].error == doctest::Approx(2144.827).epsilon(1e-9));
    CHECK(*rows[1].difference_ratio == doctest::Approx(0.042896471).epsilon(1e-6));
}

TEST_CASE("a perfect prediction has zero error and ratio") {
    auto rows = residuals(std::vector<double>{100.0}, std::vector<double>{100.0},
                          std::vector<std::size_t>{0});
    CHECK(rows[0].error == 0.0);
    CHECK(rows[0].difference_ratio == 0.0);
}

TEST_CASE("a zero actual leaves the ratio undefined") {
    auto rows = residuals(std::vector<double>{0.0}, std::vector<double>{50.0},
                          std::vector<std::size_t>{0});
    CHECK(rows[0].error == 50.0);
    CHECK_FALSE(rows[0].difference_ratio.has_value());
}

TEST_CASE("length mismatches are rejected") {
    CHECK_THROWS_AS(residuals(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0},
                              std::vector<std::size_t>{0, 1}),
                    Error);
}

TEST_CASE("the clt estimator scales the sample stddev by sqrt(n)") {
    auto limits = limits_from_stats(-0.23, 0.22, LimitMode::clt_sample, 100, 1);
    CHECK(limits.sigma == doctest::Approx(2.2).epsilon(1e-9));
    CHECK(limits.cl == doctest::Approx(-0.23).epsilon(1e-9));
    // mu + 3*sigma and mu - 3*sigma exactly
    CHECK(limits.ucl == doctest::Approx(6.37).epsilon(1e-9));
    CHECK(limits.lcl == doctest::Approx(-6.83).epsilon(1e-9));
}

TEST_CASE("limit arithmetic is symmetric about the center line") {
    Rng rng(8);
    for (int iter = 0; iter < 100; ++iter) {
        double mu = rng.next_in(-5, 5);
        double stddev = rng.next_in(0, 3);
        auto limits = limits_from_stats(mu, stddev, LimitMode::clt_sample, 100, 0);
        CHECK(limits.ucl - limits.mu == doctest::Approx(3.0 * limits.sigma).epsilon(1e-12));
        CHECK(limits.mu - limits.lcl == doctest::Approx(3.0 * limits.sigma).epsilon(1e-12));
        CHECK(limits.ucl >= limits.lcl);
    }
}

TEST_CASE("identical ratios estimate sigma zero and collapsed limits") {
    std::vector<double> ratios(50, 0.4);
    auto limits = estimate_limits(ratios, LimitMode::clt_sample, 10, 3);
    CHECK(limits.mu == doctest::Approx(0.4));
    CHECK(limits.sigma == 0.0);
    CHECK(limits.ucl == limits.lcl);
    CHECK(limits.ucl == doctest::Approx(0.4));
}

TEST_CASE("direct mode over two points uses the n-1 divisor") {
    std::vector<double> ratios = {-1.0, 1.0};
    auto limits = estimate_limits(ratios, LimitMode::direct, 100, 3);
    CHECK(limits.mu == doctest::Approx(0.0));
    CHECK(limits.sigma == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(limits.ucl == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("estimation needs enough data") {
    std::vector<double> ratios = {0.1, 0.2, 0.3};
    CHECK_THROWS_AS(estimate_limits(ratios, LimitMode::clt_sample, 100, 1), Error);
    std::vector<double> one = {0.1};
    CHECK_THROWS_AS(estimate_limits(one, LimitMode::direct, 2, 1), Error);
}

TEST_CASE("limit estimation is deterministic in its seed") {
    Rng rng(5);
    std::vector<double> ratios;
    for (int i = 0; i < 500; ++i) ratios.push_back(rng.next_normal());
    auto first = estimate_limits(ratios, LimitMode::clt_sample, 100, 9);
    auto second = estimate_limits(ratios, LimitMode::clt_sample, 100, 9);
    CHECK(first.mu == second.mu);
    CHECK(first.sigma == second.sigma);
    auto other_seed = estimate_limits(ratios, LimitMode::clt_sample, 100, 10);
    CHECK(other_seed.mu != first.mu);
}

namespace {

ControlLimits reference_limits() {
    // The published worked example: UCL 5.37, LCL -6.83.
    ControlLimits limits;
    limits.mu = (5.37 + -6.83) / 2.0;
    limits.sigma = (5.37 - limits.mu) / 3.0;
    limits.ucl = 5.37;
    limits.cl = limits.mu;
    limits.lcl = -6.83;
    limits.mode = LimitMode::clt_sample;
    limits.sample_size = 100;
    limits.seed = 0;
    return limits;
}

ResidualRow ratio_row(std::size_t id, double ratio) {
    ResidualRow row;
    row.row_id = id;
    row.actual = 1.0;
    row.predicted = 1.0 + ratio;
    row.error = ratio;
    row.difference_ratio = ratio;
    return row;
}

}  // namespace

TEST_CASE("published outlier ratios classify as outliers, sample rows as inliers") {
    auto limits = reference_limits();
    std::vector<ResidualRow> rows = {
        ratio_row(198, 44.06),     ratio_row(9719, 31.32),  ratio_row(11540, 25.22),
        ratio_row(14138, 145748.59), ratio_row(14, -0.414407496), ratio_row(13, 0.042896471),
        ratio_row(95, -0.619018113),
    };
    auto records = classify(rows, limits);
    std::size_t outliers = 0;
    for (const auto& record : records) {
        const std::size_t id = record.row.row_id;
        if (id == 198 || id == 9719 || id == 11540 || id == 14138) {
            CHECK(record.classification == Classification::outlier);
            ++outliers;
        } else {
            CHECK(record.classification == Classification::inlier);
        }
    }
    CHECK(outliers == 4);
}

TEST_CASE("a ratio exactly on a limit is an inlier") {
    auto limits = reference_limits();
    auto records = classify({ratio_row(0, 5.37), ratio_row(1, -6.83),
                             ratio_row(2, std::nextafter(5.37, 10.0))},
                            limits);
    for (const auto& record : records) {
        if (record.row.row_id == 2) {
            CHECK(record.classification == Classification::outlier);
        } else {
            CHECK(record.classification == Classification::inlier);
        }
    }
}

TEST_CASE("classification output is sorted by descending absolute ratio") {
    auto limits = reference_limits();
    std::vector<ResidualRow> rows = {ratio_row(0, 1.0), ratio_row(1, -44.0), ratio_row(2, 3.0)};
    ResidualRow undefined;
    undefined.row_id = 3;
    undefined.actual = 0.0;
    undefined.predicted = 5.0;
    undefined.error = 5.0;
    rows.push_back(undefined);

    auto records = classify(rows, limits);
    REQUIRE(records.size() == 4);
    CHECK(records[0].row.row_id == 1);
    CHECK(records[1].row.row_id == 2);
    CHECK(records[2].row.row_id == 0);
    CHECK(records[3].row.row_id == 3);
    CHECK(records[3].classification == Classification::undefined_ratio);
}

TEST_CASE("widening the limits never creates an outlier") {
    Rng rng(21);
    std::vector<ResidualRow> rows;
    for (std::size_t i = 0; i < 200; ++i) rows.push_back(ratio_row(i, rng.next_in(-10, 10)));

    auto narrow = limits_from_stats(0.0, 0.5, LimitMode::direct, 200, 0);
    auto wide = limits_from_stats(0.0, 2.0, LimitMode::direct, 200, 0);
    auto narrow_records = classify(rows, narrow);
    auto wide_records = classify(rows, wide);

    std::set<std::size_t> narrow_outliers, wide_outliers;
    for (const auto& r : narrow_records)
        if (r.classification == Classification::outlier) narrow_outliers.insert(r.row.row_id);
    for (const auto& r : wide_records)
        if (r.classification == Classification::outlier) wide_outliers.insert(r.row.row_id);
    for (std::size_t id : wide_outliers) CHECK(narrow_outliers.count(id) == 1);
}

TEST_CASE("chart series: no rows still carries the three reference lines") {
    auto limits = reference_limits();
    auto series = chart_points({}, limits);
    CHECK(series.points.empty());
    CHECK(series.ucl == limits.ucl);
    CHECK(series.cl == limits.cl);
    CHECK(series.lcl == limits.lcl);
}

TEST_CASE("chart series flags points beyond the limits") {
    auto limits = reference_limits();
    auto records = classify({ratio_row(0, 0.0), ratio_row(1, 6.0)}, limits);
    auto series = chart_points(records, limits);
    REQUIRE(series.points.size() == 2);
    // points are in row order regardless of report order
    CHECK(series.points[0].row_id == 0);
    CHECK_FALSE(series.points[0].outlier);
    CHECK(series.points[1].row_id == 1);
    CHECK(series.points[1].outlier);
    CHECK(series.points[1].ratio == 6.0);
}

TEST_CASE("three-sigma tail mass over simulated standard normals") {
    Rng rng(424242);
    std::vector<double> ratios(100000);
    for (auto& r : ratios) r = rng.next_normal();
    auto limits = estimate_limits(ratios, LimitMode::direct, 2, 0);

    std::size_t outliers = 0;
    for (double r : ratios)
        if (r > limits.ucl || r < limits.lcl) ++outliers;
    const double fraction = static_cast<double>(outliers) / static_cast<double>(ratios.size());
    CHECK(fraction > 0.0027 - 0.0015);
    CHECK(fraction < 0.0027 + 0.0015);
}

TEST_CASE("undefined ratios are never dropped") {
    auto limits = reference_limits();
    std::vector<ResidualRow> rows;
    for (std::size_t i = 0; i < 5; ++i) {
        ResidualRow row;
        row.row_id = i;
        row.actual = 0.0;
        row.predicted = 1.0;
        row.error = 1.0;
        rows.push_back(row);
    }
    auto records = classify(rows, limits);
    CHECK(records.size() == 5);
    for (const auto& record : records)
        CHECK(record.classification == Classification::undefined_ratio);
}
