#ifndef DATAPROF_PIPELINE_HPP
#define DATAPROF_PIPELINE_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dataprof/encode.hpp"
#include "dataprof/ingest.hpp"
#include "dataprof/mlp.hpp"
#include "dataprof/rules.hpp"
#include "dataprof/spc.hpp"

namespace dataprof::cli {

struct SpcConfig {
    spc::LimitMode mode = spc::LimitMode::clt_sample;
    std::size_t sample_size = 100;
    std::uint64_t seed = 1;
};

struct PipelineConfig {
    std::string input_path;
    std::string schema_path;
    char delimiter = ',';
    mlp::TrainConfig train;
    SpcConfig spc;

    // Output paths; empty means "do not write".
    std::string violations_path;
    std::string report_path;
    std::string chart_path;       // rendered SVG
    std::string chart_data_path;  // plot-data series
    std::string sweep_path;
    std::string encoded_dump_path;
    std::string model_out_path;

    int verbosity = 1;  // 0 quiet, 1 summary, 2 chatty

    // Throws Error(config): input/schema required, provided output paths
    // distinct, train config in range.
    void validate() const;

    // Digest of every field that affects the outputs; recorded in report
    // headers so a report names the config that produced it.
    std::uint64_t digest() const;
};

struct PipelineSummary {
    std::size_t rows_in = 0;
    std::size_t cbqr_flagged = 0;
    std::size_t encode_flagged = 0;
    std::size_t clean_rows = 0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::size_t violation_count = 0;
    mlp::EvalMetrics metrics;
    spc::ControlLimits limits;
    std::size_t outlier_count = 0;
    std::size_t undefined_ratio_count = 0;
    std::vector<std::size_t> outlier_row_ids;
};

// Full run: ingest -> CBQR -> encode -> split/train -> predict every
// clean row -> control limits -> classify -> reports. Throws Error with
// the owning stage on failure; any outputs already written are removed.
PipelineSummary run_pipeline(const PipelineConfig& cfg, std::ostream& log);

// Same front half as run_pipeline, then trains one model per
// architecture and writes the sweep report to cfg.sweep_path.
std::vector<mlp::SweepRow> run_sweep(const PipelineConfig& cfg,
                                     const std::vector<std::vector<std::size_t>>& architectures,
                                     std::ostream& log);

// Report writers. Every file starts with comment lines recording the
// tool version, seeds and config digest; rewriting with the same inputs
// is byte-identical.
struct ReportHeader {
    std::uint64_t config_digest = 0;
    std::uint64_t train_seed = 0;
    std::uint64_t spc_seed = 0;
    std::string extra;  // one optional extra comment line
};

void write_violations(const std::string& path, const std::vector<rules::RuleViolation>& violations,
                      const ReportHeader& header);
void write_outlier_report(const std::string& path, const std::vector<spc::OutlierRecord>& records,
                          const spc::ControlLimits& limits, const ReportHeader& header);
void write_sweep_report(const std::string& path, const std::vector<mlp::SweepRow>& rows,
                        const ReportHeader& header);
void write_encoded_dump(const std::string& path, const std::vector<encode::EncodedRow>& rows,
                        const ReportHeader& header);
void write_chart_svg(const std::string& path, const spc::ChartSeries& series,
                     const ReportHeader& header);
void write_chart_data(const std::string& path, const spc::ChartSeries& series,
                      const ReportHeader& header);

// Predictions file for the spc subcommand: header row_id,actual,predicted.
struct PredictionRows {
    std::vector<std::size_t> row_ids;
    std::vector<double> actuals;
    std::vector<double> predictions;
};
PredictionRows load_predictions(const std::string& path, char delimiter = ',');

}  // namespace dataprof::cli

#endif
