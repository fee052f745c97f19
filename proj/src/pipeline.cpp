#include "dataprof/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "dataprof/common.hpp"
#include "dataprof/csv.hpp"

namespace dataprof::cli {

namespace {

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

void write_header(std::ostream& out, const ReportHeader& header) {
    out << "# dataprof " << kVersion << "\n";
    out << "# config " << hex64(header.config_digest) << "\n";
    out << "# train-seed " << header.train_seed << " spc-seed " << header.spc_seed << "\n";
    if (!header.extra.empty()) out << "# " << header.extra << "\n";
}

std::ofstream open_output(const std::string& path, Stage stage) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(stage, "cannot write '" + path + "'");
    return out;
}

void finish_output(std::ofstream& out, const std::string& path, Stage stage) {
    out.flush();
    if (!out) throw Error(stage, "failed writing '" + path + "'");
}

// Null cells print as a bare empty field, empty cells as "".
std::string observed_field(const std::optional<std::string>& observed, char delimiter) {
    if (!observed) return "";
    if (observed->empty()) return "\"\"";
    return csv_escape(*observed, delimiter);
}

std::string metric_field(const std::optional<double>& value) {
    return value ? format_double(*value) : "undefined";
}

// Removes everything already written when a later output fails.
class OutputTracker {
public:
    void wrote(const std::string& path) { written_.push_back(path); }

    void discard_all() {
        std::error_code ec;
        for (const auto& path : written_) std::filesystem::remove(path, ec);
        written_.clear();
    }

private:
    std::vector<std::string> written_;
};

std::string limits_line(const spc::ControlLimits& limits) {
    std::ostringstream out;
    out << "limits mode=" << spc::limit_mode_name(limits.mode)
        << " sample-size=" << limits.sample_size << " seed=" << limits.seed
        << " mu=" << format_double(limits.mu) << " sigma=" << format_double(limits.sigma)
        << " ucl=" << format_double(limits.ucl) << " cl=" << format_double(limits.cl)
        << " lcl=" << format_double(limits.lcl);
    return out.str();
}

struct PreparedData {
    ingest::SchemaConfig schema;
    std::size_t rows_in = 0;
    std::size_t cbqr_flagged = 0;
    std::size_t encode_flagged = 0;
    std::vector<rules::RuleViolation> violations;
    std::vector<encode::EncodedRow> encoded;
};

// ingest -> CBQR -> encode, with all violations merged and ordered by
// (row_id, schema column index, rule id).
PreparedData prepare(const PipelineConfig& cfg, std::ostream& log) {
    PreparedData data;
    data.schema = ingest::load_schema(cfg.schema_path);
    auto records = ingest::load_dataset(cfg.input_path, data.schema, cfg.delimiter);
    if (records.empty()) throw Error(Stage::ingest, "no data rows");
    data.rows_in = records.size();

    auto cbqr = rules::run_cbqr(records, data.schema);
    data.cbqr_flagged = records.size() - cbqr.clean.size();

    auto [encoded, encode_violations] = encode::encode_dataset(cbqr.clean, data.schema);
    data.encode_flagged = cbqr.clean.size() - encoded.size();
    data.encoded = std::move(encoded);

    data.violations = std::move(cbqr.violations);
    data.violations.insert(data.violations.end(), encode_violations.begin(),
                           encode_violations.end());

    std::unordered_map<std::string, std::size_t> column_index;
    for (std::size_t i = 0; i < data.schema.columns.size(); ++i)
        column_index[data.schema.columns[i].name] = i;
    std::sort(data.violations.begin(), data.violations.end(),
              [&](const rules::RuleViolation& a, const rules::RuleViolation& b) {
                  if (a.row_id != b.row_id) return a.row_id < b.row_id;
                  const std::size_t ca = column_index[a.column];
                  const std::size_t cb = column_index[b.column];
                  if (ca != cb) return ca < cb;
                  return a.rule_id < b.rule_id;
              });

    if (cfg.verbosity >= 1) {
        log << "ingest: " << data.rows_in << " rows, " << data.schema.columns.size()
            << " columns\n";
        log << "cbqr: " << (data.rows_in - data.cbqr_flagged) << " clean, " << data.cbqr_flagged
            << " flagged\n";
        log << "encode: " << data.encoded.size() << " encoded, " << data.encode_flagged
            << " flagged, " << data.violations.size() << " total violations\n";
    }
    return data;
}

std::string metrics_line(const mlp::EvalMetrics& metrics) {
    std::ostringstream out;
    out << "metrics: r=" << metric_field(metrics.correlation)
        << " mae=" << format_double(metrics.mean_absolute_error)
        << " rmse=" << format_double(metrics.root_mean_squared_error)
        << " n=" << metrics.n_test;
    return out.str();
}

}  // namespace

void PipelineConfig::validate() const {
    if (input_path.empty()) throw Error(Stage::config, "input path is required");
    if (schema_path.empty()) throw Error(Stage::config, "schema path is required");
    train.validate();
    if (spc.sample_size < 2) throw Error(Stage::config, "spc sample size must be >= 2");

    std::vector<std::string> outputs;
    for (const auto* path : {&violations_path, &report_path, &chart_path, &chart_data_path,
                             &sweep_path, &encoded_dump_path, &model_out_path}) {
        if (!path->empty()) outputs.push_back(*path);
    }
    for (const auto& path : outputs) {
        if (path == input_path || path == schema_path)
            throw Error(Stage::config, "output path collides with an input: '" + path + "'");
    }
    std::sort(outputs.begin(), outputs.end());
    auto dup = std::adjacent_find(outputs.begin(), outputs.end());
    if (dup != outputs.end())
        throw Error(Stage::config, "output path used twice: '" + *dup + "'");
}

std::uint64_t PipelineConfig::digest() const {
    std::ostringstream canon;
    canon << "v=" << kVersion << ";in=" << input_path << ";schema=" << schema_path
          << ";delim=" << static_cast<int>(delimiter)
          << ";hidden=" << mlp::hidden_sizes_to_string(train.hidden_sizes)
          << ";lr=" << format_double(train.learning_rate)
          << ";mom=" << format_double(train.momentum) << ";epochs=" << train.epochs
          << ";frac=" << format_double(train.train_fraction) << ";seed=" << train.seed
          << ";shuffle=" << (train.shuffle ? 1 : 0)
          << ";spc-mode=" << spc::limit_mode_name(spc.mode) << ";spc-n=" << spc.sample_size
          << ";spc-seed=" << spc.seed;
    return fnv1a64(canon.str());
}

void write_violations(const std::string& path, const std::vector<rules::RuleViolation>& violations,
                      const ReportHeader& header) {
    auto out = open_output(path, Stage::ingest);
    write_header(out, header);
    out << "row_id,column,rule_id,observed,detail\n";
    for (const auto& v : violations) {
        out << v.row_id << ',' << csv_escape(v.column, ',') << ',' << v.rule_id << ','
            << observed_field(v.observed, ',') << ',' << csv_escape(v.detail, ',') << "\n";
    }
    finish_output(out, path, Stage::ingest);
}

void write_outlier_report(const std::string& path, const std::vector<spc::OutlierRecord>& records,
                          const spc::ControlLimits& limits, const ReportHeader& header) {
    auto out = open_output(path, Stage::spc);
    ReportHeader full = header;
    full.extra = limits_line(limits);
    write_header(out, full);
    out << "id,actual_annual_salary,predicted_annual_salary,error,difference_ratio,"
           "classification\n";
    for (const auto& record : records) {
        out << record.row.row_id << ',' << format_double(record.row.actual) << ','
            << format_double(record.row.predicted) << ',' << format_double(record.row.error) << ','
            << metric_field(record.row.difference_ratio) << ','
            << spc::classification_name(record.classification) << "\n";
    }
    finish_output(out, path, Stage::spc);
}

void write_sweep_report(const std::string& path, const std::vector<mlp::SweepRow>& rows,
                        const ReportHeader& header) {
    auto out = open_output(path, Stage::training);
    write_header(out, header);
    out << "no,hidden_layers,correlation_coefficient,mean_absolute_error,"
           "root_mean_squared_error\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        out << (i + 1) << ',' << csv_escape(mlp::hidden_sizes_to_string(row.hidden_sizes), ',');
        if (row.metrics) {
            out << ',' << metric_field(row.metrics->correlation) << ','
                << format_double(row.metrics->mean_absolute_error) << ','
                << format_double(row.metrics->root_mean_squared_error) << "\n";
        } else {
            out << ",NA,NA,NA\n";
            out << "# no " << (i + 1) << " failed: " << row.error << "\n";
        }
    }
    if (auto best = mlp::best_sweep_row(rows)) {
        out << "# best " << (*best + 1) << " hidden "
            << mlp::hidden_sizes_to_string(rows[*best].hidden_sizes) << "\n";
    }
    finish_output(out, path, Stage::training);
}

void write_encoded_dump(const std::string& path, const std::vector<encode::EncodedRow>& rows,
                        const ReportHeader& header) {
    auto out = open_output(path, Stage::ingest);
    write_header(out, header);
    const std::size_t arity = rows.empty() ? 0 : rows.front().features.size();
    out << "row_id";
    for (std::size_t f = 0; f < arity; ++f) out << ",f" << f;
    out << ",target\n";
    for (const auto& row : rows) {
        out << row.row_id;
        for (double feature : row.features) out << ',' << format_double(feature);
        out << ',' << format_double(row.target) << "\n";
    }
    finish_output(out, path, Stage::ingest);
}

void write_chart_data(const std::string& path, const spc::ChartSeries& series,
                      const ReportHeader& header) {
    auto out = open_output(path, Stage::spc);
    ReportHeader full = header;
    full.extra = "ucl " + format_double(series.ucl) + " cl " + format_double(series.cl) + " lcl " +
                 format_double(series.lcl);
    write_header(out, full);
    out << "index,row_id,difference_ratio,outlier\n";
    for (const auto& point : series.points) {
        out << point.index << ',' << point.row_id << ',' << format_double(point.ratio) << ','
            << (point.outlier ? 1 : 0) << "\n";
    }
    finish_output(out, path, Stage::spc);
}

namespace {

std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

void write_chart_svg(const std::string& path, const spc::ChartSeries& series,
                     const ReportHeader& header) {
    constexpr double width = 960, height = 520;
    constexpr double left = 80, right = 930, top = 50, bottom = 470;

    double y_min = std::min(series.lcl, series.cl);
    double y_max = std::max(series.ucl, series.cl);
    for (const auto& point : series.points) {
        y_min = std::min(y_min, point.ratio);
        y_max = std::max(y_max, point.ratio);
    }
    double span = y_max - y_min;
    if (span <= 0.0) span = 2.0, y_min -= 1.0, y_max += 1.0;
    const double pad = 0.05 * span;
    y_min -= pad;
    y_max += pad;

    const double x_count = series.points.size() > 1
                               ? static_cast<double>(series.points.size() - 1)
                               : 1.0;
    auto x_of = [&](std::size_t index) {
        return left + (right - left) * (static_cast<double>(index) / x_count);
    };
    auto y_of = [&](double value) {
        return bottom - (bottom - top) * ((value - y_min) / (y_max - y_min));
    };

    auto out = open_output(path, Stage::spc);
    out << "<!-- dataprof " << kVersion << " config " << hex64(header.config_digest)
        << " train-seed " << header.train_seed << " spc-seed " << header.spc_seed << " -->\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << svg_num(width / 2)
        << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
        << "difference-ratio control chart (n=" << series.points.size() << ")</text>\n";

    // axes
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\""
        << bottom << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << svg_num((left + right) / 2) << "\" y=\"" << svg_num(bottom + 36)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">observation"
        << "</text>\n";

    struct RefLine {
        double value;
        const char* label;
        const char* color;
        const char* dash;
    };
    const RefLine lines[] = {
        {series.ucl, "UCL", "#c0392b", "6,4"},
        {series.cl, "CL", "#27ae60", ""},
        {series.lcl, "LCL", "#c0392b", "6,4"},
    };
    for (const auto& line : lines) {
        const double y = y_of(line.value);
        out << "<line x1=\"" << left << "\" y1=\"" << svg_num(y) << "\" x2=\"" << right
            << "\" y2=\"" << svg_num(y) << "\" stroke=\"" << line.color << "\"";
        if (line.dash[0]) out << " stroke-dasharray=\"" << line.dash << "\"";
        out << "/>\n";
        out << "<text x=\"" << svg_num(left - 6) << "\" y=\"" << svg_num(y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << line.label
            << "=" << format_double(line.value) << "</text>\n";
    }

    if (series.points.size() > 1) {
        out << "<polyline fill=\"none\" stroke=\"#5b84b1\" stroke-width=\"1\" points=\"";
        for (std::size_t i = 0; i < series.points.size(); ++i) {
            if (i > 0) out << ' ';
            out << svg_num(x_of(series.points[i].index)) << ','
                << svg_num(y_of(series.points[i].ratio));
        }
        out << "\"/>\n";
    }
    for (const auto& point : series.points) {
        if (point.outlier) {
            out << "<circle cx=\"" << svg_num(x_of(point.index)) << "\" cy=\""
                << svg_num(y_of(point.ratio)) << "\" r=\"3.5\" fill=\"#c0392b\"/>\n";
        } else {
            out << "<circle cx=\"" << svg_num(x_of(point.index)) << "\" cy=\""
                << svg_num(y_of(point.ratio)) << "\" r=\"2\" fill=\"#5b84b1\"/>\n";
        }
    }
    out << "</svg>\n";
    finish_output(out, path, Stage::spc);
}

PredictionRows load_predictions(const std::string& path, char delimiter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Stage::spc, "predictions: cannot read '" + path + "'");
    CsvReader reader(in, delimiter);
    std::vector<std::string> fields;
    if (!reader.next(fields)) throw Error(Stage::spc, "predictions: missing header row");

    int id_pos = -1, actual_pos = -1, predicted_pos = -1;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        std::string name = trim_ascii(fields[i]);
        if (name == "row_id") id_pos = static_cast<int>(i);
        else if (name == "actual") actual_pos = static_cast<int>(i);
        else if (name == "predicted") predicted_pos = static_cast<int>(i);
    }
    if (id_pos < 0 || actual_pos < 0 || predicted_pos < 0)
        throw Error(Stage::spc, "predictions: header must contain row_id, actual, predicted");

    PredictionRows rows;
    std::size_t line = 0;
    while (reader.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        const std::size_t needed =
            static_cast<std::size_t>(std::max({id_pos, actual_pos, predicted_pos})) + 1;
        if (fields.size() < needed)
            throw Error(Stage::spc, "predictions: short row " + std::to_string(line));
        std::size_t row_id = 0;
        const std::string& id_text = fields[id_pos];
        auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), row_id);
        if (ec != std::errc() || ptr != id_text.data() + id_text.size())
            throw Error(Stage::spc, "predictions: bad row_id '" + id_text + "'");
        auto actual = parse_decimal(fields[actual_pos]);
        auto predicted = parse_decimal(fields[predicted_pos]);
        if (!actual || !predicted)
            throw Error(Stage::spc,
                        "predictions: non-numeric value in row " + std::to_string(line));
        rows.row_ids.push_back(row_id);
        rows.actuals.push_back(*actual);
        rows.predictions.push_back(*predicted);
        ++line;
    }
    return rows;
}

PipelineSummary run_pipeline(const PipelineConfig& cfg, std::ostream& log) {
    cfg.validate();
    PreparedData data = prepare(cfg, log);

    auto result = mlp::train(data.encoded, cfg.train);
    if (cfg.verbosity >= 1) {
        log << "train: " << result.metrics.n_test << " test rows held out of "
            << data.encoded.size() << "\n";
        log << metrics_line(result.metrics) << "\n";
    }

    // Score every clean row, train and test alike; the control chart covers
    // the whole dataset.
    std::vector<double> actuals, predictions;
    std::vector<std::size_t> row_ids;
    actuals.reserve(data.encoded.size());
    predictions.reserve(data.encoded.size());
    row_ids.reserve(data.encoded.size());
    for (const auto& row : data.encoded) {
        actuals.push_back(row.target);
        predictions.push_back(result.model.predict(row.features));
        row_ids.push_back(row.row_id);
    }

    auto residual_rows = spc::residuals(actuals, predictions, row_ids);
    std::vector<double> ratios;
    ratios.reserve(residual_rows.size());
    for (const auto& row : residual_rows)
        if (row.difference_ratio) ratios.push_back(*row.difference_ratio);

    auto limits = spc::estimate_limits(ratios, cfg.spc.mode, cfg.spc.sample_size, cfg.spc.seed);
    auto records = spc::classify(residual_rows, limits);
    auto series = spc::chart_points(records, limits);

    PipelineSummary summary;
    summary.rows_in = data.rows_in;
    summary.cbqr_flagged = data.cbqr_flagged;
    summary.encode_flagged = data.encode_flagged;
    summary.clean_rows = data.encoded.size();
    summary.test_rows = result.metrics.n_test;
    summary.train_rows = data.encoded.size() - result.metrics.n_test;
    summary.violation_count = data.violations.size();
    summary.metrics = result.metrics;
    summary.limits = limits;
    for (const auto& record : records) {
        if (record.classification == spc::Classification::outlier) {
            ++summary.outlier_count;
            summary.outlier_row_ids.push_back(record.row.row_id);
        } else if (record.classification == spc::Classification::undefined_ratio) {
            ++summary.undefined_ratio_count;
        }
    }

    if (cfg.verbosity >= 1) {
        log << limits_line(limits) << "\n";
        log << "classify: " << summary.outlier_count << " outliers, "
            << summary.undefined_ratio_count << " undefined-ratio, "
            << (records.size() - summary.outlier_count - summary.undefined_ratio_count)
            << " inliers\n";
    }
    if (cfg.verbosity >= 2 && !summary.outlier_row_ids.empty()) {
        log << "outlier rows:";
        std::size_t shown = 0;
        for (std::size_t id : summary.outlier_row_ids) {
            if (++shown > 20) {
                log << " ... +" << (summary.outlier_row_ids.size() - 20);
                break;
            }
            log << ' ' << id;
        }
        log << "\n";
    }

    ReportHeader header{cfg.digest(), cfg.train.seed, cfg.spc.seed, ""};
    OutputTracker tracker;
    try {
        if (!cfg.violations_path.empty()) {
            tracker.wrote(cfg.violations_path);
            write_violations(cfg.violations_path, data.violations, header);
        }
        if (!cfg.encoded_dump_path.empty()) {
            tracker.wrote(cfg.encoded_dump_path);
            write_encoded_dump(cfg.encoded_dump_path, data.encoded, header);
        }
        if (!cfg.model_out_path.empty()) {
            tracker.wrote(cfg.model_out_path);
            // same provenance header as the reports; the loader skips
            // comment lines
            auto out = open_output(cfg.model_out_path, Stage::training);
            write_header(out, header);
            out << mlp::model_to_text(result.model);
            finish_output(out, cfg.model_out_path, Stage::training);
        }
        if (!cfg.report_path.empty()) {
            tracker.wrote(cfg.report_path);
            write_outlier_report(cfg.report_path, records, limits, header);
        }
        if (!cfg.chart_path.empty()) {
            tracker.wrote(cfg.chart_path);
            write_chart_svg(cfg.chart_path, series, header);
        }
        if (!cfg.chart_data_path.empty()) {
            tracker.wrote(cfg.chart_data_path);
            write_chart_data(cfg.chart_data_path, series, header);
        }
    } catch (...) {
        tracker.discard_all();
        throw;
    }

    if (cfg.verbosity >= 1) {
        for (const auto* path :
             {&cfg.violations_path, &cfg.encoded_dump_path, &cfg.model_out_path, &cfg.report_path,
              &cfg.chart_path, &cfg.chart_data_path}) {
            if (!path->empty()) log << "wrote " << *path << "\n";
        }
    }
    return summary;
}

std::vector<mlp::SweepRow> run_sweep(const PipelineConfig& cfg,
                                     const std::vector<std::vector<std::size_t>>& architectures,
                                     std::ostream& log) {
    cfg.validate();
    PreparedData data = prepare(cfg, log);

    auto rows = mlp::sweep(data.encoded, architectures, cfg.train);

    if (cfg.verbosity >= 1) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            log << "sweep " << (i + 1) << " [" << mlp::hidden_sizes_to_string(rows[i].hidden_sizes)
                << "]: ";
            if (rows[i].metrics) {
                log << "r=" << metric_field(rows[i].metrics->correlation)
                    << " mae=" << format_double(rows[i].metrics->mean_absolute_error)
                    << " rmse=" << format_double(rows[i].metrics->root_mean_squared_error) << "\n";
            } else {
                log << "failed: " << rows[i].error << "\n";
            }
        }
        if (auto best = mlp::best_sweep_row(rows)) {
            log << "best " << (*best + 1) << " ["
                << mlp::hidden_sizes_to_string(rows[*best].hidden_sizes) << "]\n";
        }
    }

    if (!cfg.sweep_path.empty()) {
        ReportHeader header{cfg.digest(), cfg.train.seed, cfg.spc.seed, ""};
        OutputTracker tracker;
        try {
            tracker.wrote(cfg.sweep_path);
            write_sweep_report(cfg.sweep_path, rows, header);
        } catch (...) {
            tracker.discard_all();
            throw;
        }
        if (cfg.verbosity >= 1) log << "wrote " << cfg.sweep_path << "\n";
    }
    return rows;
}

}  // namespace dataprof::cli
