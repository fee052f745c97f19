#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dataprof/common.hpp"
#include "dataprof/pipeline.hpp"

namespace {

using dataprof::Error;
using dataprof::Stage;
namespace cli = dataprof::cli;
namespace mlp = dataprof::mlp;
namespace spc = dataprof::spc;

struct Options {
    cli::PipelineConfig cfg;
    std::string hidden = "12,18,12,10";
    std::string spc_mode = "clt-sample";
    std::string delimiter = ",";
    std::string architectures;
    std::string predictions_path;
    bool quiet = false;
    bool no_shuffle = false;
    bool verbose = false;
};

void add_input_flags(CLI::App* app, Options& opt) {
    app->add_option("--input", opt.cfg.input_path, "input dataset (delimited text)")->required();
    app->add_option("--schema", opt.cfg.schema_path, "schema file (JSON)")->required();
    app->add_option("--delimiter", opt.delimiter, "field delimiter (default ,)");
}

void add_train_flags(CLI::App* app, Options& opt) {
    app->add_option("--hidden", opt.hidden, "hidden layer sizes, e.g. 12,18,12,10");
    app->add_option("--lr", opt.cfg.train.learning_rate, "learning rate (default 0.3)");
    app->add_option("--momentum", opt.cfg.train.momentum, "momentum (default 0.2)");
    app->add_option("--epochs", opt.cfg.train.epochs, "training epochs (default 500)");
    app->add_option("--train-fraction", opt.cfg.train.train_fraction,
                    "training split fraction (default 0.66)");
    app->add_option("--seed", opt.cfg.train.seed, "training seed (default 42)");
    app->add_flag("--no-shuffle", opt.no_shuffle, "split without shuffling");
}

void add_spc_flags(CLI::App* app, Options& opt) {
    app->add_option("--spc-mode", opt.spc_mode, "limit estimation: clt-sample or direct");
    app->add_option("--sample-size", opt.cfg.spc.sample_size,
                    "rows sampled for clt-sample limits (default 100)");
    app->add_option("--spc-seed", opt.cfg.spc.seed, "sampling seed (default 1)");
}

void add_quiet_flags(CLI::App* app, Options& opt) {
    app->add_flag("-q,--quiet", opt.quiet, "suppress the summary");
    app->add_flag("-v,--verbose", opt.verbose, "chattier summary");
}

// Flags parsed as strings need one decode step after CLI11 runs.
void resolve(Options& opt) {
    auto hidden = mlp::hidden_sizes_from_string(opt.hidden);
    if (!hidden) throw Error(Stage::config, "bad --hidden list '" + opt.hidden + "'");
    opt.cfg.train.hidden_sizes = *hidden;

    auto mode = spc::limit_mode_from_name(opt.spc_mode);
    if (!mode) throw Error(Stage::config, "bad --spc-mode '" + opt.spc_mode + "'");
    opt.cfg.spc.mode = *mode;

    if (opt.delimiter.size() != 1)
        throw Error(Stage::config, "--delimiter must be a single character");
    opt.cfg.delimiter = opt.delimiter[0];

    opt.cfg.train.shuffle = !opt.no_shuffle;
    opt.cfg.verbosity = opt.quiet ? 0 : (opt.verbose ? 2 : 1);
}

std::vector<std::vector<std::size_t>> parse_architectures(const std::string& text) {
    if (text.empty()) return mlp::default_sweep_architectures();
    std::vector<std::vector<std::size_t>> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t sep = text.find(';', pos);
        std::string part = text.substr(pos, sep == std::string::npos ? sep : sep - pos);
        auto sizes = mlp::hidden_sizes_from_string(part);
        if (!sizes) throw Error(Stage::config, "bad --architectures entry '" + part + "'");
        out.push_back(*sizes);
        if (sep == std::string::npos) break;
        pos = sep + 1;
    }
    return out;
}

int run_spc_command(const Options& opt) {
    auto rows = cli::load_predictions(opt.predictions_path, opt.cfg.delimiter);
    auto residual_rows = spc::residuals(rows.actuals, rows.predictions, rows.row_ids);
    std::vector<double> ratios;
    for (const auto& row : residual_rows)
        if (row.difference_ratio) ratios.push_back(*row.difference_ratio);

    auto limits =
        spc::estimate_limits(ratios, opt.cfg.spc.mode, opt.cfg.spc.sample_size, opt.cfg.spc.seed);
    auto records = spc::classify(residual_rows, limits);
    auto series = spc::chart_points(records, limits);

    cli::ReportHeader header{opt.cfg.digest(), opt.cfg.train.seed, opt.cfg.spc.seed, ""};
    if (!opt.cfg.report_path.empty())
        cli::write_outlier_report(opt.cfg.report_path, records, limits, header);
    if (!opt.cfg.chart_path.empty()) cli::write_chart_svg(opt.cfg.chart_path, series, header);
    if (!opt.cfg.chart_data_path.empty())
        cli::write_chart_data(opt.cfg.chart_data_path, series, header);

    if (opt.cfg.verbosity >= 1) {
        std::size_t outliers = 0, undefined = 0;
        for (const auto& record : records) {
            if (record.classification == spc::Classification::outlier) ++outliers;
            if (record.classification == spc::Classification::undefined_ratio) ++undefined;
        }
        std::cout << "rows: " << records.size() << "\n";
        std::cout << "limits: mode=" << spc::limit_mode_name(limits.mode)
                  << " mu=" << dataprof::format_double(limits.mu)
                  << " sigma=" << dataprof::format_double(limits.sigma)
                  << " ucl=" << dataprof::format_double(limits.ucl)
                  << " lcl=" << dataprof::format_double(limits.lcl) << "\n";
        std::cout << "outliers: " << outliers << " (" << undefined << " undefined-ratio)\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dataprof: tabular outlier detection via a neural regressor and 3-sigma "
                 "control limits"};
    app.require_subcommand(1);

    Options opt;

    auto* profile = app.add_subcommand("profile", "run the full pipeline");
    add_input_flags(profile, opt);
    add_train_flags(profile, opt);
    add_spc_flags(profile, opt);
    add_quiet_flags(profile, opt);
    profile->add_option("--violations", opt.cfg.violations_path, "violations report path");
    profile->add_option("--report", opt.cfg.report_path, "outlier report path");
    profile->add_option("--chart", opt.cfg.chart_path, "control chart SVG path");
    profile->add_option("--chart-data", opt.cfg.chart_data_path, "control chart series path");
    profile->add_option("--dump-encoded", opt.cfg.encoded_dump_path, "encoded matrix dump path");
    profile->add_option("--model-out", opt.cfg.model_out_path, "trained model output path");

    auto* encode_cmd = app.add_subcommand("encode", "encode a dataset to the numeric matrix");
    add_input_flags(encode_cmd, opt);
    add_quiet_flags(encode_cmd, opt);
    encode_cmd->add_option("--dump-encoded", opt.cfg.encoded_dump_path, "encoded matrix path")
        ->required();
    encode_cmd->add_option("--violations", opt.cfg.violations_path, "violations report path");

    auto* check_cmd = app.add_subcommand("check", "run the quality rules only");
    add_input_flags(check_cmd, opt);
    add_quiet_flags(check_cmd, opt);
    check_cmd->add_option("--violations", opt.cfg.violations_path, "violations report path");

    auto* train_cmd = app.add_subcommand("train", "train the regressor and report test metrics");
    add_input_flags(train_cmd, opt);
    add_train_flags(train_cmd, opt);
    add_quiet_flags(train_cmd, opt);
    train_cmd->add_option("--model-out", opt.cfg.model_out_path, "trained model output path");

    auto* sweep_cmd = app.add_subcommand("sweep", "train one model per architecture");
    add_input_flags(sweep_cmd, opt);
    add_train_flags(sweep_cmd, opt);
    add_quiet_flags(sweep_cmd, opt);
    sweep_cmd->add_option("--architectures", opt.architectures,
                          "semicolon-separated hidden lists, e.g. \"12,18,12;12,18,12,10\"");
    sweep_cmd->add_option("--sweep-report", opt.cfg.sweep_path, "sweep report path");

    auto* spc_cmd = app.add_subcommand("spc", "classify a predictions file against 3-sigma limits");
    spc_cmd->add_option("--predictions", opt.predictions_path,
                        "CSV with header row_id,actual,predicted")
        ->required();
    spc_cmd->add_option("--delimiter", opt.delimiter, "field delimiter (default ,)");
    add_spc_flags(spc_cmd, opt);
    add_quiet_flags(spc_cmd, opt);
    spc_cmd->add_option("--report", opt.cfg.report_path, "outlier report path");
    spc_cmd->add_option("--chart", opt.cfg.chart_path, "control chart SVG path");
    spc_cmd->add_option("--chart-data", opt.cfg.chart_data_path, "control chart series path");

    CLI11_PARSE(app, argc, argv);

    try {
        resolve(opt);

        if (spc_cmd->parsed()) return run_spc_command(opt);

        if (profile->parsed()) {
            cli::run_pipeline(opt.cfg, std::cout);
            return 0;
        }

        if (encode_cmd->parsed()) {
            auto schema = dataprof::ingest::load_schema(opt.cfg.schema_path);
            auto records =
                dataprof::ingest::load_dataset(opt.cfg.input_path, schema, opt.cfg.delimiter);
            auto [rows, violations] = dataprof::encode::encode_dataset(records, schema);
            cli::ReportHeader header{opt.cfg.digest(), opt.cfg.train.seed, opt.cfg.spc.seed, ""};
            cli::write_encoded_dump(opt.cfg.encoded_dump_path, rows, header);
            if (!opt.cfg.violations_path.empty())
                cli::write_violations(opt.cfg.violations_path, violations, header);
            if (opt.cfg.verbosity >= 1) {
                std::cout << "encoded " << rows.size() << " rows, " << violations.size()
                          << " violations\n";
            }
            return 0;
        }

        if (check_cmd->parsed()) {
            auto schema = dataprof::ingest::load_schema(opt.cfg.schema_path);
            auto records =
                dataprof::ingest::load_dataset(opt.cfg.input_path, schema, opt.cfg.delimiter);
            auto result = dataprof::rules::run_cbqr(records, schema);
            cli::ReportHeader header{opt.cfg.digest(), opt.cfg.train.seed, opt.cfg.spc.seed, ""};
            if (!opt.cfg.violations_path.empty())
                cli::write_violations(opt.cfg.violations_path, result.violations, header);
            if (opt.cfg.verbosity >= 1) {
                std::cout << records.size() << " rows: " << result.clean.size() << " clean, "
                          << (records.size() - result.clean.size()) << " flagged, "
                          << result.violations.size() << " violations\n";
                if (opt.cfg.violations_path.empty()) {
                    std::size_t shown = 0;
                    for (const auto& v : result.violations) {
                        if (++shown > 20) {
                            std::cout << "  ... " << (result.violations.size() - 20) << " more\n";
                            break;
                        }
                        std::cout << "  row " << v.row_id << " " << v.column << " " << v.rule_id
                                  << ": " << v.detail << "\n";
                    }
                }
            }
            return 0;
        }

        if (train_cmd->parsed()) {
            auto schema = dataprof::ingest::load_schema(opt.cfg.schema_path);
            auto records =
                dataprof::ingest::load_dataset(opt.cfg.input_path, schema, opt.cfg.delimiter);
            if (records.empty()) throw Error(Stage::ingest, "no data rows");
            auto cbqr = dataprof::rules::run_cbqr(records, schema);
            auto [rows, violations] = dataprof::encode::encode_dataset(cbqr.clean, schema);
            auto result = mlp::train(rows, opt.cfg.train);
            if (!opt.cfg.model_out_path.empty())
                mlp::save_model(result.model, opt.cfg.model_out_path);
            if (opt.cfg.verbosity >= 1) {
                std::cout << "trained on " << (rows.size() - result.metrics.n_test) << " rows, "
                          << result.metrics.n_test << " held out\n";
                std::cout << "r="
                          << (result.metrics.correlation
                                  ? dataprof::format_double(*result.metrics.correlation)
                                  : "undefined")
                          << " mae=" << dataprof::format_double(result.metrics.mean_absolute_error)
                          << " rmse="
                          << dataprof::format_double(result.metrics.root_mean_squared_error)
                          << "\n";
                if (!opt.cfg.model_out_path.empty())
                    std::cout << "wrote " << opt.cfg.model_out_path << "\n";
            }
            return 0;
        }

        if (sweep_cmd->parsed()) {
            auto architectures = parse_architectures(opt.architectures);
            cli::run_sweep(opt.cfg, architectures, std::cout);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
