#include "dataprof/mlp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dataprof/common.hpp"
#include "dataprof/rng.hpp"

namespace dataprof::mlp {

namespace {

Error training_error(const std::string& message) { return Error(Stage::training, message); }

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// activations[k] holds the outputs of layer k; activations[0] is the
// input. Hidden layers are sigmoid, the single output unit is linear.
void forward_pass(const MlpModel& model, std::span<const double> input,
                  std::vector<std::vector<double>>& activations) {
    const auto& sizes = model.layer_sizes;
    activations.resize(sizes.size());
    activations[0].assign(input.begin(), input.end());
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        const std::size_t fan_in = sizes[k];
        const std::size_t fan_out = sizes[k + 1];
        const auto& w = model.weights[k];
        const auto& b = model.biases[k];
        const auto& prev = activations[k];
        auto& next = activations[k + 1];
        next.assign(fan_out, 0.0);
        for (std::size_t i = 0; i < fan_in; ++i) {
            const double a = prev[i];
            if (a == 0.0) continue;
            const double* row = &w[i * fan_out];
            for (std::size_t j = 0; j < fan_out; ++j) next[j] += a * row[j];
        }
        const bool output_layer = (k + 2 == sizes.size());
        for (std::size_t j = 0; j < fan_out; ++j) {
            double z = next[j] + b[j];
            next[j] = output_layer ? z : sigmoid(z);
        }
    }
}

struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    void match_shape(const MlpModel& model) {
        weights.resize(model.weights.size());
        biases.resize(model.biases.size());
        for (std::size_t k = 0; k < model.weights.size(); ++k) {
            weights[k].assign(model.weights[k].size(), 0.0);
            biases[k].assign(model.biases[k].size(), 0.0);
        }
    }
};

// Gradient of 0.5*(p - t)^2 w.r.t. every weight and bias, given the
// activations of a forward pass.
void backward_pass(const MlpModel& model, const std::vector<std::vector<double>>& activations,
                   double target, Gradients& grads) {
    const auto& sizes = model.layer_sizes;
    const std::size_t layers = sizes.size();

    std::vector<std::vector<double>> deltas(layers);
    deltas[layers - 1] = {activations[layers - 1][0] - target};

    for (std::size_t k = layers - 2; k >= 1; --k) {
        const std::size_t fan_out = sizes[k + 1];
        const auto& w = model.weights[k];
        const auto& next_delta = deltas[k + 1];
        auto& delta = deltas[k];
        delta.assign(sizes[k], 0.0);
        for (std::size_t i = 0; i < sizes[k]; ++i) {
            double sum = 0.0;
            const double* row = &w[i * fan_out];
            for (std::size_t j = 0; j < fan_out; ++j) sum += row[j] * next_delta[j];
            const double a = activations[k][i];
            delta[i] = sum * a * (1.0 - a);
        }
    }

    for (std::size_t k = 0; k + 1 < layers; ++k) {
        const std::size_t fan_out = sizes[k + 1];
        const auto& prev = activations[k];
        const auto& delta = deltas[k + 1];
        auto& gw = grads.weights[k];
        auto& gb = grads.biases[k];
        for (std::size_t i = 0; i < sizes[k]; ++i) {
            const double a = prev[i];
            double* row = &gw[i * fan_out];
            for (std::size_t j = 0; j < fan_out; ++j) row[j] = a * delta[j];
        }
        for (std::size_t j = 0; j < fan_out; ++j) gb[j] = delta[j];
    }
}

encode::ScalingParams neutral_scaling(std::size_t arity) {
    encode::ScalingParams params;
    params.features.assign(arity, {0.0, 1.0});
    params.target = {0.0, 1.0};
    return params;
}

std::string format_hex_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
    if (ec != std::errc()) throw training_error("model file: unencodable value");
    return std::string(buf, ptr);
}

double parse_hex_double(std::string_view text, std::size_t line_no) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::hex);
    if (ec != std::errc() || ptr != last)
        throw training_error("model file: bad float at line " + std::to_string(line_no));
    return v;
}

}  // namespace

void TrainConfig::validate() const {
    for (std::size_t size : hidden_sizes) {
        if (size == 0) throw Error(Stage::config, "hidden layer sizes must be positive");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw Error(Stage::config, "learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw Error(Stage::config, "momentum must be in [0, 1)");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error(Stage::config, "train_fraction must be in (0, 1)");
}

double MlpModel::predict(std::span<const double> raw_features) const {
    if (raw_features.size() != feature_arity())
        throw training_error("predict: feature arity mismatch");
    std::vector<double> scaled(raw_features.size());
    for (std::size_t f = 0; f < raw_features.size(); ++f)
        scaled[f] = encode::scale_value(raw_features[f], scaling.features[f]);
    double p = forward(*this, scaled);
    return encode::unscale_target(p, scaling);
}

std::pair<std::vector<encode::EncodedRow>, std::vector<encode::EncodedRow>> split(
    const std::vector<encode::EncodedRow>& rows, const TrainConfig& cfg) {
    cfg.validate();
    if (rows.empty()) throw training_error("split: no rows");

    std::vector<encode::EncodedRow> shuffled = rows;
    if (cfg.shuffle) {
        Rng rng(cfg.seed);
        rng.shuffle(shuffled);
    }
    const std::size_t n = shuffled.size();
    const std::size_t n_train =
        static_cast<std::size_t>(std::ceil(static_cast<double>(n) * cfg.train_fraction));
    if (n_train == 0 || n_train >= n)
        throw training_error("split: train fraction " + format_double(cfg.train_fraction) +
                             " leaves an empty train or test set for n=" + std::to_string(n));

    std::vector<encode::EncodedRow> train_rows(shuffled.begin(), shuffled.begin() + n_train);
    std::vector<encode::EncodedRow> test_rows(shuffled.begin() + n_train, shuffled.end());
    return {std::move(train_rows), std::move(test_rows)};
}

MlpModel init_model(std::size_t feature_arity, const TrainConfig& cfg) {
    if (feature_arity == 0) throw training_error("init_model: feature arity must be >= 1");
    cfg.validate();

    MlpModel model;
    model.layer_sizes.push_back(feature_arity);
    for (std::size_t size : cfg.hidden_sizes) model.layer_sizes.push_back(size);
    model.layer_sizes.push_back(1);

    Rng rng(cfg.seed);
    for (std::size_t k = 0; k + 1 < model.layer_sizes.size(); ++k) {
        const std::size_t fan_in = model.layer_sizes[k];
        const std::size_t fan_out = model.layer_sizes[k + 1];
        std::vector<double> w(fan_in * fan_out);
        for (double& value : w) value = rng.next_in(-0.5, 0.5);
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(fan_out, 0.0);
    }
    model.scaling = neutral_scaling(feature_arity);
    model.hyper = cfg;
    return model;
}

double forward(const MlpModel& model, std::span<const double> features) {
    if (model.layer_sizes.empty() || features.size() != model.layer_sizes.front())
        throw training_error("forward: feature arity mismatch");
    std::vector<std::vector<double>> activations;
    forward_pass(model, features, activations);
    return activations.back()[0];
}

TrainResult train(const std::vector<encode::EncodedRow>& rows, const TrainConfig& cfg) {
    cfg.validate();
    if (rows.size() < 2) throw training_error("train: need at least 2 rows");

    auto [train_rows, test_rows] = split(rows, cfg);
    auto scaling = encode::fit_scaling(train_rows);

    const std::size_t arity = train_rows.front().features.size();
    std::vector<std::vector<double>> inputs;
    std::vector<double> targets;
    inputs.reserve(train_rows.size());
    targets.reserve(train_rows.size());
    for (const auto& row : train_rows) {
        auto scaled = encode::apply_scaling(row, scaling);
        inputs.push_back(std::move(scaled.features));
        targets.push_back(scaled.target);
    }

    MlpModel model = init_model(arity, cfg);
    model.scaling = scaling;

    Gradients grads;
    grads.match_shape(model);
    Gradients velocity;
    velocity.match_shape(model);

    std::vector<std::vector<double>> activations;
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Distinct stream from the split/init draws.
    Rng order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t idx : order) {
            forward_pass(model, inputs[idx], activations);
            const double p = activations.back()[0];
            const double diff = p - targets[idx];
            epoch_loss += 0.5 * diff * diff;
            backward_pass(model, activations, targets[idx], grads);
            for (std::size_t k = 0; k < model.weights.size(); ++k) {
                auto& w = model.weights[k];
                auto& vw = velocity.weights[k];
                const auto& gw = grads.weights[k];
                for (std::size_t i = 0; i < w.size(); ++i) {
                    vw[i] = cfg.momentum * vw[i] - cfg.learning_rate * gw[i];
                    w[i] += vw[i];
                }
                auto& b = model.biases[k];
                auto& vb = velocity.biases[k];
                const auto& gb = grads.biases[k];
                for (std::size_t j = 0; j < b.size(); ++j) {
                    vb[j] = cfg.momentum * vb[j] - cfg.learning_rate * gb[j];
                    b[j] += vb[j];
                }
            }
        }
        if (!std::isfinite(epoch_loss))
            throw training_error("train: non-finite loss at epoch " + std::to_string(epoch + 1));
    }

    EvalMetrics metrics = evaluate(model, test_rows);
    return {std::move(model), metrics};
}

LossGradients loss_gradients(const MlpModel& model, std::span<const double> features,
                             double target) {
    if (model.layer_sizes.empty() || features.size() != model.layer_sizes.front())
        throw training_error("loss_gradients: feature arity mismatch");
    std::vector<std::vector<double>> activations;
    forward_pass(model, features, activations);
    Gradients grads;
    grads.match_shape(model);
    backward_pass(model, activations, target, grads);
    return {std::move(grads.weights), std::move(grads.biases)};
}

double gradient_check(const MlpModel& model, const encode::EncodedRow& sample, double h) {
    if (!(h > 0.0)) throw training_error("gradient_check: h must be > 0");

    std::vector<std::vector<double>> activations;
    forward_pass(model, sample.features, activations);
    Gradients analytic;
    analytic.match_shape(model);
    backward_pass(model, activations, sample.target, analytic);

    MlpModel probe = model;
    auto loss = [&]() {
        double p = forward(probe, sample.features);
        double diff = p - sample.target;
        return 0.5 * diff * diff;
    };

    double max_rel = 0.0;
    auto check = [&](double& param, double analytic_grad) {
        const double saved = param;
        param = saved + h;
        const double loss_plus = loss();
        param = saved - h;
        const double loss_minus = loss();
        param = saved;
        const double numeric = (loss_plus - loss_minus) / (2.0 * h);
        const double denom = std::max({std::fabs(analytic_grad), std::fabs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::fabs(analytic_grad - numeric) / denom);
    };

    for (std::size_t k = 0; k < probe.weights.size(); ++k) {
        for (std::size_t i = 0; i < probe.weights[k].size(); ++i)
            check(probe.weights[k][i], analytic.weights[k][i]);
        for (std::size_t j = 0; j < probe.biases[k].size(); ++j)
            check(probe.biases[k][j], analytic.biases[k][j]);
    }
    return max_rel;
}

EvalMetrics evaluate(const MlpModel& model, const std::vector<encode::EncodedRow>& test) {
    if (test.empty()) throw training_error("evaluate: empty test set");

    const std::size_t n = test.size();
    std::vector<double> preds(n), targs(n);
    for (std::size_t i = 0; i < n; ++i) {
        preds[i] = model.predict(test[i].features);
        targs[i] = test[i].target;
    }

    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = preds[i] - targs[i];
        abs_sum += std::fabs(d);
        sq_sum += d * d;
    }

    EvalMetrics metrics;
    metrics.n_test = n;
    metrics.mean_absolute_error = abs_sum / static_cast<double>(n);
    metrics.root_mean_squared_error = std::sqrt(sq_sum / static_cast<double>(n));

    const double mean_p = std::accumulate(preds.begin(), preds.end(), 0.0) / n;
    const double mean_t = std::accumulate(targs.begin(), targs.end(), 0.0) / n;
    double var_p = 0.0, var_t = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dp = preds[i] - mean_p;
        const double dt = targs[i] - mean_t;
        var_p += dp * dp;
        var_t += dt * dt;
        cov += dp * dt;
    }
    if (var_p > 0.0 && var_t > 0.0) metrics.correlation = cov / std::sqrt(var_p * var_t);
    return metrics;
}

std::vector<SweepRow> sweep(const std::vector<encode::EncodedRow>& rows,
                            const std::vector<std::vector<std::size_t>>& architectures,
                            const TrainConfig& cfg) {
    if (architectures.empty()) throw training_error("sweep: no architectures");
    std::vector<SweepRow> report;
    report.reserve(architectures.size());
    for (const auto& arch : architectures) {
        TrainConfig arch_cfg = cfg;
        arch_cfg.hidden_sizes = arch;
        SweepRow row;
        row.hidden_sizes = arch;
        try {
            row.metrics = train(rows, arch_cfg).metrics;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        report.push_back(std::move(row));
    }
    return report;
}

std::optional<std::size_t> best_sweep_row(const std::vector<SweepRow>& rows) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].metrics || !rows[i].metrics->correlation) continue;
        if (!best || *rows[i].metrics->correlation > *rows[*best].metrics->correlation) best = i;
    }
    return best;
}

const std::vector<std::vector<std::size_t>>& default_sweep_architectures() {
    static const std::vector<std::vector<std::size_t>> architectures = {
        {12, 18, 12},         {12, 18, 12, 10}, {12, 18, 12, 10, 10}, {12, 18, 12, 10, 8},
        {12, 18, 24, 10},     {12, 18, 24},     {12, 36, 24},         {12, 36, 24, 10},
        {24, 18, 12, 10},     {12, 18, 10, 10}, {12, 18, 16, 10},     {10, 18, 12, 10},
    };
    return architectures;
}

std::string hidden_sizes_to_string(const std::vector<std::size_t>& sizes) {
    std::string out;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (i > 0) out.push_back(',');
        out += std::to_string(sizes[i]);
    }
    return out;
}

std::optional<std::vector<std::size_t>> hidden_sizes_from_string(std::string_view text) {
    std::vector<std::size_t> sizes;
    std::string trimmed = trim_ascii(text);
    if (trimmed.empty() || trimmed == "none") return sizes;
    std::size_t pos = 0;
    while (pos <= trimmed.size()) {
        std::size_t comma = trimmed.find(',', pos);
        std::string part =
            trim_ascii(trimmed.substr(pos, comma == std::string::npos ? comma : comma - pos));
        if (part.empty()) return std::nullopt;
        std::size_t value = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
        if (ec != std::errc() || ptr != part.data() + part.size() || value == 0)
            return std::nullopt;
        sizes.push_back(value);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return sizes;
}

std::string model_to_text(const MlpModel& model) {
    std::ostringstream out;
    out << "# dataprof model " << kVersion << "\n";
    out << "layers";
    for (std::size_t size : model.layer_sizes) out << ' ' << size;
    out << "\n";
    out << "hidden " << hidden_sizes_to_string(model.hyper.hidden_sizes) << "\n";
    out << "learning_rate " << format_hex_double(model.hyper.learning_rate) << "\n";
    out << "momentum " << format_hex_double(model.hyper.momentum) << "\n";
    out << "epochs " << model.hyper.epochs << "\n";
    out << "train_fraction " << format_hex_double(model.hyper.train_fraction) << "\n";
    out << "seed " << model.hyper.seed << "\n";
    out << "shuffle " << (model.hyper.shuffle ? 1 : 0) << "\n";
    out << "feature_scales " << model.scaling.features.size() << "\n";
    for (const auto& scale : model.scaling.features)
        out << format_hex_double(scale.mean) << ' ' << format_hex_double(scale.stddev) << "\n";
    out << "target_scale " << format_hex_double(model.scaling.target.mean) << ' '
        << format_hex_double(model.scaling.target.stddev) << "\n";
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
        out << "weights " << k << ' ' << model.weights[k].size() << "\n";
        for (std::size_t i = 0; i < model.weights[k].size(); ++i) {
            if (i > 0) out << ' ';
            out << format_hex_double(model.weights[k][i]);
        }
        out << "\n";
        out << "biases " << k << ' ' << model.biases[k].size() << "\n";
        for (std::size_t j = 0; j < model.biases[k].size(); ++j) {
            if (j > 0) out << ' ';
            out << format_hex_double(model.biases[k][j]);
        }
        out << "\n";
    }
    out << "end\n";
    return out.str();
}

namespace {

class LineParser {
public:
    explicit LineParser(const std::string& text) : stream_(text) {}

    // Next non-comment line, split on spaces.
    std::vector<std::string> next(const std::string& expected_head) {
        std::string line;
        while (std::getline(stream_, line)) {
            ++line_no_;
            if (line.empty() || line[0] == '#') continue;
            std::vector<std::string> tokens;
            std::istringstream ls(line);
            std::string token;
            while (ls >> token) tokens.push_back(token);
            if (tokens.empty()) continue;
            if (!expected_head.empty() && tokens[0] != expected_head)
                throw training_error("model file: expected '" + expected_head + "' at line " +
                                     std::to_string(line_no_) + ", got '" + tokens[0] + "'");
            return tokens;
        }
        throw training_error("model file: unexpected end of file (wanted '" + expected_head +
                             "')");
    }

    std::size_t line_no() const { return line_no_; }

private:
    std::istringstream stream_;
    std::size_t line_no_ = 0;
};

std::size_t parse_size(const std::string& token, std::size_t line_no) {
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size())
        throw training_error("model file: bad integer at line " + std::to_string(line_no));
    return value;
}

}  // namespace

MlpModel model_from_text(const std::string& text) {
    LineParser parser(text);
    MlpModel model;

    auto layers = parser.next("layers");
    for (std::size_t i = 1; i < layers.size(); ++i)
        model.layer_sizes.push_back(parse_size(layers[i], parser.line_no()));
    if (model.layer_sizes.size() < 2 || model.layer_sizes.back() != 1)
        throw training_error("model file: bad layer list");

    auto hidden = parser.next("hidden");
    auto hidden_sizes = hidden_sizes_from_string(hidden.size() > 1 ? hidden[1] : "");
    if (!hidden_sizes) throw training_error("model file: bad hidden sizes");
    model.hyper.hidden_sizes = *hidden_sizes;

    model.hyper.learning_rate = parse_hex_double(parser.next("learning_rate").at(1), parser.line_no());
    model.hyper.momentum = parse_hex_double(parser.next("momentum").at(1), parser.line_no());
    model.hyper.epochs = parse_size(parser.next("epochs").at(1), parser.line_no());
    model.hyper.train_fraction =
        parse_hex_double(parser.next("train_fraction").at(1), parser.line_no());
    model.hyper.seed = parse_size(parser.next("seed").at(1), parser.line_no());
    model.hyper.shuffle = parse_size(parser.next("shuffle").at(1), parser.line_no()) != 0;

    auto scales = parser.next("feature_scales");
    const std::size_t n_scales = parse_size(scales.at(1), parser.line_no());
    for (std::size_t i = 0; i < n_scales; ++i) {
        auto tokens = parser.next("");
        if (tokens.size() != 2) throw training_error("model file: bad feature scale line");
        model.scaling.features.push_back({parse_hex_double(tokens[0], parser.line_no()),
                                          parse_hex_double(tokens[1], parser.line_no())});
    }
    auto target_scale = parser.next("target_scale");
    if (target_scale.size() != 3) throw training_error("model file: bad target scale line");
    model.scaling.target = {parse_hex_double(target_scale[1], parser.line_no()),
                            parse_hex_double(target_scale[2], parser.line_no())};

    for (std::size_t k = 0; k + 1 < model.layer_sizes.size(); ++k) {
        auto w_head = parser.next("weights");
        const std::size_t w_count = parse_size(w_head.at(2), parser.line_no());
        if (w_count != model.layer_sizes[k] * model.layer_sizes[k + 1])
            throw training_error("model file: weight count mismatch at layer " +
                                 std::to_string(k));
        auto w_values = parser.next("");
        if (w_values.size() != w_count)
            throw training_error("model file: expected " + std::to_string(w_count) +
                                 " weights at line " + std::to_string(parser.line_no()));
        std::vector<double> w(w_count);
        for (std::size_t i = 0; i < w_count; ++i)
            w[i] = parse_hex_double(w_values[i], parser.line_no());
        model.weights.push_back(std::move(w));

        auto b_head = parser.next("biases");
        const std::size_t b_count = parse_size(b_head.at(2), parser.line_no());
        if (b_count != model.layer_sizes[k + 1])
            throw training_error("model file: bias count mismatch at layer " + std::to_string(k));
        auto b_values = parser.next("");
        if (b_values.size() != b_count)
            throw training_error("model file: expected " + std::to_string(b_count) +
                                 " biases at line " + std::to_string(parser.line_no()));
        std::vector<double> b(b_count);
        for (std::size_t j = 0; j < b_count; ++j)
            b[j] = parse_hex_double(b_values[j], parser.line_no());
        model.biases.push_back(std::move(b));
    }
    parser.next("end");

    if (model.scaling.features.size() != model.layer_sizes.front())
        throw training_error("model file: scaling arity does not match input layer");
    return model;
}

void save_model(const MlpModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw training_error("cannot write model file '" + path + "'");
    out << model_to_text(model);
    if (!out) throw training_error("failed writing model file '" + path + "'");
}

MlpModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw training_error("cannot read model file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return model_from_text(buffer.str());
}

}  // namespace dataprof::mlp
