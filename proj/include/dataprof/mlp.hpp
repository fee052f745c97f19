#ifndef DATAPROF_MLP_HPP
#define DATAPROF_MLP_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dataprof/encode.hpp"

namespace dataprof::mlp {

struct TrainConfig {
    std::vector<std::size_t> hidden_sizes{12, 18, 12, 10};
    double learning_rate = 0.3;
    double momentum = 0.2;
    std::size_t epochs = 500;
    double train_fraction = 0.66;
    std::uint64_t seed = 42;
    bool shuffle = true;

    void validate() const;  // throws Error(config) on out-of-range fields
    bool operator==(const TrainConfig&) const = default;
};

struct EvalMetrics {
    // Pearson r between predictions and targets; nullopt when either
    // sequence has zero variance.
    std::optional<double> correlation;
    double mean_absolute_error = 0.0;
    double root_mean_squared_error = 0.0;
    std::size_t n_test = 0;
};

// Feed-forward regressor: logistic sigmoid hidden layers, linear output.
// Weight matrix k is fan_in x fan_out between layer k and k+1, stored
// row-major. The model operates in z-scored space; `predict` applies the
// stored scaling on the way in and inverts it on the way out.
struct MlpModel {
    std::vector<std::size_t> layer_sizes;        // inputs, hidden..., 1
    std::vector<std::vector<double>> weights;    // [layer][fan_in * fan_out]
    std::vector<std::vector<double>> biases;     // [layer][fan_out]
    encode::ScalingParams scaling;
    TrainConfig hyper;

    std::size_t feature_arity() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }

    // Prediction in original units from unscaled features.
    double predict(std::span<const double> raw_features) const;
};

// Deterministic split: seeded shuffle when cfg.shuffle, then the first
// ceil(n * train_fraction) rows train, the remainder test. Throws
// Error(training) when either side ends up empty.
std::pair<std::vector<encode::EncodedRow>, std::vector<encode::EncodedRow>> split(
    const std::vector<encode::EncodedRow>& rows, const TrainConfig& cfg);

// Weights uniform in [-0.5, 0.5] from the seeded generator, biases zero.
MlpModel init_model(std::size_t feature_arity, const TrainConfig& cfg);

// Scaled-space forward pass. Throws Error(training) on arity mismatch.
double forward(const MlpModel& model, std::span<const double> features);

struct TrainResult {
    MlpModel model;
    EvalMetrics metrics;  // on the test split, original units
};

// Fits scaling on the train split, then runs per-sample stochastic
// gradient descent with momentum on the loss 0.5*(p - t)^2 in scaled
// space, visiting samples in seeded-shuffled order each epoch. Throws
// Error(training) if the split fails or the loss goes non-finite.
TrainResult train(const std::vector<encode::EncodedRow>& rows, const TrainConfig& cfg);

// Analytic gradient of the per-sample loss 0.5*(forward(x) - t)^2 with
// respect to every weight and bias; the quantity online SGD descends.
struct LossGradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};
LossGradients loss_gradients(const MlpModel& model, std::span<const double> features,
                             double target);

// Maximum relative discrepancy between the analytic gradient of
// 0.5*(forward(x) - t)^2 and central finite differences with step h,
// over every weight and bias. The sample's features/target are taken as
// direct scaled-space values. Denominator max(|analytic|, |numeric|, 1e-8).
double gradient_check(const MlpModel& model, const encode::EncodedRow& sample, double h);

// Metrics in original units over a nonempty test set.
EvalMetrics evaluate(const MlpModel& model, const std::vector<encode::EncodedRow>& test);

struct SweepRow {
    std::vector<std::size_t> hidden_sizes;
    std::optional<EvalMetrics> metrics;  // nullopt when training failed
    std::string error;
};

// Trains one model per architecture with an identical seed and split.
// Per-architecture failures are recorded in the row, not propagated.
std::vector<SweepRow> sweep(const std::vector<encode::EncodedRow>& rows,
                            const std::vector<std::vector<std::size_t>>& architectures,
                            const TrainConfig& cfg);

// Index of the row with the highest correlation coefficient; rows with
// undefined r sort last. nullopt when no row has a defined r.
std::optional<std::size_t> best_sweep_row(const std::vector<SweepRow>& rows);

// The twelve hidden-layer layouts exercised by the default sweep.
const std::vector<std::vector<std::size_t>>& default_sweep_architectures();

// Flat text model file; weights and biases are hex floats so the
// round-trip is bit-exact.
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);
std::string model_to_text(const MlpModel& model);
MlpModel model_from_text(const std::string& text);

std::string hidden_sizes_to_string(const std::vector<std::size_t>& sizes);
std::optional<std::vector<std::size_t>> hidden_sizes_from_string(std::string_view text);

}  // namespace dataprof::mlp

#endif
