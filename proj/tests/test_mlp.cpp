#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "dataprof/common.hpp"
#include "dataprof/mlp.hpp"
#include "dataprof/rng.hpp"
#include "testutil.hpp"

using namespace dataprof::mlp;
using dataprof::Error;
using dataprof::Rng;
using dataprof::encode::EncodedRow;

namespace {

std::vector<EncodedRow> line_rows(std::size_t n, double slope, double intercept) {
    std::vector<EncodedRow> rows;
    for (std::size_t i = 0; i < n; ++i) {
        double x = static_cast<double>(i) / static_cast<double>(n - 1);
        rows.push_back({i, {x}, slope * x + intercept, {0}});
    }
    return rows;
}

// Layer-by-layer reference forward pass, written independently of the
// library implementation: explicit matrix-vector products.
double oracle_forward(const MlpModel& m, const std::vector<double>& input) {
    std::vector<double> act = input;
    for (std::size_t k = 0; k + 1 < m.layer_sizes.size(); ++k) {
        std::vector<double> next(m.layer_sizes[k + 1]);
        for (std::size_t j = 0; j < next.size(); ++j) {
            double z = m.biases[k][j];
            for (std::size_t i = 0; i < act.size(); ++i)
                z += act[i] * m.weights[k][i * next.size() + j];
            next[j] = (k + 2 == m.layer_sizes.size()) ? z : 1.0 / (1.0 + std::exp(-z));
        }
        act = next;
    }
    return act[0];
}

MlpModel random_model(Rng& rng, std::vector<std::size_t> layer_sizes) {
    TrainConfig cfg;
    cfg.hidden_sizes.assign(layer_sizes.begin() + 1, layer_sizes.end() - 1);
    cfg.seed = rng.next_u64();
    MlpModel m = init_model(layer_sizes.front(), cfg);
    // nonzero biases so the bias gradients are exercised away from zero
    for (auto& layer : m.biases)
        for (auto& b : layer) b = rng.next_in(-0.5, 0.5);
    return m;
}

}  // namespace

TEST_CASE("split honors the ceiling rule") {
    auto rows = line_rows(10, 1.0, 0.0);
    TrainConfig cfg;
    cfg.train_fraction = 0.66;
    auto [train_rows, test_rows] = split(rows, cfg);
    CHECK(train_rows.size() == 7);
    CHECK(test_rows.size() == 3);
}

TEST_CASE("split is deterministic per seed and partitions the input") {
    auto rows = line_rows(20, 1.0, 0.0);
    TrainConfig cfg;
    cfg.seed = 11;
    auto first = split(rows, cfg);
    auto second = split(rows, cfg);
    REQUIRE(first.first.size() == second.first.size());
    for (std::size_t i = 0; i < first.first.size(); ++i)
        CHECK(first.first[i].row_id == second.first[i].row_id);

    std::set<std::size_t> ids;
    for (const auto& r : first.first) ids.insert(r.row_id);
    for (const auto& r : first.second) ids.insert(r.row_id);
    CHECK(ids.size() == rows.size());
}

TEST_CASE("degenerate splits are rejected") {
    std::vector<EncodedRow> rows = {{0, {1.0}, 2.0, {1}}};
    TrainConfig cfg;
    CHECK_THROWS_AS(split(rows, cfg), Error);
    CHECK_THROWS_AS(split({}, cfg), Error);
}

TEST_CASE("init_model builds the chained shapes") {
    TrainConfig cfg;
    cfg.hidden_sizes = {12, 18, 12, 10};
    auto m = init_model(10, cfg);
    CHECK(m.layer_sizes == std::vector<std::size_t>{10, 12, 18, 12, 10, 1});
    REQUIRE(m.weights.size() == 5);
    CHECK(m.weights[0].size() == 10 * 12);
    CHECK(m.weights[1].size() == 12 * 18);
    CHECK(m.weights[2].size() == 18 * 12);
    CHECK(m.weights[3].size() == 12 * 10);
    CHECK(m.weights[4].size() == 10 * 1);
    for (std::size_t k = 0; k < m.weights.size(); ++k) {
        for (double w : m.weights[k]) {
            CHECK(w >= -0.5);
            CHECK(w <= 0.5);
        }
        for (double b : m.biases[k]) CHECK(b == 0.0);
    }
}

TEST_CASE("no hidden layers degenerates to a single linear map") {
    TrainConfig cfg;
    cfg.hidden_sizes = {};
    auto m = init_model(10, cfg);
    CHECK(m.layer_sizes == std::vector<std::size_t>{10, 1});
    REQUIRE(m.weights.size() == 1);
    CHECK(m.weights[0].size() == 10);
}

TEST_CASE("same seed gives bit-identical weights") {
    TrainConfig cfg;
    cfg.seed = 123;
    auto a = init_model(4, cfg);
    auto b = init_model(4, cfg);
    CHECK(a.weights == b.weights);
}

TEST_CASE("zero weights and biases forward to zero") {
    TrainConfig cfg;
    cfg.hidden_sizes = {3};
    auto m = init_model(2, cfg);
    for (auto& layer : m.weights) layer.assign(layer.size(), 0.0);
    std::vector<double> input{1.5, -2.5};
    CHECK(forward(m, input) == 0.0);
}

TEST_CASE("a 1x1 linear model is an affine map") {
    TrainConfig cfg;
    cfg.hidden_sizes = {};
    auto m = init_model(1, cfg);
    m.weights[0] = {2.5};
    m.biases[0] = {-1.0};
    std::vector<double> input{3.0};
    CHECK(forward(m, input) == doctest::Approx(2.5 * 3.0 - 1.0));
}

TEST_CASE("forward matches the layer-by-layer oracle") {
    Rng rng(31);
    for (int iter = 0; iter < 25; ++iter) {
        std::vector<std::size_t> sizes{1 + rng.next_below(5)};
        const std::size_t hidden_count = rng.next_below(3);
        for (std::size_t i = 0; i < hidden_count; ++i) sizes.push_back(1 + rng.next_below(7));
        sizes.push_back(1);
        auto m = random_model(rng, sizes);
        std::vector<double> input(sizes.front());
        for (auto& x : input) x = rng.next_in(-2, 2);
        CHECK(forward(m, input) == doctest::Approx(oracle_forward(m, input)).epsilon(1e-12));
    }
}

TEST_CASE("forward rejects arity mismatches") {
    TrainConfig cfg;
    auto m = init_model(3, cfg);
    std::vector<double> wrong{1.0, 2.0};
    CHECK_THROWS_AS(forward(m, wrong), Error);
}

TEST_CASE("analytic gradients match central differences on random networks") {
    Rng rng(77);
    double worst = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<std::size_t> sizes{1 + rng.next_below(5)};
        const std::size_t hidden_count = rng.next_below(3);
        for (std::size_t i = 0; i < hidden_count; ++i) sizes.push_back(1 + rng.next_below(7));
        sizes.push_back(1);
        auto m = random_model(rng, sizes);
        EncodedRow sample;
        sample.features.resize(sizes.front());
        for (auto& x : sample.features) x = rng.next_in(-2, 2);
        sample.target = rng.next_in(-2, 2);
        worst = std::max(worst, gradient_check(m, sample, 1e-5));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("a linear model's gradient check is near machine precision") {
    Rng rng(3);
    auto m = random_model(rng, {3, 1});
    EncodedRow sample{0, {0.5, -1.0, 2.0}, 0.7, {}};
    CHECK(gradient_check(m, sample, 1e-5) < 1e-9);
}

TEST_CASE("zero network at a zero sample sits at a stationary point") {
    TrainConfig cfg;
    cfg.hidden_sizes = {2};
    auto m = init_model(2, cfg);
    for (auto& layer : m.weights) layer.assign(layer.size(), 0.0);
    EncodedRow sample{0, {0.0, 0.0}, 0.0, {}};
    CHECK(gradient_check(m, sample, 1e-5) == 0.0);
}

TEST_CASE("one epoch of momentum-free SGD moves by exactly -lr * analytic gradient") {
    // Three rows, no split shuffle, fraction 0.6: the first two rows train
    // and the third is held out. One epoch visits the two training rows in
    // one of two possible orders; emulating both with loss_gradients must
    // reproduce train()'s weights exactly.
    std::vector<EncodedRow> rows = {{0, {0.2, -1.0}, 3.0, {}},
                                    {1, {1.4, 0.5}, -2.0, {}},
                                    {2, {-0.7, 0.9}, 1.0, {}}};
    TrainConfig cfg;
    cfg.hidden_sizes = {3};
    cfg.momentum = 0.0;
    cfg.learning_rate = 0.25;
    cfg.epochs = 1;
    cfg.train_fraction = 0.6;
    cfg.shuffle = false;
    cfg.seed = 5;

    auto result = train(rows, cfg);

    auto scaling = dataprof::encode::fit_scaling({rows[0], rows[1]});
    auto step = [&](MlpModel m, std::initializer_list<std::size_t> order) {
        for (std::size_t idx : order) {
            auto scaled = dataprof::encode::apply_scaling(rows[idx], scaling);
            auto grads = loss_gradients(m, scaled.features, scaled.target);
            for (std::size_t k = 0; k < m.weights.size(); ++k) {
                for (std::size_t i = 0; i < m.weights[k].size(); ++i)
                    m.weights[k][i] += 0.0 - cfg.learning_rate * grads.weights[k][i];
                for (std::size_t j = 0; j < m.biases[k].size(); ++j)
                    m.biases[k][j] += 0.0 - cfg.learning_rate * grads.biases[k][j];
            }
        }
        return m;
    };

    MlpModel init = init_model(2, cfg);
    init.scaling = scaling;
    auto forward_order = step(init, {0, 1});
    auto reverse_order = step(init, {1, 0});

    const bool matches_forward = forward_order.weights == result.model.weights &&
                                 forward_order.biases == result.model.biases;
    const bool matches_reverse = reverse_order.weights == result.model.weights &&
                                 reverse_order.biases == result.model.biases;
    CHECK((matches_forward || matches_reverse));
}

TEST_CASE("training recovers y = 3x + 1") {
    auto rows = line_rows(200, 3.0, 1.0);
    TrainConfig cfg;
    cfg.hidden_sizes = {8};
    cfg.epochs = 500;

    auto result = train(rows, cfg);

    double mean = 0.0;
    for (const auto& r : rows) mean += r.target;
    mean /= static_cast<double>(rows.size());
    double var = 0.0;
    for (const auto& r : rows) var += (r.target - mean) * (r.target - mean);
    const double stddev = std::sqrt(var / static_cast<double>(rows.size()));

    CHECK(result.metrics.root_mean_squared_error < 0.05 * stddev);
    REQUIRE(result.metrics.correlation.has_value());
    CHECK(*result.metrics.correlation > 0.99);
}

TEST_CASE("zero epochs returns the initialized network with metrics") {
    auto rows = line_rows(10, 2.0, 0.0);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.hidden_sizes = {4};

    auto result = train(rows, cfg);
    auto reference = init_model(1, cfg);
    CHECK(result.model.weights == reference.weights);
    CHECK(result.model.biases == reference.biases);
    CHECK(result.metrics.n_test == 10 - 7);
}

TEST_CASE("training is deterministic") {
    auto rows = line_rows(60, -2.0, 5.0);
    TrainConfig cfg;
    cfg.hidden_sizes = {5};
    cfg.epochs = 40;
    cfg.seed = 4242;

    auto first = train(rows, cfg);
    auto second = train(rows, cfg);
    CHECK(first.model.weights == second.model.weights);
    CHECK(first.model.biases == second.model.biases);
    CHECK(first.metrics.mean_absolute_error == second.metrics.mean_absolute_error);
    CHECK(first.metrics.root_mean_squared_error == second.metrics.root_mean_squared_error);
    CHECK(first.metrics.correlation == second.metrics.correlation);
}

TEST_CASE("perfect predictions score r=1 and zero errors") {
    TrainConfig cfg;
    cfg.hidden_sizes = {};
    auto m = init_model(1, cfg);
    m.weights[0] = {1.0};
    m.biases[0] = {0.0};
    std::vector<EncodedRow> test;
    for (std::size_t i = 0; i < 5; ++i)
        test.push_back({i, {static_cast<double>(i)}, static_cast<double>(i), {0}});
    auto metrics = evaluate(m, test);
    REQUIRE(metrics.correlation.has_value());
    CHECK(*metrics.correlation == doctest::Approx(1.0));
    CHECK(metrics.mean_absolute_error == doctest::Approx(0.0));
    CHECK(metrics.root_mean_squared_error == doctest::Approx(0.0));
}

TEST_CASE("a hand-computed three-point evaluation") {
    // predictions [1,2,4] against targets [1,2,3]
    TrainConfig cfg;
    cfg.hidden_sizes = {};
    auto m = init_model(1, cfg);
    m.weights[0] = {1.0};
    m.biases[0] = {0.0};
    std::vector<EncodedRow> test = {{0, {1.0}, 1.0, {0}}, {1, {2.0}, 2.0, {0}},
                                    {2, {4.0}, 3.0, {0}}};
    auto metrics = evaluate(m, test);
    CHECK(metrics.mean_absolute_error == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(metrics.root_mean_squared_error ==
          doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-12));
    REQUIRE(metrics.correlation.has_value());
    // r for p=(1,2,4), t=(1,2,3): centered sums give 3 / sqrt((14/3) * 2)
    CHECK(*metrics.correlation ==
          doctest::Approx(3.0 / std::sqrt((14.0 / 3.0) * 2.0)).epsilon(1e-12));
    CHECK(*metrics.correlation == doctest::Approx(0.9820).epsilon(1e-4));
}

TEST_CASE("constant predictions leave the correlation undefined") {
    TrainConfig cfg;
    cfg.hidden_sizes = {};
    auto m = init_model(1, cfg);
    m.weights[0] = {0.0};
    m.biases[0] = {7.0};
    std::vector<EncodedRow> test = {{0, {1.0}, 1.0, {0}}, {1, {2.0}, 2.0, {0}},
                                    {2, {3.0}, 9.0, {0}}};
    auto metrics = evaluate(m, test);
    CHECK_FALSE(metrics.correlation.has_value());
    CHECK(std::isfinite(metrics.mean_absolute_error));
    CHECK(std::isfinite(metrics.root_mean_squared_error));
}

TEST_CASE("rmse is never below mae on random evaluations") {
    Rng rng(17);
    TrainConfig cfg;
    cfg.hidden_sizes = {3};
    for (int iter = 0; iter < 50; ++iter) {
        cfg.seed = rng.next_u64();
        auto m = init_model(2, cfg);
        std::vector<EncodedRow> test;
        const std::size_t n = 1 + rng.next_below(30);
        for (std::size_t i = 0; i < n; ++i)
            test.push_back({i, {rng.next_in(-2, 2), rng.next_in(-2, 2)}, rng.next_in(-3, 3), {}});
        auto metrics = evaluate(m, test);
        CHECK(metrics.root_mean_squared_error >= metrics.mean_absolute_error);
    }
}

TEST_CASE("scaled-space training equals original-unit evaluation") {
    // MAE/RMSE in original units must equal sigma_target times the
    // scaled-space values: p - t = sigma * (p_s - t_s).
    auto rows = line_rows(50, 4.0, -2.0);
    TrainConfig cfg;
    cfg.hidden_sizes = {4};
    cfg.epochs = 30;
    auto result = train(rows, cfg);

    auto [train_rows, test_rows] = split(rows, cfg);
    const auto& scaling = result.model.scaling;
    double abs_sum = 0.0, sq_sum = 0.0;
    for (const auto& row : test_rows) {
        auto scaled = dataprof::encode::apply_scaling(row, scaling);
        double p_scaled = forward(result.model, scaled.features);
        double diff_scaled = p_scaled - scaled.target;
        abs_sum += std::fabs(diff_scaled);
        sq_sum += diff_scaled * diff_scaled;
    }
    const double n = static_cast<double>(test_rows.size());
    const double sigma = scaling.target.stddev;
    CHECK(result.metrics.mean_absolute_error ==
          doctest::Approx(sigma * abs_sum / n).epsilon(1e-9));
    CHECK(result.metrics.root_mean_squared_error ==
          doctest::Approx(sigma * std::sqrt(sq_sum / n)).epsilon(1e-9));
}

TEST_CASE("models round-trip bit-exactly through their file form") {
    auto rows = line_rows(30, 1.5, 0.5);
    TrainConfig cfg;
    cfg.hidden_sizes = {3, 2};
    cfg.epochs = 15;
    auto result = train(rows, cfg);

    testutil::TempDir dir("model");
    save_model(result.model, dir.file("m.model"));
    auto loaded = load_model(dir.file("m.model"));

    CHECK(loaded.layer_sizes == result.model.layer_sizes);
    CHECK(loaded.weights == result.model.weights);
    CHECK(loaded.biases == result.model.biases);
    CHECK(loaded.hyper == result.model.hyper);
    CHECK(loaded.scaling.target.mean == result.model.scaling.target.mean);
    CHECK(loaded.scaling.target.stddev == result.model.scaling.target.stddev);
    for (std::size_t i = 0; i < loaded.scaling.features.size(); ++i) {
        CHECK(loaded.scaling.features[i].mean == result.model.scaling.features[i].mean);
        CHECK(loaded.scaling.features[i].stddev == result.model.scaling.features[i].stddev);
    }
    // saved twice, the bytes are identical
    save_model(loaded, dir.file("m2.model"));
    CHECK(testutil::read_file(dir.file("m.model")) == testutil::read_file(dir.file("m2.model")));
}

TEST_CASE("sweep trains each architecture and keeps failures in-row") {
    auto rows = line_rows(40, 1.0, 0.0);
    TrainConfig cfg;
    cfg.epochs = 10;

    auto report = sweep(rows, {{4}, {2, 2}}, cfg);
    REQUIRE(report.size() == 2);
    CHECK(report[0].metrics.has_value());
    CHECK(report[1].metrics.has_value());

    auto twice = sweep(rows, {{4}, {4}}, cfg);
    REQUIRE(twice.size() == 2);
    CHECK(twice[0].metrics->mean_absolute_error == twice[1].metrics->mean_absolute_error);
    CHECK(twice[0].metrics->root_mean_squared_error ==
          twice[1].metrics->root_mean_squared_error);
}

TEST_CASE("best_sweep_row ignores undefined correlations") {
    std::vector<SweepRow> rows(3);
    rows[0].metrics = EvalMetrics{0.4, 1.0, 2.0, 5};
    rows[1].metrics = EvalMetrics{std::nullopt, 0.5, 0.6, 5};
    rows[2].metrics = EvalMetrics{0.9, 3.0, 4.0, 5};
    CHECK(best_sweep_row(rows) == 2);
    rows[2].metrics->correlation = std::nullopt;
    CHECK(best_sweep_row(rows) == 0);
}

TEST_CASE("the default sweep covers twelve architectures") {
    CHECK(default_sweep_architectures().size() == 12);
    CHECK(default_sweep_architectures()[1] == std::vector<std::size_t>{12, 18, 12, 10});
}

TEST_CASE("hidden size lists round-trip through text") {
    CHECK(hidden_sizes_to_string({12, 18, 12, 10}) == "12,18,12,10");
    CHECK(hidden_sizes_from_string("12,18,12,10") ==
          std::vector<std::size_t>{12, 18, 12, 10});
    CHECK(hidden_sizes_from_string("") == std::vector<std::size_t>{});
    CHECK_FALSE(hidden_sizes_from_string("12,,18").has_value());
    CHECK_FALSE(hidden_sizes_from_string("12,x").has_value());
    CHECK_FALSE(hidden_sizes_from_string("0").has_value());
}
