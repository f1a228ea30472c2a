#include "ccc/errors.hpp"
#include "ccc/forecaster.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace ccc;

namespace {

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        out(i++) = x;
    return out;
}

// One region and type, M = 1, with P carrying the weight history.
ModelState scalar_state(const std::vector<double>& w) {
    ModelState s = ModelState::zeros(1, w.size(), 1, 1, 0);
    for (std::size_t t = 0; t < w.size(); ++t)
        s.P[0](0, static_cast<Eigen::Index>(t)) = w[t];
    return s;
}

} // namespace

TEST_CASE("combine_weights examples") {
    const std::vector<VectorXd> equal = {vec({2, 0}), vec({0, 2})};
    const VectorXd a = combine_weights(equal, 1.0);
    CHECK(a(0) == doctest::Approx(1.0));
    CHECK(a(1) == doctest::Approx(1.0));

    const std::vector<VectorXd> decay = {vec({4}), vec({1})};
    CHECK(combine_weights(decay, 2.0)(0) == doctest::Approx(3.0));

    const VectorXd sharp = combine_weights(decay, 1e6);
    CHECK(std::abs(sharp(0) - 4.0) < 1e-5);

    CHECK_THROWS_AS(combine_weights(std::vector<VectorXd>{}, 2.0), DimensionError);
    CHECK_THROWS_AS(combine_weights(decay, 0.5), ConfigError);

    const VectorXd c = combine_coefficients(4, 3.0);
    CHECK(c.sum() == doctest::Approx(1.0));
    CHECK(c(0) / c(1) == doctest::Approx(3.0));
}

TEST_CASE("minimize_sigma finds interior and boundary minima") {
    const SigmaSearch search;
    const SigmaEstimate interior = minimize_sigma([](double s) { return (s - 3.7) * (s - 3.7); }, search);
    CHECK(std::abs(interior.sigma - 3.7) < 1e-3);
    const SigmaEstimate upper = minimize_sigma([](double s) { return -s; }, search);
    CHECK(upper.sigma == doctest::Approx(10.0).epsilon(1e-3));
    CHECK(minimize_sigma([](double s) { return s; }, search).sigma == 1.0);
    CHECK(minimize_sigma([](double) { return 5.0; }, search).sigma == 1.0);
}

TEST_CASE("estimate_sigma tie rules") {
    std::mt19937 rng(1);
    std::normal_distribution<double> normal;
    const MatrixXd x = MatrixXd::NullaryExpr(8, 2, [&] { return normal(rng); });
    const VectorXd y = VectorXd::NullaryExpr(8, [&] { return normal(rng); });

    MatrixXd constant(2, 8);
    constant.colwise() = vec({0.5, -1.0});
    CHECK(estimate_sigma(constant, x, y, 3).sigma == 1.0);

    const MatrixXd varying = MatrixXd::NullaryExpr(2, 8, [&] { return normal(rng); });
    CHECK(estimate_sigma(varying, x, y, 1).sigma == 1.0);

    CHECK_THROWS_AS(estimate_sigma(varying, x, y, 8), DimensionError);
    CHECK_THROWS_AS(estimate_sigma(varying, x, y, 0), DimensionError);
}

TEST_CASE("estimate_sigma recovers a planted decay") {
    // weights follow the sigma = 2.5 recursion exactly
    std::mt19937 rng(5);
    std::normal_distribution<double> normal;
    const std::size_t T = 20, M = 3, G = 2;
    MatrixXd w(M, T);
    w.leftCols(G) = MatrixXd::NullaryExpr(M, G, [&] { return normal(rng); });
    for (std::size_t t = G; t < T; ++t) {
        std::vector<VectorXd> history;
        for (std::size_t dt = 1; dt <= G; ++dt)
            history.emplace_back(w.col(static_cast<Eigen::Index>(t - dt)));
        w.col(static_cast<Eigen::Index>(t)) = combine_weights(history, 2.5);
        // occasional shocks keep the series from settling
        if (t % 5 == 0)
            w.col(static_cast<Eigen::Index>(t)) += VectorXd::NullaryExpr(M, [&] { return normal(rng); });
    }
    const MatrixXd x = MatrixXd::NullaryExpr(T, M, [&] { return normal(rng); });
    VectorXd y(T);
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<VectorXd> history;
        for (std::size_t dt = 1; dt <= G && dt <= t; ++dt)
            history.emplace_back(w.col(static_cast<Eigen::Index>(t - dt)));
        y(static_cast<Eigen::Index>(t)) =
            t < G ? 0.0 : x.row(static_cast<Eigen::Index>(t)).dot(combine_weights(history, 2.5));
    }
    const SigmaEstimate est = estimate_sigma(w, x, y, G);
    CHECK(std::abs(est.sigma - 2.5) < 2e-3);
    CHECK(est.loss < 1e-8);
}

TEST_CASE("predict examples") {
    const ModelState s = scalar_state({1, 1, 1, 1, 4});
    ForecastTable table;
    table.sigma = MatrixXd::Constant(1, 1, 2.0);
    table.fit_loss = MatrixXd::Zero(1, 1);
    table.history = 2;
    CHECK(predict(s, table, MatrixXd::Constant(1, 1, 1.0))(0, 0) == doctest::Approx(3.0));
    CHECK(predict(s, table, MatrixXd::Zero(1, 1))(0, 0) == 0.0);
    CHECK(predict(s, table, MatrixXd::Constant(1, 1, -1.0), true)(0, 0) == 0.0);

    table.history = 1;
    CHECK(predict(s, table, MatrixXd::Constant(1, 1, 2.0))(0, 0) == doctest::Approx(8.0));

    table.history = 6;
    CHECK_THROWS_AS(predict(s, table, MatrixXd::Constant(1, 1, 1.0)), DimensionError);
    table.history = 2;
    CHECK_THROWS_AS(predict(s, table, MatrixXd::Constant(2, 1, 1.0)), DimensionError);
}

TEST_CASE("predict sums shared and type-specific weights") {
    ModelState s = ModelState::zeros(2, 3, 2, 2, 2);
    s.P[1].col(2) << 1.0, 2.0;
    s.q(1, 1).col(2) << 0.5, -1.0;
    ForecastTable table;
    table.sigma = MatrixXd::Constant(2, 2, 1.0);
    table.fit_loss = MatrixXd::Zero(2, 2);
    table.history = 1;
    MatrixXd x(2, 2);
    x << 0, 0, 1, 1;
    const MatrixXd y = predict(s, table, x);
    CHECK(y(1, 0) == doctest::Approx(3.0));
    CHECK(y(1, 1) == doctest::Approx(2.5));
    CHECK(y(0, 0) == 0.0);
}

TEST_CASE("naive baselines") {
    const std::vector<double> c = {4.0, 4.0, 4.0};
    CHECK(historical_mean_forecast(c) == 4.0);
    CHECK(last_value_forecast(c) == 4.0);
    const std::vector<double> pair = {1.0, 3.0};
    CHECK(historical_mean_forecast(pair) == 2.0);
    CHECK_THROWS_AS(historical_mean_forecast(std::vector<double>{}), DimensionError);

    CrimeTensor ramp(1, 10, 1);
    for (std::size_t t = 0; t < 10; ++t)
        ramp(0, t, 0) = static_cast<double>(t + 1);
    const BaselineForecasts b = naive_baselines(ramp, 3, 1);
    CHECK(b.origins.size() == 7);
    for (std::size_t i = 0; i < b.origins.size(); ++i) {
        const double target = ramp(0, b.origins[i] + 1, 0);
        CHECK(target - b.last_value[i](0, 0) == 1.0);
        CHECK(target - b.historical_mean[i](0, 0) == 2.0);
    }
    CHECK(naive_baselines(ramp, 3, 2).origins.size() == 6);
}

TEST_CASE("default forecast window") {
    CHECK(default_history(20) == 7);
    CHECK(default_history(7) == 6);
    CHECK(default_history(2) == 1);
}

TEST_CASE("sigma search matches a dense grid on random instances") {
    std::mt19937 rng(21);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 10; ++trial) {
        const MatrixXd w = MatrixXd::NullaryExpr(3, 12, [&] { return normal(rng); });
        const MatrixXd x = MatrixXd::NullaryExpr(12, 3, [&] { return normal(rng); });
        const VectorXd y = VectorXd::NullaryExpr(12, [&] { return normal(rng); });
        const SigmaSearch search;
        const SigmaEstimate est = estimate_sigma(w, x, y, 4, search);
        double dense = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 1000; ++i)
            dense = std::min(dense, sigma_loss(w, x, y, 4, 1.0 + (search.sigma_max - 1.0) * i / 999.0));
        CHECK(est.loss <= dense + 1e-6);
        CHECK(est.loss == sigma_loss(w, x, y, 4, est.sigma));
    }
}

TEST_CASE("predict is linear in the future features") {
    std::mt19937 rng(2);
    std::normal_distribution<double> normal;
    ModelState s = ModelState::zeros(3, 4, 2, 2, 6);
    for (auto* blocks : {&s.P, &s.Q})
        for (auto& m : *blocks)
            m = MatrixXd::NullaryExpr(m.rows(), m.cols(), [&] { return normal(rng); });
    ForecastTable table;
    table.sigma = (MatrixXd(3, 2) << 1, 2, 3, 4, 5, 6).finished();
    table.fit_loss = MatrixXd::Zero(3, 2);
    table.history = 3;
    const MatrixXd a = MatrixXd::NullaryExpr(3, 2, [&] { return normal(rng); });
    const MatrixXd b = MatrixXd::NullaryExpr(3, 2, [&] { return normal(rng); });
    const MatrixXd combined = predict(s, table, 2.0 * a - 0.5 * b);
    CHECK((combined - (2.0 * predict(s, table, a) - 0.5 * predict(s, table, b))).norm() < 1e-12);
}
