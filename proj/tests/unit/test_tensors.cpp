#include "ccc/errors.hpp"
#include "ccc/tensors.hpp"

#include <doctest.h>

#include <random>

using namespace ccc;

namespace {

MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal;
    return MatrixXd::NullaryExpr(rows, cols, [&] { return normal(rng); });
}

} // namespace

TEST_CASE("temporal operator layout") {
    const auto a = build_temporal_operator(3, 2.0).dense();
    CHECK(a.rows() == 3);
    CHECK(a.cols() == 2);
    MatrixXd expected(3, 2);
    expected << 2, 0, -2, 2, 0, -2;
    CHECK(a == expected);

    const auto single = build_temporal_operator(2, 1.0).dense();
    CHECK(single.cols() == 1);
    CHECK(single(0, 0) == 1.0);
    CHECK(single(1, 0) == -1.0);

    const auto zero = build_temporal_operator(5, 0.0);
    CHECK(zero.dense().rows() == 5);
    CHECK(zero.dense().cols() == 4);
    CHECK(zero.dense().isZero());

    CHECK_THROWS_AS(build_temporal_operator(1, 1.0), DimensionError);
}

TEST_CASE("temporal operator differences consecutive columns") {
    const auto a = build_temporal_operator(6, 1.5);
    CHECK(a.nonzeros() == 10);
    const MatrixXd w = random_matrix(4, 6, 1);
    const MatrixXd wa = a.apply(w);
    REQUIRE(wa.cols() == 5);
    for (Eigen::Index t = 0; t < 5; ++t)
        CHECK((wa.col(t) - 1.5 * (w.col(t) - w.col(t + 1))).norm() < 1e-12);
    CHECK((wa - w * a.dense()).norm() < 1e-12);
}

TEST_CASE("spatial operator on two regions") {
    const RegionGrid grid({Eigen::Vector2d(0, 0), Eigen::Vector2d(2, 0)});
    const auto b = build_spatial_operator(grid, 1.0);
    const MatrixXd d = b.dense();
    REQUIRE(d.rows() == 2);
    REQUIRE(d.cols() == 4);
    CHECK(d.col(0).isZero());
    CHECK(d.col(3).isZero());
    CHECK(d(0, 1) == doctest::Approx(0.5));
    CHECK(d(1, 1) == doctest::Approx(-0.5));
    CHECK(d(1, 2) == doctest::Approx(0.5));
    CHECK(d(0, 2) == doctest::Approx(-0.5));
    CHECK(b.active_count() == 2);
}

TEST_CASE("spatial operator properties") {
    const RegionGrid grid = RegionGrid::square(3, 1.0);
    const auto zero_gamma = build_spatial_operator(grid, 0.0);
    for (const auto& e : zero_gamma.entries())
        CHECK(std::abs(e.value) == 1.0);
    CHECK(zero_gamma.nonzeros() == 2 * 9 * 8);

    const auto b = build_spatial_operator(grid, 1.3);
    const MatrixXd w = random_matrix(3, 9, 2);
    const MatrixXd wb = b.apply(w);
    REQUIRE(wb.cols() == 72);
    std::size_t active = 0;
    for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t j = 0; j < 9; ++j) {
            if (i == j)
                continue;
            const double weight = std::pow(grid.distance(i, j), -1.3);
            const VectorXd expected = weight * (w.col(static_cast<Eigen::Index>(i)) - w.col(static_cast<Eigen::Index>(j)));
            CHECK((wb.col(static_cast<Eigen::Index>(active)) - expected).norm() < 1e-12);
            CHECK((b.apply_column(w, active) - expected).norm() < 1e-12);
            ++active;
        }

    const auto lone = build_spatial_operator(RegionGrid({Eigen::Vector2d(0, 0)}), 1.0);
    CHECK(lone.rows() == 1);
    CHECK(lone.cols() == 1);
    CHECK(lone.dense().isZero());
    CHECK(lone.active_count() == 0);
}

TEST_CASE("coincident centroids without a distance floor are singular") {
    const RegionGrid grid({Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 1)}, 0.0);
    CHECK_THROWS_AS(build_spatial_operator(grid, 1.0), SingularityError);
    const RegionGrid floored({Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 1)}, 0.5);
    CHECK(build_spatial_operator(floored, 1.0).dense()(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("default distance floor is half the smallest spacing") {
    CHECK(RegionGrid::square(2, 3.0).d_min() == doctest::Approx(1.5));
    CHECK(RegionGrid({Eigen::Vector2d(0, 0)}).d_min() == 1.0);
}

TEST_CASE("tensor windows and slices") {
    CrimeTensor y(2, 4, 2);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t k = 0; k < 2; ++k)
                y(n, t, k) = static_cast<double>(100 * n + 10 * t + k);
    const CrimeTensor w = y.window(1, 2);
    CHECK(w.slots() == 2);
    CHECK(w(1, 0, 1) == 111.0);
    CHECK(y.type_slice(1)(1, 3) == 131.0);
    CHECK_THROWS_AS(y.window(3, 2), BoundsError);
    CHECK_THROWS_AS(y.type_slice(2), BoundsError);
    CHECK_THROWS_AS(CrimeTensor(0, 1, 1), DimensionError);

    FeatureTensor x(2, 3, 2, 1);
    x.at(1, 2) << 5, 6;
    CHECK(x.slot_matrix(2)(1, 1) == 6.0);
    CHECK(x.window(1, 2).at(1, 1)(0) == 5.0);
}
