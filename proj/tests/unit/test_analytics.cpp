#include "ccc/analytics.hpp"
#include "ccc/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ccc;

namespace {

CrimeTensor random_tensor(std::size_t n, std::size_t t, std::size_t k, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    CrimeTensor y(n, t, k);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < t; ++b)
            for (std::size_t c = 0; c < k; ++c)
                y(a, b, c) = u(rng);
    return y;
}

} // namespace

TEST_CASE("temporal curve") {
    CrimeTensor flat(3, 6, 1);
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t t = 0; t < 6; ++t)
            flat(n, t, 0) = 2.0 + static_cast<double>(n);
    for (const auto& p : temporal_diff_curve(flat, 0, 5))
        CHECK(p.value == 0.0);

    CrimeTensor ramp(1, 8, 1);
    for (std::size_t t = 0; t < 8; ++t)
        ramp(0, t, 0) = static_cast<double>(t + 1);
    const Curve c = temporal_diff_curve(ramp, 0, 7);
    REQUIRE(c.size() == 7);
    for (std::size_t dt = 1; dt <= 7; ++dt) {
        CHECK(c[dt - 1].x == static_cast<double>(dt));
        CHECK(c[dt - 1].value == doctest::Approx(static_cast<double>(dt)));
        CHECK(c[dt - 1].samples == 8 - dt);
    }

    const CrimeTensor y = random_tensor(2, 4, 1, 3);
    const Curve r = temporal_diff_curve(y, 0, 3);
    for (std::size_t dt = 1; dt <= 3; ++dt) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t t = 0; t + dt < 4; ++t, ++count)
                sum += std::abs(y(n, t, 0) - y(n, t + dt, 0));
        CHECK(std::abs(r[dt - 1].value - sum / count) < 1e-12);
    }

    CHECK_THROWS_AS(temporal_diff_curve(y, 1, 2), BoundsError);
    CHECK_THROWS_AS(temporal_diff_curve(y, 0, 4), BoundsError);
    CHECK_THROWS_AS(temporal_diff_curve(y, 0, 0), BoundsError);
}

TEST_CASE("spatial curve") {
    const RegionGrid two({Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 2.5)});
    CrimeTensor shifted(2, 4, 1);
    for (std::size_t t = 0; t < 4; ++t) {
        shifted(0, t, 0) = static_cast<double>(t);
        shifted(1, t, 0) = static_cast<double>(t) + 3.0;
    }
    const Curve c = spatial_diff_curve(shifted, two, 0, 1.0);
    REQUIRE(c.size() == 1);
    CHECK(c[0].value == doctest::Approx(3.0));
    CHECK(c[0].x == doctest::Approx(2.5));
    CHECK(c[0].samples == 4);

    const RegionGrid grid = RegionGrid::square(3);
    CrimeTensor same(9, 3, 1);
    for (std::size_t n = 0; n < 9; ++n)
        for (std::size_t t = 0; t < 3; ++t)
            same(n, t, 0) = static_cast<double>(t * t);
    for (const auto& p : spatial_diff_curve(same, grid, 0, 0.5))
        CHECK(p.value == 0.0);

    CHECK_THROWS_AS(spatial_diff_curve(same, grid, 0, 0.0), ConfigError);
    CHECK_THROWS_AS(spatial_diff_curve(CrimeTensor(1, 3, 1), RegionGrid::square(1), 0, 1.0), DimensionError);
}

TEST_CASE("cross-type similarity") {
    CrimeTensor y(2, 2, 2);
    y(0, 0, 0) = 1;
    y(1, 1, 0) = 1;
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t t = 0; t < 2; ++t)
            y(n, t, 1) = 1;
    const CrossTypeSimilarity s = cross_type_similarity(y);
    CHECK(s.value(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(s.value(1, 0) == s.value(0, 1));
    CHECK(s.value(0, 0) == doctest::Approx(1.0));

    CrimeTensor disjoint(2, 2, 2);
    disjoint(0, 0, 0) = 3;
    disjoint(1, 1, 1) = 2;
    CHECK(cross_type_similarity(disjoint).value(0, 1) == 0.0);

    CrimeTensor empty_type(2, 2, 2);
    empty_type(0, 0, 0) = 1;
    const CrossTypeSimilarity e = cross_type_similarity(empty_type);
    CHECK(e.defined(0, 0));
    CHECK_FALSE(e.defined(0, 1));
    CHECK_FALSE(e.defined(1, 1));
}

TEST_CASE("analyze bundles every type") {
    const CrimeTensor y = random_tensor(4, 5, 3, 8);
    const CorrelationReport r = analyze(y, RegionGrid::square(2), 4);
    CHECK(r.temporal.size() == 3);
    CHECK(r.spatial.size() == 3);
    CHECK(r.cross_type.value.rows() == 3);
    CHECK(r.temporal[2] == temporal_diff_curve(y, 2, 4));
}
