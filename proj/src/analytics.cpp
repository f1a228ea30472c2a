#include "ccc/analytics.hpp"

#include "ccc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ccc {

namespace {

void check_type(const CrimeTensor& crimes, std::size_t k) {
    if (k >= crimes.types())
        throw BoundsError("crime type " + std::to_string(k + 1) + " out of range, K = " +
                          std::to_string(crimes.types()));
}

} // namespace

Curve temporal_diff_curve(const CrimeTensor& crimes, std::size_t k, std::size_t max_lag) {
    check_type(crimes, k);
    const std::size_t N = crimes.regions(), T = crimes.slots();
    if (max_lag < 1 || max_lag >= T)
        throw BoundsError("max lag " + std::to_string(max_lag) + " must lie in [1, " + std::to_string(T) + ")");
    Curve curve;
    for (std::size_t dt = 1; dt <= max_lag; ++dt) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t t = 0; t + dt < T; ++t) {
                sum += std::abs(crimes(n, t, k) - crimes(n, t + dt, k));
                ++count;
            }
        curve.push_back({static_cast<double>(dt), sum / static_cast<double>(count), count});
    }
    return curve;
}

Curve spatial_diff_curve(const CrimeTensor& crimes, const RegionGrid& grid, std::size_t k, double bin_width_km) {
    check_type(crimes, k);
    if (!(bin_width_km > 0.0))
        throw ConfigError("bin width must be positive");
    const std::size_t N = crimes.regions(), T = crimes.slots();
    if (grid.regions() != N)
        throw DimensionError("grid has " + std::to_string(grid.regions()) + " regions, tensor has " +
                             std::to_string(N));
    if (N < 2)
        throw DimensionError("spatial curve needs at least two regions");

    struct Bin {
        double sum = 0.0;
        std::size_t count = 0;
    };
    std::map<std::size_t, Bin> bins;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) {
            auto& bin = bins[static_cast<std::size_t>(std::floor(grid.euclidean(i, j) / bin_width_km))];
            for (std::size_t t = 0; t < T; ++t)
                bin.sum += std::abs(crimes(i, t, k) - crimes(j, t, k));
            bin.count += T;
        }
    Curve curve;
    for (const auto& [b, bin] : bins)
        curve.push_back({(static_cast<double>(b) + 0.5) * bin_width_km, bin.sum / static_cast<double>(bin.count),
                         bin.count});
    return curve;
}

CrossTypeSimilarity cross_type_similarity(const CrimeTensor& crimes) {
    const auto K = static_cast<Eigen::Index>(crimes.types());
    std::vector<MatrixXd> slices;
    VectorXd norms(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        slices.push_back(crimes.type_slice(static_cast<std::size_t>(k)));
        norms(k) = slices.back().norm();
    }
    CrossTypeSimilarity out{MatrixXd::Zero(K, K), Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(K, K, false)};
    for (Eigen::Index i = 0; i < K; ++i)
        for (Eigen::Index j = i; j < K; ++j) {
            if (norms(i) == 0.0 || norms(j) == 0.0)
                continue;
            const double s = slices[static_cast<std::size_t>(i)].cwiseProduct(slices[static_cast<std::size_t>(j)]).sum() /
                             (norms(i) * norms(j));
            out.value(i, j) = out.value(j, i) = std::clamp(s, -1.0, 1.0);
            out.defined(i, j) = out.defined(j, i) = true;
        }
    return out;
}

CorrelationReport analyze(const CrimeTensor& crimes, const RegionGrid& grid, std::size_t max_lag,
                          double bin_width_km) {
    CorrelationReport report;
    for (std::size_t k = 0; k < crimes.types(); ++k) {
        report.temporal.push_back(temporal_diff_curve(crimes, k, max_lag));
        report.spatial.push_back(spatial_diff_curve(crimes, grid, k, bin_width_km));
    }
    report.cross_type = cross_type_similarity(crimes);
    return report;
}

} // namespace ccc
