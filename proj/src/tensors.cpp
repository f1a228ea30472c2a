#include "ccc/tensors.hpp"

#include "ccc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ccc {

CrimeTensor::CrimeTensor(std::size_t regions, std::size_t slots, std::size_t types)
    : regions_(regions), slots_(slots), types_(types), values_(regions * slots * types, 0.0) {
    if (regions == 0 || slots == 0 || types == 0)
        throw DimensionError("crime tensor dimensions must be positive");
}

MatrixXd CrimeTensor::type_slice(std::size_t k) const {
    if (k >= types_)
        throw BoundsError("crime type " + std::to_string(k + 1) + " out of range");
    MatrixXd slice(regions_, slots_);
    for (std::size_t n = 0; n < regions_; ++n)
        for (std::size_t t = 0; t < slots_; ++t)
            slice(n, t) = (*this)(n, t, k);
    return slice;
}

CrimeTensor CrimeTensor::window(std::size_t first, std::size_t length) const {
    if (length == 0 || first + length > slots_)
        throw BoundsError("crime window [" + std::to_string(first + 1) + ", " +
                          std::to_string(first + length) + "] outside 1.." + std::to_string(slots_));
    CrimeTensor out(regions_, length, types_);
    out.counts_ = counts_;
    for (std::size_t n = 0; n < regions_; ++n)
        for (std::size_t t = 0; t < length; ++t)
            for (std::size_t k = 0; k < types_; ++k)
                out(n, t, k) = (*this)(n, first + t, k);
    return out;
}

FeatureTensor::FeatureTensor(std::size_t regions, std::size_t cells, std::size_t features, std::size_t lag)
    : regions_(regions), cells_(cells), features_(features), lag_(lag),
      values_(regions * cells * features, 0.0) {
    if (regions == 0 || cells == 0 || features == 0)
        throw DimensionError("feature tensor dimensions must be positive");
    if (lag == 0)
        throw DimensionError("feature lag must be at least 1");
}

FeatureTensor FeatureTensor::window(std::size_t first, std::size_t length) const {
    if (length == 0 || first + length > cells_)
        throw BoundsError("feature window [" + std::to_string(first + 1) + ", " +
                          std::to_string(first + length) + "] outside 1.." + std::to_string(cells_));
    FeatureTensor out(regions_, length, features_, lag_);
    for (std::size_t n = 0; n < regions_; ++n)
        for (std::size_t t = 0; t < length; ++t)
            out.at(n, t) = at(n, first + t);
    return out;
}

MatrixXd FeatureTensor::slot_matrix(std::size_t t) const {
    if (t >= cells_)
        throw BoundsError("feature cell " + std::to_string(t + 1) + " out of range");
    MatrixXd out(regions_, features_);
    for (std::size_t n = 0; n < regions_; ++n)
        out.row(static_cast<Eigen::Index>(n)) = at(n, t).transpose();
    return out;
}

namespace {

double default_floor(const std::vector<Eigen::Vector2d>& centroids) {
    if (centroids.size() < 2)
        return 1.0;
    double spacing = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < centroids.size(); ++i)
        for (std::size_t j = i + 1; j < centroids.size(); ++j)
            spacing = std::min(spacing, (centroids[i] - centroids[j]).norm());
    return 0.5 * spacing;
}

} // namespace

RegionGrid::RegionGrid(std::vector<Eigen::Vector2d> centroids)
    : centroids_(std::move(centroids)) {
    d_min_ = default_floor(centroids_);
}

RegionGrid::RegionGrid(std::vector<Eigen::Vector2d> centroids, double d_min)
    : centroids_(std::move(centroids)), d_min_(d_min) {
    if (!(d_min >= 0.0) || !std::isfinite(d_min))
        throw ConfigError("d_min must be a finite non-negative distance");
}

double RegionGrid::euclidean(std::size_t i, std::size_t j) const {
    return (centroids_.at(i) - centroids_.at(j)).norm();
}

double RegionGrid::distance(std::size_t i, std::size_t j) const {
    return std::max(euclidean(i, j), d_min_);
}

RegionGrid RegionGrid::square(std::size_t side, double spacing) {
    std::vector<Eigen::Vector2d> centroids;
    centroids.reserve(side * side);
    for (std::size_t row = 0; row < side; ++row)
        for (std::size_t col = 0; col < side; ++col)
            centroids.emplace_back(spacing * static_cast<double>(col), spacing * static_cast<double>(row));
    return RegionGrid(std::move(centroids));
}

std::size_t DifferenceOperator::nonzeros() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [](const Entry& e) { return e.value != 0.0; }));
}

void DifferenceOperator::index_entries() {
    // entries_ is emitted column by column, two per active column
    by_column_.assign(active_.size(), {});
    by_row_.assign(rows_, {});
    std::size_t active = 0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        while (active_[active] != e.col)
            ++active;
        by_column_[active].push_back({e.row, e.value});
        by_row_[e.row].push_back({active, e.value});
    }
}

MatrixXd DifferenceOperator::dense() const {
    MatrixXd out = MatrixXd::Zero(rows_, cols_);
    for (const auto& e : entries_)
        out(e.row, e.col) += e.value;
    return out;
}

DifferenceOperator DifferenceOperator::scaled(double factor) const {
    DifferenceOperator out = *this;
    for (auto& e : out.entries_)
        e.value *= factor;
    out.index_entries();
    return out;
}

MatrixXd DifferenceOperator::apply(const MatrixXd& weights) const {
    if (static_cast<std::size_t>(weights.cols()) != rows_)
        throw DimensionError("operator expects " + std::to_string(rows_) + " weight columns, got " +
                             std::to_string(weights.cols()));
    MatrixXd out = MatrixXd::Zero(weights.rows(), static_cast<Eigen::Index>(active_.size()));
    for (std::size_t a = 0; a < active_.size(); ++a)
        for (const auto& rv : by_column_[a])
            out.col(static_cast<Eigen::Index>(a)) += rv.value * weights.col(static_cast<Eigen::Index>(rv.row));
    return out;
}

VectorXd DifferenceOperator::apply_column(const MatrixXd& weights, std::size_t active) const {
    VectorXd out = VectorXd::Zero(weights.rows());
    for (const auto& rv : by_column_.at(active))
        out += rv.value * weights.col(static_cast<Eigen::Index>(rv.row));
    return out;
}

DifferenceOperator build_temporal_operator(std::size_t slots, double beta) {
    if (slots < 2)
        throw DimensionError("temporal operator needs at least 2 time slots, got " + std::to_string(slots));
    if (!(beta >= 0.0) || !std::isfinite(beta))
        throw ConfigError("beta must be finite and non-negative");
    DifferenceOperator op;
    op.kind_ = OperatorKind::temporal;
    op.rows_ = slots;
    op.cols_ = slots - 1;
    op.strength_ = beta;
    for (std::size_t t = 0; t + 1 < slots; ++t) {
        op.active_.push_back(t);
        op.entries_.push_back({t, t, beta});
        op.entries_.push_back({t + 1, t, -beta});
    }
    op.index_entries();
    return op;
}

DifferenceOperator build_spatial_operator(const RegionGrid& grid, double gamma) {
    const std::size_t regions = grid.regions();
    if (regions == 0)
        throw DimensionError("spatial operator needs at least one region");
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
        throw ConfigError("gamma must be finite and non-negative");
    DifferenceOperator op;
    op.kind_ = OperatorKind::spatial;
    op.rows_ = regions;
    op.cols_ = regions * regions;
    op.strength_ = gamma;
    for (std::size_t i = 0; i < regions; ++i) {
        for (std::size_t j = 0; j < regions; ++j) {
            if (i == j)
                continue;
            const double d = grid.distance(i, j);
            if (!(d > 0.0))
                throw SingularityError("regions " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                                       " share a centroid and d_min is 0");
            const double w = std::pow(d, -gamma);
            const std::size_t col = i * regions + j;
            op.active_.push_back(col);
            op.entries_.push_back({i, col, w});
            op.entries_.push_back({j, col, -w});
        }
    }
    op.index_entries();
    return op;
}

} // namespace ccc
