#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace ccc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Crime counts Y, dense over (region n, time slot t, crime type k).
// Indices are 0-based in memory; file formats and messages use 1-based ids.
class CrimeTensor {
public:
    CrimeTensor() = default;
    CrimeTensor(std::size_t regions, std::size_t slots, std::size_t types);

    std::size_t regions() const noexcept { return regions_; }
    std::size_t slots() const noexcept { return slots_; }
    std::size_t types() const noexcept { return types_; }

    double operator()(std::size_t n, std::size_t t, std::size_t k) const {
        return values_[index(n, t, k)];
    }
    double& operator()(std::size_t n, std::size_t t, std::size_t k) {
        return values_[index(n, t, k)];
    }

    // Whether the tensor holds count data (all values >= 0). Synthetic
    // Gaussian data clears this flag.
    bool counts() const noexcept { return counts_; }
    void set_counts(bool counts) noexcept { counts_ = counts; }

    // R^k: the N x T matrix of type k.
    MatrixXd type_slice(std::size_t k) const;

    // Slots [first, first + length).
    CrimeTensor window(std::size_t first, std::size_t length) const;

    std::span<const double> raw() const noexcept { return values_; }

    friend bool operator==(const CrimeTensor&, const CrimeTensor&) = default;

private:
    std::size_t index(std::size_t n, std::size_t t, std::size_t k) const noexcept {
        return (n * slots_ + t) * types_ + k;
    }

    std::size_t regions_ = 0;
    std::size_t slots_ = 0;
    std::size_t types_ = 0;
    bool counts_ = true;
    std::vector<double> values_;
};

// Feature vectors X_n^t, shared by every crime type. Cell t was built from
// raw data of slot t - lag, so a tensor over T training slots carries
// T + lag cells: the trailing `lag` cells are the features of the future
// slots T+1..T+lag, available at the end of slot T.
class FeatureTensor {
public:
    FeatureTensor() = default;
    FeatureTensor(std::size_t regions, std::size_t cells, std::size_t features, std::size_t lag);

    std::size_t regions() const noexcept { return regions_; }
    std::size_t cells() const noexcept { return cells_; }
    std::size_t features() const noexcept { return features_; }
    std::size_t lag() const noexcept { return lag_; }

    Eigen::Map<const VectorXd> at(std::size_t n, std::size_t t) const {
        return Eigen::Map<const VectorXd>(values_.data() + offset(n, t), static_cast<Eigen::Index>(features_));
    }
    Eigen::Map<VectorXd> at(std::size_t n, std::size_t t) {
        return Eigen::Map<VectorXd>(values_.data() + offset(n, t), static_cast<Eigen::Index>(features_));
    }

    // Cells [first, first + length); the lag metadata is kept.
    FeatureTensor window(std::size_t first, std::size_t length) const;

    // N x M matrix of the features at cell t.
    MatrixXd slot_matrix(std::size_t t) const;

    std::span<const double> raw() const noexcept { return values_; }

    friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;

private:
    std::size_t offset(std::size_t n, std::size_t t) const noexcept {
        return (n * cells_ + t) * features_;
    }

    std::size_t regions_ = 0;
    std::size_t cells_ = 0;
    std::size_t features_ = 0;
    std::size_t lag_ = 1;
    std::vector<double> values_;
};

// Region centroids in kilometers with the distance floor used by the
// spatial operator.
class RegionGrid {
public:
    RegionGrid() = default;
    // d_min defaults to half the smallest inter-centroid spacing (1 km for a
    // single region).
    explicit RegionGrid(std::vector<Eigen::Vector2d> centroids);
    RegionGrid(std::vector<Eigen::Vector2d> centroids, double d_min);

    std::size_t regions() const noexcept { return centroids_.size(); }
    const Eigen::Vector2d& centroid(std::size_t n) const { return centroids_.at(n); }
    const std::vector<Eigen::Vector2d>& centroids() const noexcept { return centroids_; }
    double d_min() const noexcept { return d_min_; }

    double euclidean(std::size_t i, std::size_t j) const;
    // max(euclidean, d_min)
    double distance(std::size_t i, std::size_t j) const;

    // Regular side x side lattice with `spacing` km between neighbours.
    static RegionGrid square(std::size_t side, double spacing = 1.0);

    friend bool operator==(const RegionGrid&, const RegionGrid&) = default;

private:
    std::vector<Eigen::Vector2d> centroids_;
    double d_min_ = 1.0;
};

enum class OperatorKind { temporal, spatial };

// Sparse difference operator (A of shape T x (T-1), or B of shape N x N^2).
//
// Columns are addressed in two ways: the full column index of the dense
// matrix, and the position among the structurally active columns. B only
// has N(N-1) active columns (the i != j pairs), and every product W * op
// returned here is restricted to those, in ascending full-column order.
class DifferenceOperator {
public:
    struct Entry {
        std::size_t row;
        std::size_t col;
        double value;
    };
    struct RowValue {
        std::size_t row;
        double value;
    };
    struct ColumnValue {
        std::size_t active;
        double value;
    };

    DifferenceOperator() = default;

    OperatorKind kind() const noexcept { return kind_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double strength() const noexcept { return strength_; }

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t nonzeros() const noexcept;

    std::size_t active_count() const noexcept { return active_.size(); }
    const std::vector<std::size_t>& active_columns() const noexcept { return active_; }
    std::span<const RowValue> column(std::size_t active) const { return by_column_.at(active); }
    std::span<const ColumnValue> row(std::size_t r) const { return by_row_.at(r); }

    MatrixXd dense() const;

    // Same structure with every value multiplied by `factor`.
    DifferenceOperator scaled(double factor) const;

    // W * op over active columns; W has `rows()` columns.
    MatrixXd apply(const MatrixXd& weights) const;
    // Column `active` of W * op.
    VectorXd apply_column(const MatrixXd& weights, std::size_t active) const;

    friend DifferenceOperator build_temporal_operator(std::size_t slots, double beta);
    friend DifferenceOperator build_spatial_operator(const RegionGrid& grid, double gamma);

private:
    void index_entries();

    OperatorKind kind_ = OperatorKind::temporal;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    double strength_ = 0.0;
    std::vector<Entry> entries_;
    std::vector<std::size_t> active_;
    std::vector<std::vector<RowValue>> by_column_;
    std::vector<std::vector<ColumnValue>> by_row_;
};

// A(t, t) = beta, A(t+1, t) = -beta.
DifferenceOperator build_temporal_operator(std::size_t slots, double beta);

// B(i, (i-1)N + j) = d(i,j)^-gamma, B(j, (i-1)N + j) = -d(i,j)^-gamma, i != j.
DifferenceOperator build_spatial_operator(const RegionGrid& grid, double gamma);

} // namespace ccc
