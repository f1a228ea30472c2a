#pragma once

#include "ccc/tensors.hpp"

#include <vector>

namespace ccc {

struct CurvePoint {
    double x = 0.0;      // delta t in slots, or distance-bin center in km
    double value = 0.0;  // mean absolute crime difference
    std::size_t samples = 0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

using Curve = std::vector<CurvePoint>;

// Mean |Y_n^t(k) - Y_n^(t+dt)(k)| over all regions and valid t, dt = 1..max_lag.
Curve temporal_diff_curve(const CrimeTensor& crimes, std::size_t k, std::size_t max_lag);

// Mean |Y_i^t(k) - Y_j^t(k)| over unordered pairs and all slots, binned by the
// raw centroid distance. Bin b covers [b w, (b+1) w) and reports its center.
Curve spatial_diff_curve(const CrimeTensor& crimes, const RegionGrid& grid, std::size_t k, double bin_width_km);

struct CrossTypeSimilarity {
    MatrixXd value;   // K x K; 0 where undefined
    // defined(i, j) is false when slice i or j has zero Frobenius norm.
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> defined;
};

// <R^i, R^j> / (|R^i|_F |R^j|_F) over the N x T type slices.
CrossTypeSimilarity cross_type_similarity(const CrimeTensor& crimes);

struct CorrelationReport {
    std::vector<Curve> temporal;   // per type
    std::vector<Curve> spatial;    // per type
    CrossTypeSimilarity cross_type;
};

CorrelationReport analyze(const CrimeTensor& crimes, const RegionGrid& grid, std::size_t max_lag,
                          double bin_width_km = 1.0);

} // namespace ccc
