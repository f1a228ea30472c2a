#pragma once

#include "ccc/tensors.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace ccc {

// Parameters of a synthetic dataset with planted weights.
struct SynthSpec {
    std::size_t grid_side = 3;          // N = grid_side^2 regions, 1 km apart
    std::size_t slots = 30;             // T
    std::size_t types = 3;              // K
    std::size_t features = 4;           // M
    std::size_t lag = 1;                // feature lag tau
    double noise_sd = 0.0;
    std::size_t segment_length = 10;    // P*, Q* are constant over segments of this many slots
    double spatial_scale = 1.5;         // km, kernel exp(-d / scale)
    double task_correlation = 0.5;      // pairwise correlation of Q*(i), Q*(j)
    double specific_scale = 0.5;        // magnitude of Q* relative to P*
    std::optional<double> sigma_true;   // plants the decay-weighted weight process instead of segments
    std::size_t sigma_history = 3;      // window of the planted process
    bool poisson = false;               // round Y to Poisson counts with mean max(Y, 0)
    std::uint64_t seed = 1;

    std::size_t regions() const noexcept { return grid_side * grid_side; }
    void validate() const;
};

struct GroundTruth {
    std::vector<MatrixXd> P;   // per region, M x T
    std::vector<MatrixXd> Q;   // per (n*K + k), M x T
    // Noise-free X_n^t (P* + Q*(k)).
    CrimeTensor clean;
};

struct SynthDataset {
    CrimeTensor crimes;
    FeatureTensor features;   // T + lag cells
    RegionGrid grid;
    GroundTruth truth;
};

SynthDataset generate(const SynthSpec& spec);

// Writes the three dataset CSVs plus ground_truth_P.csv / ground_truth_Q.csv.
void write_synthetic(const std::filesystem::path& dir, const SynthDataset& data);

} // namespace ccc
