#pragma once

#include "ccc/tensors.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ccc {

struct LoadReport {
    // (region, slot, type) cells absent from crimes.csv, filled with 0.
    std::size_t missing_crime_cells = 0;
    // (region, slot) rows absent from features.csv, filled with 0.
    std::size_t missing_feature_rows = 0;
    // Leading cells t <= lag that have no raw slot to draw from.
    std::size_t lag_padded_cells = 0;
    std::vector<std::string> warnings;
};

struct Dataset {
    CrimeTensor crimes;
    FeatureTensor features;
    RegionGrid grid;
    LoadReport report;
};

inline constexpr const char* kCrimesFile = "crimes.csv";
inline constexpr const char* kFeaturesFile = "features.csv";
inline constexpr const char* kRegionsFile = "regions.csv";

// Reads the three CSV files. Feature cell (n, t) receives the raw features
// of slot t - lag; cells T+1..T+lag hold the future features.
Dataset load_dataset(const std::filesystem::path& crimes_path, const std::filesystem::path& features_path,
                     const std::filesystem::path& regions_path, std::size_t lag,
                     std::optional<double> d_min = std::nullopt);

// Loads crimes.csv, features.csv and regions.csv from a directory.
Dataset load_dataset_dir(const std::filesystem::path& dir, std::size_t lag,
                         std::optional<double> d_min = std::nullopt);

// Inverse of load_dataset_dir. The feature tensor must have T + lag cells.
void save_dataset(const std::filesystem::path& dir, const CrimeTensor& crimes, const FeatureTensor& features,
                  const RegionGrid& grid);

// Reads one raw slot of a features CSV as an N x M matrix. With `slot`
// unset the file must contain exactly one time slot.
MatrixXd load_feature_slot(const std::filesystem::path& path, std::size_t regions,
                           std::optional<std::size_t> slot);

} // namespace ccc
