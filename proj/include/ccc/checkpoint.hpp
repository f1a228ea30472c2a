#pragma once

#include "ccc/forecaster.hpp"
#include "ccc/solver.hpp"

#include <filesystem>

namespace ccc {

struct Checkpoint {
    Hyperparams hp;
    std::size_t lag = 1;
    ModelState state;
    ForecastTable forecast;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian binary: magic, version, hyperparameters, shapes, then every
// array column-major. Doubles are stored bit-for-bit.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace ccc
