#pragma once

#include "ccc/forecaster.hpp"
#include "ccc/solver.hpp"
#include "ccc/tensors.hpp"

#include <cstdint>
#include <vector>

namespace ccc {

struct RunConfig {
    Hyperparams hp;
    std::size_t train_window = 7;   // slots per training window
    std::size_t horizon = 1;        // predict slot t0 + horizon
    std::size_t history = 0;        // forecaster window G; 0 picks min(7, train_window - 1)
    double sigma_max = 10.0;
    std::uint64_t seed = 1;
    bool deterministic = true;
    // Train once on the first window and reuse the model for every origin.
    bool fast = false;
    std::size_t threads = 1;
    bool shared_sigma = false;
    bool clamp = false;
    std::size_t lag = 1;

    // Checks the invariants that do not depend on data.
    void validate() const;
    void validate(std::size_t slots) const;
    std::size_t effective_history() const;
    ForecastOptions forecast_options() const;
};

// Average RMSE: (1/NK) sum_{n,k} sqrt(mean over origins of squared error).
double rmse(const std::vector<MatrixXd>& predicted, const std::vector<MatrixXd>& observed);

struct EvaluationReport {
    // 1-based last training slot of each origin; the target is origin + horizon.
    std::vector<std::size_t> origins;
    std::vector<MatrixXd> predicted;          // N x K per origin
    std::vector<MatrixXd> observed;
    std::vector<MatrixXd> last_value;
    std::vector<MatrixXd> historical_mean;
    std::vector<std::size_t> iterations;      // ADMM iterations per fit
    std::vector<StopReason> stops;
    double ccc_rmse = 0.0;
    double last_value_rmse = 0.0;
    double historical_mean_rmse = 0.0;
};

// Rolling-origin evaluation: for t0 = train_window..T-horizon fit slots
// [t0-train_window+1, t0], learn sigma and predict slot t0+horizon.
EvaluationReport evaluate(const CrimeTensor& crimes, const FeatureTensor& features, const RegionGrid& grid,
                          const RunConfig& config);

} // namespace ccc
