#pragma once

#include "ccc/solver.hpp"
#include "ccc/tensors.hpp"

#include <functional>
#include <span>
#include <vector>

namespace ccc {

// Decay-weighted combination of past weights:
//   sum_{dt=1..G} sigma^-dt W^(t-dt) / sum_{dt=1..G} sigma^-dt
// `history` is ordered most recent first: {W^(t-1), W^(t-2), ...}.
VectorXd combine_weights(std::span<const VectorXd> history, double sigma);

// The normalized coefficients of combine_weights, most recent first.
VectorXd combine_coefficients(std::size_t window, double sigma);

struct SigmaSearch {
    double sigma_max = 10.0;
    double tol = 1e-3;
    // Coarse scan that brackets the golden-section search.
    std::size_t scan_points = 64;
};

struct SigmaEstimate {
    double sigma = 1.0;
    double loss = 0.0;
};

// Minimizes a loss over sigma in [1, sigma_max]. Returns sigma = 1 when the
// loss is flat or when 1 ties with the minimum.
SigmaEstimate minimize_sigma(const std::function<double(double)>& loss, const SigmaSearch& search);

// Squared error of predicting targets[t] by features.row(t) against the
// combined weights of the `window` previous columns, t = window..T-1.
// weights is M x T, features T x M, targets length T.
double sigma_loss(const MatrixXd& weights, const MatrixXd& features, const VectorXd& targets, std::size_t window,
                  double sigma);

SigmaEstimate estimate_sigma(const MatrixXd& weights, const MatrixXd& features, const VectorXd& targets,
                             std::size_t window, const SigmaSearch& search = {});

struct ForecastOptions {
    // G; 0 selects min(7, T-1).
    std::size_t history = 0;
    SigmaSearch search;
    // One sigma for every (region, type) instead of sigma_n(k).
    bool shared_sigma = false;
};

struct ForecastTable {
    MatrixXd sigma;      // N x K
    MatrixXd fit_loss;   // N x K
    std::size_t history = 1;
    bool shared = false;

    friend bool operator==(const ForecastTable&, const ForecastTable&) = default;
};

std::size_t default_history(std::size_t slots);

// Learns sigma_n(k) from the trained weight history W = P + Q.
ForecastTable fit_forecast(const ModelState& state, const CrimeTensor& crimes, const FeatureTensor& features,
                           const ForecastOptions& options = {});

// Predicted N x K counts for the next slot given its N x M features.
MatrixXd predict(const ModelState& state, const ForecastTable& table, const MatrixXd& future_features,
                 bool clamp_non_negative = false);

double historical_mean_forecast(std::span<const double> past);
double last_value_forecast(std::span<const double> past);

struct BaselineForecasts {
    // 0-based index of the last training slot of each origin.
    std::vector<std::size_t> origins;
    std::vector<MatrixXd> historical_mean;   // per origin, N x K
    std::vector<MatrixXd> last_value;        // per origin, N x K
};

// For each origin t0 in [window, T - horizon] (1-based): mean of the last
// `window` slots and the value at t0, both predicting slot t0 + horizon.
BaselineForecasts naive_baselines(const CrimeTensor& crimes, std::size_t window, std::size_t horizon);

} // namespace ccc
